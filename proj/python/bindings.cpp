#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "mlpmcmc/error.hpp"
#include "mlpmcmc/experiments.hpp"
#include "mlpmcmc/filters.hpp"
#include "mlpmcmc/functional.hpp"
#include "mlpmcmc/io.hpp"
#include "mlpmcmc/mcmc.hpp"
#include "mlpmcmc/multilevel.hpp"

namespace py = pybind11;
using namespace mlpmcmc;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

// Parameters travel as plain dicts: {"kind": "ssm", "V0": 1.0, ...}.
py::dict params_to_dict(const ModelParams& theta) {
    py::dict d;
    d["kind"] = std::string(to_string(theta.model_kind));
    for (ParamId id : kAllParams) d[py::str(std::string(name(id)))] = theta.get(id);
    d["estimate_H"] = theta.estimate_H;
    return d;
}

ModelParams params_from_dict(const py::dict& d) {
    ModelKind kind = ModelKind::StateSpace;
    bool estimate_H = false;
    if (d.contains("kind")) kind = parse_model_kind(d["kind"].cast<std::string>());
    if (d.contains("estimate_H")) estimate_H = d["estimate_H"].cast<bool>();
    ModelParams theta = default_params(kind, estimate_H);
    for (auto item : d) {
        const auto key = item.first.cast<std::string>();
        if (key == "kind" || key == "estimate_H") continue;
        theta.set(parse_param_id(key), item.second.cast<double>());
    }
    validate(theta);
    return theta;
}

ObservationSeries series(const std::vector<double>& y, double y0) { return ObservationSeries{y0, y}; }

std::vector<Functional> functionals_for(const ModelParams& theta, const std::optional<std::vector<std::string>>& exprs) {
    if (!exprs) return coordinate_functionals(theta.model_kind, theta.estimate_H);
    std::vector<Functional> out;
    for (const auto& e : *exprs) out.push_back(parse_functional(e));
    return out;
}

EstimatorOptions estimator_options(const ModelParams& theta, const ObservationSeries& obs, std::size_t particles,
                                   const std::optional<std::vector<double>>& step_sizes, double burn_in,
                                   std::uint64_t seed) {
    EstimatorOptions opts;
    opts.chain.particles = particles;
    opts.chain.fixed = theta;
    opts.burn_in = burn_in;
    if (step_sizes) {
        opts.chain.proposal.step_sizes = *step_sizes;
    } else {
        opts.chain.proposal = tune_proposal(obs, Level{0}, opts.chain, TuningOptions{}, seed).proposal;
    }
    return opts;
}

py::dict chain_to_dict(const Chain& chain, std::span<const Functional> phis, double burn_in) {
    const std::size_t rows = chain.records.size();
    const std::size_t dim = rows ? chain.records[0].z.size() : 0;
    py::array_t<double> z({rows, dim});
    auto zv = z.mutable_unchecked<2>();
    std::vector<double> log_z;
    std::vector<bool> accepted;
    for (std::size_t k = 0; k < rows; ++k) {
        for (std::size_t i = 0; i < dim; ++i) zv(k, i) = chain.records[k].z.z[i];
        log_z.push_back(chain.records[k].log_z);
        accepted.push_back(chain.records[k].accepted);
    }
    std::vector<std::string> labels;
    for (ParamId id : active_parameters(chain.records.at(0).theta)) labels.push_back(coordinate_label(id));
    py::dict d;
    d["coordinates"] = labels;
    d["z"] = z;
    d["log_z"] = to_array(log_z);
    d["accepted"] = accepted;
    d["acceptance_rate"] = chain.acceptance_rate;
    d["estimate"] = ergodic_average(chain, phis, burn_in);
    return d;
}

}  // namespace

PYBIND11_MODULE(_mlpmcmc, m) {
    m.doc() = "Multilevel particle MCMC for partially observed stochastic Volterra equations.";

    static py::exception<Error> error(m, "Error", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, (std::string("[") + to_string(e.kind()) + "] " + e.what()).c_str());
        }
    });

    m.def("kernel", [](double C, double H, double t) { return kernel_eval(KernelParams{C, H}, t); }, py::arg("C"),
          py::arg("H"), py::arg("t"), "C * t^H.");

    m.def("default_params", [](const std::string& kind) { return params_to_dict(default_params(parse_model_kind(kind))); },
          py::arg("kind") = "ssm", "Default parameter dict for 'ssm' or 'sv'.");

    m.def(
        "volatility_path",
        [](const py::dict& params, const std::vector<double>& increments, int level, int horizon) {
            const ModelParams theta = params_from_dict(params);
            const IncrementPath w{make_level(level), horizon, increments};
            return to_array(euler_volatility_path(theta.vol, theta.kernel, w).values);
        },
        py::arg("params"), py::arg("increments"), py::arg("level"), py::arg("horizon"),
        "Euler volatility path on the level grid, V at 0, step, ..., horizon.");

    m.def(
        "simulate",
        [](const py::dict& params, int T, int level, std::uint64_t seed, double y0) {
            Stream rng(seed);
            const auto ds = generate_synthetic(params_from_dict(params), T, make_level(level), rng, y0);
            py::dict d;
            d["y0"] = ds.y.y0;
            d["y"] = to_array(ds.y.y);
            d["v"] = to_array(ds.latent_truth.values);
            return d;
        },
        py::arg("params"), py::arg("T"), py::arg("level") = 6, py::arg("seed") = 0, py::arg("y0") = 0.0,
        "Synthetic observations y_1..y_T and the latent volatility path.");

    m.def(
        "particle_filter",
        [](const std::vector<double>& y, const py::dict& params, int level, std::size_t particles, std::uint64_t seed,
           double y0) {
            const auto out = particle_filter(series(y, y0), make_level(level), particles, params_from_dict(params), seed);
            return py::make_tuple(out.log_z, to_array(out.trajectory.values));
        },
        py::arg("y"), py::arg("params"), py::arg("level"), py::arg("particles"), py::arg("seed") = 0,
        py::arg("y0") = 0.0, "Returns (log z_hat, selected increment trajectory).");

    m.def(
        "delta_particle_filter",
        [](const std::vector<double>& y, const py::dict& params, int level, std::size_t particles, std::uint64_t seed,
           double y0) {
            const auto out =
                delta_particle_filter(series(y, y0), make_level(level), particles, params_from_dict(params), seed);
            return py::make_tuple(out.log_z, to_array(out.fine.values), to_array(out.coarse.values));
        },
        py::arg("y"), py::arg("params"), py::arg("level"), py::arg("particles"), py::arg("seed") = 0,
        py::arg("y0") = 0.0, "Returns (log z_hat, fine increments, coarse increments).");

    m.def(
        "pmcmc",
        [](const std::vector<double>& y, const py::dict& params, int level, std::size_t particles,
           std::size_t iterations, std::uint64_t seed, std::optional<std::vector<double>> step_sizes, double burn_in,
           std::optional<std::vector<std::string>> functionals, double y0) {
            const ModelParams theta = params_from_dict(params);
            const auto obs = series(y, y0);
            EstimatorOptions opts = estimator_options(theta, obs, particles, step_sizes, burn_in, derive_seed(seed, 2));
            opts.chain.iterations = iterations;
            const auto phis = functionals_for(theta, functionals);
            const Chain chain = pmcmc_chain(obs, make_level(level), opts.chain, derive_seed(seed, 3));
            py::dict d = chain_to_dict(chain, phis, burn_in);
            std::vector<std::string> names;
            for (const auto& phi : phis) names.push_back(phi.name);
            d["names"] = names;
            d["step_sizes"] = opts.chain.proposal.step_sizes;
            return d;
        },
        py::arg("y"), py::arg("params"), py::arg("level"), py::arg("particles") = 100, py::arg("iterations") = 1000,
        py::arg("seed") = 0, py::arg("step_sizes") = py::none(), py::arg("burn_in") = 0.1,
        py::arg("functionals") = py::none(), py::arg("y0") = 0.0,
        "Single-level particle marginal Metropolis-Hastings chain. Parameters not sampled keep the values in params.");

    m.def(
        "mlpmcmc",
        [](const std::vector<double>& y, const py::dict& params, int base_level, const std::vector<std::size_t>& M,
           std::size_t particles, std::uint64_t seed, std::optional<std::vector<double>> step_sizes, double burn_in,
           std::optional<std::vector<std::string>> functionals, double y0) {
            const ModelParams theta = params_from_dict(params);
            const auto obs = series(y, y0);
            const EstimatorOptions opts =
                estimator_options(theta, obs, particles, step_sizes, burn_in, derive_seed(seed, 2));
            LevelAllocation alloc;
            alloc.base_level = base_level;
            alloc.max_level = base_level + static_cast<int>(M.size()) - 1;
            alloc.M = M;
            const auto phis = functionals_for(theta, functionals);
            const auto run = ml_estimate(obs, alloc, opts, phis, derive_seed(seed, 4));
            py::dict d;
            d["names"] = run.estimate.names;
            d["value"] = run.estimate.value;
            d["components"] = run.estimate.components;
            d["costs"] = run.estimate.costs;
            d["seeds"] = run.estimate.seeds;
            std::vector<double> acceptance;
            for (const auto& c : run.chains) acceptance.push_back(c.acceptance_rate);
            d["acceptance"] = acceptance;
            d["step_sizes"] = opts.chain.proposal.step_sizes;
            return d;
        },
        py::arg("y"), py::arg("params"), py::arg("base_level"), py::arg("M"), py::arg("particles") = 100,
        py::arg("seed") = 0, py::arg("step_sizes") = py::none(), py::arg("burn_in") = 0.1,
        py::arg("functionals") = py::none(), py::arg("y0") = 0.0,
        "Multilevel estimate over levels base_level..base_level+len(M)-1 with chain lengths M.");

    m.def(
        "choose_levels",
        [](double epsilon, double H, double c_M, double c_L, std::size_t M_min) {
            const auto alloc = choose_levels(epsilon, H, AllocationConstants{c_M, c_L, M_min});
            return py::make_tuple(alloc.max_level, alloc.M);
        },
        py::arg("epsilon"), py::arg("H"), py::arg("c_M") = 1.0, py::arg("c_L") = 1.0, py::arg("M_min") = 50,
        "Returns (L, [M_0, ..., M_L]).");

    m.def(
        "return_stats",
        [](const std::vector<double>& returns) {
            const auto s = return_stats(returns);
            py::dict d;
            d["n"] = s.n;
            d["mean"] = s.mean;
            d["variance"] = s.variance;
            d["skewness"] = s.skewness ? py::cast(*s.skewness) : py::none();
            d["kurtosis"] = s.kurtosis ? py::cast(*s.kurtosis) : py::none();
            return d;
        },
        py::arg("returns"), "Mean, unbiased variance, skewness and (non-excess) kurtosis.");

    m.def(
        "lagged_abs_correlation",
        [](const std::vector<double>& returns, int max_lag) {
            py::dict d;
            for (const auto& lc : lagged_abs_correlation(returns, max_lag)) {
                d[py::int_(lc.lag)] = lc.correlation ? py::cast(*lc.correlation) : py::none();
            }
            return d;
        },
        py::arg("returns"), py::arg("max_lag"), "{lag j: correlation of |r_t| with r_{t-j}} for j = -max_lag..max_lag.");

    m.def("log_returns", [](const std::vector<double>& prices) { return to_array(log_returns(prices)); },
          py::arg("prices"));

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_text, const std::string& out_dir,
           std::optional<std::uint64_t> seed) {
            RunConfig cfg = parse_config_text(config_text);
            cfg.out_dir = out_dir;
            if (seed) cfg.seed = *seed;
            py::gil_scoped_release release;
            run_command(command, cfg);
        },
        py::arg("command"), py::arg("config") = "", py::arg("out_dir") = "out", py::arg("seed") = py::none(),
        "Runs a command line subcommand with INI config text and writes its files to out_dir.");
}
