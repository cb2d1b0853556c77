#include "mlpmcmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlpmcmc/error.hpp"
#include "mlpmcmc/parallel.hpp"

namespace mlpmcmc {

namespace {

[[noreturn]] void domain_error(const char* op, const std::string& detail) {
    throw Error(ErrorKind::Domain, "experiments", op, detail);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> differences(const ObservationSeries& obs) {
    std::vector<double> out(obs.y.size());
    for (int t = 1; t <= obs.horizon(); ++t) out[static_cast<std::size_t>(t - 1)] = obs.at(t) - obs.prev(t);
    return out;
}

/// mean, variance, skewness, kurtosis, then the lag curve.
std::vector<double> summary_vector(std::span<const double> returns, int max_lag) {
    const ReturnStats s = return_stats(returns);
    std::vector<double> out{s.mean, s.variance, s.skewness.value_or(kNaN), s.kurtosis.value_or(kNaN)};
    for (const auto& lc : lagged_abs_correlation(returns, max_lag)) out.push_back(lc.correlation.value_or(kNaN));
    return out;
}

}  // namespace

SyntheticDataset generate_synthetic(const ModelParams& true_theta, int horizon, Level data_level, Stream& rng,
                                    double y0) {
    if (horizon < 1) domain_error("generate_synthetic", "T must be >= 1");
    validate(true_theta.kernel);
    if (!(std::abs(true_theta.rho) <= 1.0)) domain_error("generate_synthetic", "rho must lie in [-1, 1]");
    if (!(true_theta.sigma_obs >= 0.0)) domain_error("generate_synthetic", "sigma_obs must be non-negative");

    SyntheticDataset ds;
    ds.true_theta = true_theta;
    ds.data_level = data_level;
    ds.increments = sample_increments(data_level, horizon, rng);
    ds.latent_truth = euler_volatility_path(true_theta.vol, true_theta.kernel, ds.increments);
    ds.y.y0 = y0;
    ds.y.y.resize(static_cast<std::size_t>(horizon));

    const auto per = static_cast<std::size_t>(data_level.steps_per_unit());
    double prev = y0;
    for (int t = 1; t <= horizon; ++t) {
        const double xi = rng.normal();
        double yt = 0.0;
        if (true_theta.model_kind == ModelKind::StateSpace) {
            yt = ds.latent_truth.at_unit(t) + true_theta.sigma_obs * xi;
        } else {
            const auto begin = static_cast<std::size_t>(t - 1) * per;
            const auto w = ds.increments.block(t);
            double noise = 0.0;
            double energy = 0.0;
            for (std::size_t k = 0; k < per; ++k) {
                const double a = std::abs(ds.latent_truth.values[begin + k]);
                noise += std::sqrt(a) * w[k];
                energy += a;
            }
            const double var = (1.0 - true_theta.rho) * (1.0 + true_theta.rho) * data_level.step() * energy;
            const double drift = true_theta.drift_in_mean ? true_theta.r : 0.0;
            yt = prev + drift + true_theta.rho * noise + std::sqrt(var) * xi;
        }
        ds.y.y[static_cast<std::size_t>(t - 1)] = yt;
        prev = yt;
    }
    return ds;
}

std::string_view to_string(Method m) { return m == Method::Single ? "PMCMC" : "MLPMCMC"; }

double fit_loglog_slope(std::span<const double> mse, std::span<const double> cost) {
    if (mse.size() != cost.size()) domain_error("fit_loglog_slope", "mse and cost differ in length");
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < mse.size(); ++i) {
        if (mse[i] > 0.0 && cost[i] > 0.0 && std::isfinite(mse[i]) && std::isfinite(cost[i])) {
            x.push_back(std::log(mse[i]));
            y.push_back(std::log(cost[i]));
        }
    }
    if (x.size() < 3) {
        throw Error(ErrorKind::InsufficientData, "experiments", "rate_study",
                    "need at least 3 usable grid points, have " + std::to_string(x.size()));
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) {
        throw Error(ErrorKind::InsufficientData, "experiments", "rate_study", "all MSE values coincide");
    }
    return sxy / sxx;
}

std::size_t single_level_iterations(double epsilon, const AllocationConstants& constants) {
    const double raw = constants.c_M * std::pow(epsilon, -2.0);
    return std::max(constants.M_min, static_cast<std::size_t>(std::ceil(raw)));
}

RateStudyResult rate_study(const ObservationSeries& obs, Method method, const RateStudyConfig& config,
                           std::span<const Functional> phis, std::span<const double> reference, std::uint64_t seed) {
    if (reference.size() != phis.size()) domain_error("rate_study", "reference must hold one value per functional");
    if (config.epsilons.size() < 3) {
        throw Error(ErrorKind::InsufficientData, "experiments", "rate_study", "need at least 3 grid points");
    }
    if (config.replicates < 1) domain_error("rate_study", "replicates must be >= 1");

    RateStudyResult result;
    result.method = method;
    for (const auto& phi : phis) result.names.push_back(phi.name);

    const std::size_t grid = config.epsilons.size();
    const std::size_t reps = config.replicates;
    std::vector<LevelAllocation> allocs;
    for (double eps : config.epsilons) allocs.push_back(choose_levels(eps, config.H, config.constants));

    result.runs.resize(grid * reps);
    EstimatorOptions inner = config.options;
    inner.threads = 1;
    parallel_for(grid * reps, config.options.threads, [&](std::size_t job) {
        const std::size_t g = job / reps;
        const std::size_t r = job % reps;
        const LevelAllocation& alloc = allocs[g];
        const std::uint64_t run_seed = derive_seed(derive_seed(seed, g), r);
        RateRun run;
        run.epsilon = config.epsilons[g];
        run.max_level = alloc.max_level;
        run.replicate = r;
        if (method == Method::Multilevel) {
            const auto ml = ml_estimate(obs, alloc, inner, phis, run_seed);
            run.estimate = ml.estimate.value;
            run.cost = ml.estimate.total_cost();
        } else {
            const std::size_t m = single_level_iterations(run.epsilon, config.constants);
            auto single = single_level_estimate(obs, Level{alloc.max_level}, m, inner, phis, run_seed);
            run.estimate = std::move(single.value);
            run.cost = single.cost;
        }
        for (std::size_t f = 0; f < phis.size(); ++f) {
            const double d = run.estimate[f] - reference[f];
            run.squared_error.push_back(d * d);
        }
        result.runs[job] = std::move(run);
    });

    for (std::size_t g = 0; g < grid; ++g) {
        RateGridPoint point;
        point.epsilon = config.epsilons[g];
        point.max_level = allocs[g].max_level;
        point.mse.assign(phis.size(), 0.0);
        for (std::size_t r = 0; r < reps; ++r) {
            const RateRun& run = result.runs[g * reps + r];
            point.cost += run.cost / static_cast<double>(reps);
            for (std::size_t f = 0; f < phis.size(); ++f) {
                point.mse[f] += run.squared_error[f] / static_cast<double>(reps);
            }
        }
        result.grid.push_back(std::move(point));
    }

    for (std::size_t f = 0; f < phis.size(); ++f) {
        std::vector<double> mse;
        std::vector<double> cost;
        for (const auto& point : result.grid) {
            mse.push_back(point.mse[f]);
            cost.push_back(point.cost);
        }
        result.slope.push_back(fit_loglog_slope(mse, cost));
    }
    return result;
}

std::vector<double> log_returns(std::span<const double> prices) {
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!(prices[i] > 0.0) || !std::isfinite(prices[i])) {
            domain_error("log_returns", "price at position " + std::to_string(i + 1) + " is not positive");
        }
    }
    std::vector<double> out;
    for (std::size_t i = 1; i < prices.size(); ++i) out.push_back(std::log(prices[i]) - std::log(prices[i - 1]));
    return out;
}

ReturnStats return_stats(std::span<const double> returns) {
    if (returns.size() < 2) {
        throw Error(ErrorKind::InsufficientData, "experiments", "return_stats", "need at least two returns");
    }
    // Single-pass central moment updates.
    double n = 0.0, mean = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : returns) {
        const double n1 = n;
        n += 1.0;
        const double delta = x - mean;
        const double delta_n = delta / n;
        const double delta_n2 = delta_n * delta_n;
        const double term1 = delta * delta_n * n1;
        mean += delta_n;
        m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * m2 - 4.0 * delta_n * m3;
        m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * m2;
        m2 += term1;
    }
    ReturnStats s;
    s.n = returns.size();
    s.mean = mean;
    s.variance = m2 / (n - 1.0);
    if (m2 > 0.0) {
        const double c2 = m2 / n;
        s.skewness = (m3 / n) / std::pow(c2, 1.5);
        s.kurtosis = (m4 / n) / (c2 * c2);
    }
    return s;
}

ReturnStats return_stats_from_prices(std::span<const double> prices) {
    return return_stats(log_returns(prices));
}

std::vector<LagCorrelation> lagged_abs_correlation(std::span<const double> returns, int max_lag) {
    if (max_lag < 1) domain_error("lagged_abs_correlation", "max_lag must be >= 1");
    const auto n = static_cast<long>(returns.size());
    if (n <= max_lag + 1) domain_error("lagged_abs_correlation", "series must be longer than max_lag + 1");

    std::vector<LagCorrelation> out;
    for (int j = -max_lag; j <= max_lag; ++j) {
        const long lo = std::max(0L, static_cast<long>(j));
        const long hi = std::min(n, n + j);
        double count = 0.0, ma = 0.0, mb = 0.0, caa = 0.0, cbb = 0.0, cab = 0.0;
        for (long i = lo; i < hi; ++i) {
            const double a = std::abs(returns[static_cast<std::size_t>(i)]);
            const double b = returns[static_cast<std::size_t>(i - j)];
            count += 1.0;
            const double da = a - ma;
            const double db = b - mb;
            ma += da / count;
            mb += db / count;
            caa += da * (a - ma);
            cbb += db * (b - mb);
            cab += da * (b - mb);
        }
        LagCorrelation lc{j, std::nullopt};
        if (caa > 0.0 && cbb > 0.0) lc.correlation = std::clamp(cab / std::sqrt(caa * cbb), -1.0, 1.0);
        out.push_back(lc);
    }
    return out;
}

PredictiveSummary predictive_summaries(const MultilevelRun& run, const ObservationSeries& obs, int horizon,
                                       std::size_t draws, int max_lag, std::uint64_t seed) {
    if (run.chains.empty()) {
        throw Error(ErrorKind::InsufficientData, "experiments", "predictive_summaries", "no chains in the run");
    }
    if (draws < 1) domain_error("predictive_summaries", "need at least one draw per level");
    const Level sim_level{run.estimate.allocation.max_level};
    const double burn_in = run.estimate.burn_in;
    const std::size_t width = 4 + static_cast<std::size_t>(2 * max_lag + 1);
    std::vector<double> total(width, 0.0);

    for (std::size_t i = 0; i < run.chains.size(); ++i) {
        const Chain& chain = run.chains[i];
        const std::size_t skip = burn_in_count(chain.records.size(), burn_in);
        const std::size_t kept = chain.records.size() - skip;
        if (kept == 0) {
            throw Error(ErrorKind::InsufficientData, "experiments", "predictive_summaries", "chain empty after burn-in");
        }
        const std::uint64_t component_seed = derive_seed(seed, i);
        std::vector<std::vector<double>> stats(width, std::vector<double>(draws));
        std::vector<double> log_h1(draws, 0.0);
        std::vector<double> log_h2(draws, 0.0);
        for (std::size_t d = 0; d < draws; ++d) {
            Stream rng = Stream::derived(component_seed, d);
            const std::size_t pick =
                skip + std::min(kept - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(kept)));
            const ChainRecord& rec = chain.records[pick];
            const auto ds = generate_synthetic(rec.theta, horizon, sim_level, rng, obs.y0);
            const auto s = summary_vector(differences(ds.y), max_lag);
            for (std::size_t c = 0; c < width; ++c) stats[c][d] = s[c];
            if (chain.coupled) {
                const HWeights h = h_log_weights(rec.theta, *rec.fine, *rec.coarse, obs);
                log_h1[d] = h.log_h1;
                log_h2[d] = h.log_h2;
            }
        }
        for (std::size_t c = 0; c < width; ++c) {
            if (chain.coupled) {
                total[c] += self_normalized_difference(stats[c], log_h1, stats[c], log_h2);
            } else {
                double sum = 0.0;
                for (double x : stats[c]) sum += x;
                total[c] += sum / static_cast<double>(draws);
            }
        }
    }

    PredictiveSummary out;
    out.draws_per_level = draws;
    out.stats.n = static_cast<std::size_t>(horizon);
    out.stats.mean = total[0];
    out.stats.variance = total[1];
    if (std::isfinite(total[2])) out.stats.skewness = total[2];
    if (std::isfinite(total[3])) out.stats.kurtosis = total[3];
    for (int j = -max_lag; j <= max_lag; ++j) {
        const double c = total[4 + static_cast<std::size_t>(j + max_lag)];
        out.curve.push_back(LagCorrelation{j, std::isfinite(c) ? std::optional<double>(c) : std::nullopt});
    }
    return out;
}

}  // namespace mlpmcmc
