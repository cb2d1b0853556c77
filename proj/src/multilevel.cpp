#include "mlpmcmc/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "mlpmcmc/error.hpp"
#include "mlpmcmc/parallel.hpp"

namespace mlpmcmc {

namespace {

[[noreturn]] void degenerate(const char* op, const std::string& detail) {
    throw Error(ErrorKind::DegenerateWeights, "multilevel", op, detail);
}

/// Per-record quantities shared by consecutive copies of the same state.
struct RecordEval {
    std::vector<double> phi_fine;
    std::vector<double> phi_coarse;
    HWeights h;
};

std::vector<double> eval_all(std::span<const Functional> phis, const ModelParams& theta,
                             std::span<const double> skeleton) {
    std::vector<double> out(phis.size());
    for (std::size_t f = 0; f < phis.size(); ++f) out[f] = phis[f](theta, skeleton);
    return out;
}

bool any_needs_path(std::span<const Functional> phis) {
    return std::any_of(phis.begin(), phis.end(), [](const Functional& f) { return f.needs_path; });
}

}  // namespace

HWeights h_weights_from_densities(std::span<const double> log_fine, std::span<const double> log_coarse) {
    if (log_fine.size() != log_coarse.size()) degenerate("h_weights", "density sequences differ in length");
    HWeights h;
    for (std::size_t t = 0; t < log_fine.size(); ++t) {
        const double a = log_fine[t];
        const double b = log_coarse[t];
        if (!std::isfinite(a) || !std::isfinite(b)) {
            degenerate("h_weights", "observation density is zero or non-finite at t=" + std::to_string(t + 1));
        }
        const double m = std::max(a, b);
        h.log_h1 += a - m;
        h.log_h2 += b - m;
    }
    return h;
}

HWeights h_log_weights(const ModelParams& theta, const IncrementPath& fine, const IncrementPath& coarse,
                       const ObservationSeries& obs) {
    if (fine.level.l < 1 || coarse.level.l != fine.level.l - 1 || coarse.horizon != fine.horizon ||
        coarse.size() * 2 != fine.size()) {
        throw Error(ErrorKind::Domain, "multilevel", "h_weights", "paths are not a fine/coarse pair");
    }
    const auto v_fine = euler_volatility_path(theta.vol, theta.kernel, fine);
    const auto v_coarse = euler_volatility_path(theta.vol, theta.kernel, coarse);
    return h_weights_from_densities(observation_log_densities(theta, fine, v_fine, obs),
                                    observation_log_densities(theta, coarse, v_coarse, obs));
}

std::pair<double, double> h_weights(const ModelParams& theta, const IncrementPath& fine, const IncrementPath& coarse,
                                    const ObservationSeries& obs) {
    const HWeights h = h_log_weights(theta, fine, coarse, obs);
    const double h1 = std::exp(h.log_h1);
    const double h2 = std::exp(h.log_h2);
    if (h1 == 0.0 || h2 == 0.0) degenerate("h_weights", "H weight underflows the double range");
    return {h1, h2};
}

double self_normalized_difference(std::span<const double> phi_fine, std::span<const double> log_h1,
                                  std::span<const double> phi_coarse, std::span<const double> log_h2) {
    auto ratio = [](std::span<const double> phi, std::span<const double> log_w) {
        if (phi.empty() || phi.size() != log_w.size()) {
            throw Error(ErrorKind::InsufficientData, "multilevel", "increment_estimator",
                        "need matching, non-empty values and weights");
        }
        double m = -std::numeric_limits<double>::infinity();
        for (double lw : log_w) m = std::max(m, lw);
        if (!std::isfinite(m)) degenerate("increment_estimator", "sum of H weights is zero");
        // Centred at phi[0] so that a constant functional comes back exactly.
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < phi.size(); ++k) {
            const double w = std::exp(log_w[k] - m);
            num += (phi[k] - phi[0]) * w;
            den += w;
        }
        return phi[0] + num / den;
    };
    return ratio(phi_fine, log_h1) - ratio(phi_coarse, log_h2);
}

std::size_t burn_in_count(std::size_t records, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw Error(ErrorKind::Domain, "multilevel", "burn_in", "burn-in fraction must lie in [0, 1]");
    }
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(records)));
}

std::vector<double> increment_estimator(const Chain& chain, std::span<const Functional> phis,
                                        const ObservationSeries& obs, double burn_in) {
    if (!chain.coupled) {
        throw Error(ErrorKind::Domain, "multilevel", "increment_estimator", "chain is not a coupled chain");
    }
    const std::size_t skip = burn_in_count(chain.records.size(), burn_in);
    const std::size_t kept = chain.records.size() - skip;
    if (kept == 0) {
        throw Error(ErrorKind::InsufficientData, "multilevel", "increment_estimator", "no records after burn-in");
    }
    const bool paths = any_needs_path(phis);
    std::unordered_map<const IncrementPath*, RecordEval> cache;

    std::vector<std::vector<double>> phi_fine(phis.size(), std::vector<double>(kept));
    std::vector<std::vector<double>> phi_coarse(phis.size(), std::vector<double>(kept));
    std::vector<double> log_h1(kept);
    std::vector<double> log_h2(kept);

    for (std::size_t k = 0; k < kept; ++k) {
        const ChainRecord& rec = chain.records[skip + k];
        auto it = cache.find(rec.fine.get());
        if (it == cache.end()) {
            const auto v_fine = euler_volatility_path(rec.theta.vol, rec.theta.kernel, *rec.fine);
            const auto v_coarse = euler_volatility_path(rec.theta.vol, rec.theta.kernel, *rec.coarse);
            RecordEval ev;
            ev.h = h_weights_from_densities(observation_log_densities(rec.theta, *rec.fine, v_fine, obs),
                                            observation_log_densities(rec.theta, *rec.coarse, v_coarse, obs));
            const auto s_fine = paths ? v_fine.skeleton() : std::vector<double>{};
            const auto s_coarse = paths ? v_coarse.skeleton() : std::vector<double>{};
            ev.phi_fine = eval_all(phis, rec.theta, s_fine);
            ev.phi_coarse = eval_all(phis, rec.theta, s_coarse);
            it = cache.emplace(rec.fine.get(), std::move(ev)).first;
        }
        const RecordEval& ev = it->second;
        log_h1[k] = ev.h.log_h1;
        log_h2[k] = ev.h.log_h2;
        for (std::size_t f = 0; f < phis.size(); ++f) {
            phi_fine[f][k] = ev.phi_fine[f];
            phi_coarse[f][k] = ev.phi_coarse[f];
        }
    }

    std::vector<double> out(phis.size());
    for (std::size_t f = 0; f < phis.size(); ++f) {
        out[f] = self_normalized_difference(phi_fine[f], log_h1, phi_coarse[f], log_h2);
    }
    return out;
}

std::vector<double> ergodic_average(const Chain& chain, std::span<const Functional> phis, double burn_in) {
    const std::size_t skip = burn_in_count(chain.records.size(), burn_in);
    const std::size_t kept = chain.records.size() - skip;
    if (kept == 0) {
        throw Error(ErrorKind::InsufficientData, "multilevel", "ergodic_average", "no records after burn-in");
    }
    const bool paths = any_needs_path(phis);
    std::unordered_map<const IncrementPath*, std::vector<double>> cache;
    std::vector<double> sum(phis.size(), 0.0);
    for (std::size_t k = skip; k < chain.records.size(); ++k) {
        const ChainRecord& rec = chain.records[k];
        auto it = cache.find(rec.fine.get());
        if (it == cache.end()) {
            std::vector<double> skeleton;
            if (paths) skeleton = euler_volatility_path(rec.theta.vol, rec.theta.kernel, *rec.fine).skeleton();
            it = cache.emplace(rec.fine.get(), eval_all(phis, rec.theta, skeleton)).first;
        }
        for (std::size_t f = 0; f < phis.size(); ++f) sum[f] += it->second[f];
    }
    for (double& s : sum) s /= static_cast<double>(kept);
    return sum;
}

namespace {

void check_allocation_inputs(double epsilon, double H, const AllocationConstants& constants, const char* op) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw Error(ErrorKind::Domain, "multilevel", op, "epsilon must lie in (0, 1)");
    }
    if (!(H >= 0.0 && H < 0.5)) throw Error(ErrorKind::Domain, "multilevel", op, "H must lie in [0, 0.5)");
    if (!(constants.c_M > 0.0 && constants.c_L > 0.0)) {
        throw Error(ErrorKind::Domain, "multilevel", op, "c_M and c_L must be positive");
    }
}

LevelAllocation fill_allocation(double epsilon, double H, int base_level, int max_level,
                                const AllocationConstants& constants) {
    LevelAllocation alloc;
    alloc.epsilon = epsilon;
    alloc.H = H;
    alloc.base_level = base_level;
    alloc.max_level = max_level;
    const double top = std::pow(2.0, -max_level * (H - 0.5));
    for (int l = base_level; l <= max_level; ++l) {
        const double raw = constants.c_M * std::pow(epsilon, -2.0) * std::pow(2.0, -l * (2.0 * H + 3.0) / 2.0) * top;
        alloc.M.push_back(std::max(constants.M_min, static_cast<std::size_t>(std::ceil(raw))));
    }
    return alloc;
}

}  // namespace

LevelAllocation choose_levels(double epsilon, double H, const AllocationConstants& constants) {
    check_allocation_inputs(epsilon, H, constants, "choose_levels");
    const int L =
        std::max(1, static_cast<int>(std::ceil(constants.c_L * 2.0 * std::log2(1.0 / epsilon) / (2.0 * H + 1.0))));
    return fill_allocation(epsilon, H, 0, L, constants);
}

LevelAllocation allocate_levels(double epsilon, double H, int base_level, int max_level,
                                const AllocationConstants& constants) {
    check_allocation_inputs(epsilon, H, constants, "allocate_levels");
    if (base_level < 0 || max_level <= base_level) {
        throw Error(ErrorKind::Domain, "multilevel", "allocate_levels", "need 0 <= base_level < max_level");
    }
    return fill_allocation(epsilon, H, base_level, max_level, constants);
}

void validate(const LevelAllocation& alloc) {
    if (alloc.base_level < 0 || alloc.max_level <= alloc.base_level) {
        throw Error(ErrorKind::Domain, "multilevel", "validate", "allocation needs 0 <= base_level < max_level");
    }
    if (alloc.M.size() != static_cast<std::size_t>(alloc.max_level - alloc.base_level + 1)) {
        throw Error(ErrorKind::Domain, "multilevel", "validate", "allocation needs one chain length per level");
    }
    for (std::size_t m : alloc.M) {
        if (m < 1) throw Error(ErrorKind::Domain, "multilevel", "validate", "chain lengths must be >= 1");
    }
}

double level_cost(int level, std::size_t iterations) {
    return std::ldexp(1.0, 2 * level) * static_cast<double>(iterations);
}

double MLEstimate::total_cost() const {
    double total = 0.0;
    for (double c : costs) total += c;
    return total;
}

std::uint64_t level_seed(std::uint64_t seed, int level) {
    return derive_seed(seed, static_cast<std::uint64_t>(level));
}

MLEstimate combine_levels(std::span<const Chain> chains, const LevelAllocation& alloc,
                          std::span<const Functional> phis, const ObservationSeries& obs, double burn_in) {
    MLEstimate est;
    est.allocation = alloc;
    est.burn_in = burn_in;
    for (const auto& phi : phis) est.names.push_back(phi.name);
    est.value.assign(phis.size(), 0.0);
    for (std::size_t i = 0; i < chains.size(); ++i) {
        const int l = alloc.base_level + static_cast<int>(i);
        est.components.push_back(i == 0 ? ergodic_average(chains[i], phis, burn_in)
                                        : increment_estimator(chains[i], phis, obs, burn_in));
        est.costs.push_back(level_cost(l, alloc.M[i]));
        est.seeds.push_back(chains[i].seed);
    }
    for (const auto& comp : est.components) {
        for (std::size_t f = 0; f < phis.size(); ++f) est.value[f] += comp[f];
    }
    return est;
}

MultilevelRun ml_estimate(const ObservationSeries& obs, const LevelAllocation& alloc, const EstimatorOptions& options,
                          std::span<const Functional> phis, std::uint64_t seed) {
    validate(alloc);
    MultilevelRun run;
    run.chains.resize(alloc.levels());
    parallel_for(alloc.levels(), options.threads, [&](std::size_t i) {
        const int l = alloc.base_level + static_cast<int>(i);
        ChainOptions chain_opts = options.chain;
        chain_opts.iterations = alloc.M[i];
        try {
            run.chains[i] = i == 0 ? pmcmc_chain(obs, Level{l}, chain_opts, level_seed(seed, l))
                                   : coupled_chain(obs, Level{l}, chain_opts, level_seed(seed, l));
        } catch (const Error& e) {
            throw Error(e.kind(), "multilevel", "ml_estimate", "level " + std::to_string(l) + " failed: " + e.what());
        }
    });
    run.estimate = combine_levels(run.chains, alloc, phis, obs, options.burn_in);
    return run;
}

SingleLevelEstimate single_level_estimate(const ObservationSeries& obs, Level level, std::size_t iterations,
                                          const EstimatorOptions& options, std::span<const Functional> phis,
                                          std::uint64_t seed) {
    ChainOptions chain_opts = options.chain;
    chain_opts.iterations = iterations;
    SingleLevelEstimate est;
    est.chain = pmcmc_chain(obs, level, chain_opts, seed);
    for (const auto& phi : phis) est.names.push_back(phi.name);
    est.value = ergodic_average(est.chain, phis, options.burn_in);
    est.cost = level_cost(level.l, iterations);
    return est;
}

}  // namespace mlpmcmc
