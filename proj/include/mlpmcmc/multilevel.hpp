#pragma once

// Importance weights between coupled levels, the self-normalized level
// increment estimator, level/sample allocation and the telescoping
// multilevel estimator built from one pmcmc chain plus one coupled chain
// per level.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlpmcmc/functional.hpp"
#include "mlpmcmc/mcmc.hpp"

namespace mlpmcmc {

/// log H1 = sum_t [log k_fine(t) - max(log k_fine(t), log k_coarse(t))],
/// log H2 likewise with the coarse densities.
struct HWeights {
    double log_h1 = 0.0;
    double log_h2 = 0.0;
};

HWeights h_weights_from_densities(std::span<const double> log_fine, std::span<const double> log_coarse);

/// H weights of a coupled pair; coarse must be coarsen(fine).
HWeights h_log_weights(const ModelParams& theta, const IncrementPath& fine, const IncrementPath& coarse,
                       const ObservationSeries& obs);

/// (H1, H2) on the natural scale. Throws a degenerate-weights error if
/// either underflows to zero.
std::pair<double, double> h_weights(const ModelParams& theta, const IncrementPath& fine, const IncrementPath& coarse,
                                    const ObservationSeries& obs);

/// sum phi_fine H1 / sum H1 - sum phi_coarse H2 / sum H2, weights given as logs.
double self_normalized_difference(std::span<const double> phi_fine, std::span<const double> log_h1,
                                  std::span<const double> phi_coarse, std::span<const double> log_h2);

/// Number of leading records dropped for a burn-in fraction in [0, 1].
std::size_t burn_in_count(std::size_t records, double fraction);

/// Increment estimate for each functional from a coupled chain.
std::vector<double> increment_estimator(const Chain& chain, std::span<const Functional> phis,
                                        const ObservationSeries& obs, double burn_in);

/// Ergodic average of each functional over a single-level chain.
std::vector<double> ergodic_average(const Chain& chain, std::span<const Functional> phis, double burn_in);

struct LevelAllocation {
    double epsilon = 0.1;
    double H = 0.4;
    int base_level = 0;
    int max_level = 1;
    /// Chain lengths for levels base_level..max_level.
    std::vector<std::size_t> M;

    std::size_t levels() const { return M.size(); }
    std::size_t iterations_at(int l) const { return M[static_cast<std::size_t>(l - base_level)]; }
};

struct AllocationConstants {
    double c_M = 1.0;
    double c_L = 1.0;
    std::size_t M_min = 50;
};

/// L = max(1, ceil(c_L 2 log2(1/eps) / (2H + 1)));
/// M_l = max(M_min, ceil(c_M eps^-2 step_l^((2H+3)/2) step_L^(H-1/2))).
LevelAllocation choose_levels(double epsilon, double H, const AllocationConstants& constants = {});

/// Same chain-length rule over an explicit level range base_level..max_level.
LevelAllocation allocate_levels(double epsilon, double H, int base_level, int max_level,
                                const AllocationConstants& constants = {});

/// Checks sizes and base_level < max_level.
void validate(const LevelAllocation& alloc);

/// Cost units for one chain of M iterations at level l: step_l^-2 M.
double level_cost(int level, std::size_t iterations);

struct EstimatorOptions {
    ChainOptions chain;  // particles, proposal and the fixed model fields; iterations is ignored
    double burn_in = 0.1;
    int threads = 1;
};

struct MLEstimate {
    std::vector<std::string> names;
    std::vector<double> value;
    /// components[i][f]: base-level term (i = 0) or increment at level
    /// base_level + i, for functional f.
    std::vector<std::vector<double>> components;
    std::vector<double> costs;
    LevelAllocation allocation;
    std::vector<std::uint64_t> seeds;
    double burn_in = 0.1;

    double total_cost() const;
};

struct MultilevelRun {
    MLEstimate estimate;
    /// chains[0] is the base pmcmc chain, chains[i] the coupled chain at
    /// level base_level + i.
    std::vector<Chain> chains;
};

/// Seed of the chain at level l of a multilevel run rooted at `seed`.
std::uint64_t level_seed(std::uint64_t seed, int level);

MultilevelRun ml_estimate(const ObservationSeries& obs, const LevelAllocation& alloc, const EstimatorOptions& options,
                          std::span<const Functional> phis, std::uint64_t seed);

/// Assembles an estimate from already-run chains (used by ml_estimate).
MLEstimate combine_levels(std::span<const Chain> chains, const LevelAllocation& alloc,
                          std::span<const Functional> phis, const ObservationSeries& obs, double burn_in);

struct SingleLevelEstimate {
    std::vector<std::string> names;
    std::vector<double> value;
    double cost = 0.0;
    Chain chain;
};

SingleLevelEstimate single_level_estimate(const ObservationSeries& obs, Level level, std::size_t iterations,
                                          const EstimatorOptions& options, std::span<const Functional> phis,
                                          std::uint64_t seed);

}  // namespace mlpmcmc
