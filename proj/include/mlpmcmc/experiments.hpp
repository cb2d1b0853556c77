#pragma once

// Synthetic data, the cost-versus-MSE rate study, and return-series
// statistics for real-data and posterior-predictive comparisons.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlpmcmc/multilevel.hpp"

namespace mlpmcmc {

struct SyntheticDataset {
    ModelParams true_theta;
    Level data_level;
    ObservationSeries y;
    IncrementPath increments;
    VolatilityPath latent_truth;
};

/// Simulates V on the data level and then y_t at unit times:
/// SSM y_t ~ N(V_t, sigma_obs^2) (sigma_obs = 0 gives y_t = V_t);
/// SV  y_t = y_{t-1} + r + rho sum sqrt|v| w + sqrt((1-rho^2) step sum|v|) xi.
/// Increments are drawn first, then one normal per observation.
SyntheticDataset generate_synthetic(const ModelParams& true_theta, int horizon, Level data_level, Stream& rng,
                                    double y0 = 0.0);

enum class Method { Single, Multilevel };

std::string_view to_string(Method m);

/// Least-squares slope of log(cost) on log(mse).
double fit_loglog_slope(std::span<const double> mse, std::span<const double> cost);

struct RateStudyConfig {
    std::vector<double> epsilons{0.4, 0.2, 0.1};
    std::size_t replicates = 20;
    double H = 0.4;
    /// Allocation constants; the single-level chain length at epsilon is
    /// max(M_min, ceil(c_M eps^-2)) at the same finest level L(eps).
    AllocationConstants constants;
    EstimatorOptions options;
};

struct RateRun {
    double epsilon = 0.0;
    int max_level = 0;
    std::size_t replicate = 0;
    double cost = 0.0;
    std::vector<double> estimate;
    std::vector<double> squared_error;
};

struct RateGridPoint {
    double epsilon = 0.0;
    int max_level = 0;
    double cost = 0.0;
    std::vector<double> mse;
};

struct RateStudyResult {
    Method method = Method::Single;
    std::vector<std::string> names;
    std::vector<RateRun> runs;
    std::vector<RateGridPoint> grid;
    /// Fitted slope of log cost against log MSE, per functional.
    std::vector<double> slope;
};

/// Runs `replicates` independent estimates per epsilon and fits slopes
/// against squared errors from `reference`. Needs at least three grid
/// points.
RateStudyResult rate_study(const ObservationSeries& obs, Method method, const RateStudyConfig& config,
                           std::span<const Functional> phis, std::span<const double> reference, std::uint64_t seed);

/// Chain length of the single-level estimator used by the rate study.
std::size_t single_level_iterations(double epsilon, const AllocationConstants& constants);

struct ReturnStats {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;               // unbiased
    std::optional<double> skewness;      // m3 / m2^1.5, undefined for zero variance
    std::optional<double> kurtosis;      // m4 / m2^2 (not excess)
};

std::vector<double> log_returns(std::span<const double> prices);

/// Moments of a return series (at least two values).
ReturnStats return_stats(std::span<const double> returns);
ReturnStats return_stats_from_prices(std::span<const double> prices);

struct LagCorrelation {
    int lag = 0;
    std::optional<double> correlation;
};

/// Pearson correlation of |R_i| with R_{i-j} over the overlapping window,
/// for j = -max_lag..max_lag. Negative j pairs |R| with later returns.
std::vector<LagCorrelation> lagged_abs_correlation(std::span<const double> returns, int max_lag);

struct PredictiveSummary {
    ReturnStats stats;
    std::vector<LagCorrelation> curve;
    std::size_t draws_per_level = 0;
};

/// Multilevel posterior-predictive averages of return statistics.
///
/// For component i of the run (base chain, then each coupled chain) draw d
/// uses Stream::derived(derive_seed(seed, i), d): one uniform picks a
/// post-burn-in record, then generate_synthetic(theta, horizon, simulation
/// level, stream, y0) produces the path whose returns are summarized.
/// Coupled components enter as H1/H2 self-normalized differences, so the
/// result telescopes exactly like the parameter estimator.
PredictiveSummary predictive_summaries(const MultilevelRun& run, const ObservationSeries& obs, int horizon,
                                       std::size_t draws, int max_lag, std::uint64_t seed);

}  // namespace mlpmcmc
