#pragma once

// Particle marginal Metropolis-Hastings at one level and the coupled chain
// driven by the delta particle filter. Both propose with a Gaussian random
// walk on the unconstrained coordinates.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "mlpmcmc/models.hpp"
#include "mlpmcmc/random.hpp"
#include "mlpmcmc/sve.hpp"

namespace mlpmcmc {

/// Diagonal random-walk proposal: z' = z + step_sizes .* xi.
struct ProposalConfig {
    std::vector<double> step_sizes;
};

void validate(const ProposalConfig& cfg);

UnconstrainedParams rw_propose(const UnconstrainedParams& z, const ProposalConfig& cfg, Stream& rng);

/// log q(to | from).
double rw_log_density(const UnconstrainedParams& to, const UnconstrainedParams& from, const ProposalConfig& cfg);

/// min{1, exp(log numerator - log denominator)} with -inf/NaN proposals
/// mapped to 0.
double acceptance_probability(double log_z_proposed, double log_prior_proposed, double log_z_current,
                              double log_prior_current);

struct ChainRecord {
    ModelParams theta;
    UnconstrainedParams z;
    /// Selected trajectory; for coupled chains the fine member of the pair.
    std::shared_ptr<const IncrementPath> fine;
    /// Coarse member of the pair (coupled chains only).
    std::shared_ptr<const IncrementPath> coarse;
    double log_z = 0.0;
    bool accepted = false;

    double z_hat() const;
};

struct Chain {
    Level level;
    bool coupled = false;
    std::vector<ChainRecord> records;  // M + 1, including the initial state
    double acceptance_rate = 0.0;
    /// Iterations whose proposal made the filter fail; counted as rejections.
    std::vector<std::size_t> failed_proposals;
    /// Prior redraws needed before the initial filter run succeeded.
    int initial_retries = 0;
    std::uint64_t seed = 0;

    std::size_t iterations() const { return records.empty() ? 0 : records.size() - 1; }
};

struct ChainOptions {
    std::size_t particles = 100;
    std::size_t iterations = 1000;
    ProposalConfig proposal;
    /// Model kind, estimate_H flag and the values of every fixed field.
    ModelParams fixed = default_params(ModelKind::StateSpace);
    /// Overrides the prior draw for theta_0.
    std::optional<ModelParams> start;
    int max_init_retries = 100;
};

Chain pmcmc_chain(const ObservationSeries& obs, Level level, const ChainOptions& options, std::uint64_t seed);

/// Requires level.l >= 1.
Chain coupled_chain(const ObservationSeries& obs, Level level, const ChainOptions& options, std::uint64_t seed);

/// Pilot phase that scales a diagonal proposal towards a target acceptance
/// rate. Batches of pmcmc iterations are run back to back; after each batch
/// log(scale) moves by gain * (rate - target) / sqrt(batch + 1). Halfway
/// through, per-coordinate shape is taken from the pilot sample spread.
struct TuningOptions {
    std::size_t batches = 20;
    std::size_t batch_size = 50;
    double target = 0.23;
    double initial_step = 0.5;
    double gain = 3.0;
};

struct TuningResult {
    ProposalConfig proposal;
    double last_acceptance = 0.0;
};

TuningResult tune_proposal(const ObservationSeries& obs, Level level, const ChainOptions& options,
                           const TuningOptions& tuning, std::uint64_t seed);

}  // namespace mlpmcmc
