#include "mlpmcmc/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mlpmcmc/error.hpp"
#include "mlpmcmc/filters.hpp"

namespace mlpmcmc {

namespace {

struct FilterDraw {
    std::shared_ptr<const IncrementPath> fine;
    std::shared_ptr<const IncrementPath> coarse;
    double log_z = 0.0;
};

template <class Filter>
Chain run_chain(Level level, const ChainOptions& options, std::uint64_t seed,
                bool coupled, Filter&& filter, const char* op) {
    if (options.iterations < 1) throw Error(ErrorKind::Domain, "mcmc", op, "iteration count M must be >= 1");
    if (options.particles < 1) throw Error(ErrorKind::Domain, "mcmc", op, "particle count N must be >= 1");
    validate(options.proposal);
    const std::size_t dim = active_parameters(options.fixed).size();
    if (options.proposal.step_sizes.size() != dim) {
        throw Error(ErrorKind::Domain, "mcmc", op, "proposal has " + std::to_string(options.proposal.step_sizes.size()) +
                                                       " step sizes but the model has " + std::to_string(dim) +
                                                       " active parameters");
    }

    Stream rng(seed);
    Chain chain;
    chain.level = level;
    chain.coupled = coupled;
    chain.seed = seed;
    chain.records.reserve(options.iterations + 1);

    ChainRecord current;
    for (int attempt = 0;; ++attempt) {
        current.theta = options.start ? *options.start : prior_sample(options.fixed, rng);
        const std::uint64_t pf_seed = rng.next_seed();
        try {
            FilterDraw draw = filter(current.theta, pf_seed);
            current.z = transform(current.theta);
            current.fine = std::move(draw.fine);
            current.coarse = std::move(draw.coarse);
            current.log_z = draw.log_z;
            current.accepted = true;
            break;
        } catch (const FilterCollapse&) {
            if (options.start || attempt >= options.max_init_retries) throw;
            ++chain.initial_retries;
        }
    }
    chain.records.push_back(current);
    double log_prior = prior_logpdf(current.z);

    std::size_t accepted = 0;
    for (std::size_t k = 1; k <= options.iterations; ++k) {
        UnconstrainedParams z_new = rw_propose(current.z, options.proposal, rng);
        const std::uint64_t pf_seed = rng.next_seed();
        const double u = rng.uniform();

        const double log_prior_new = prior_logpdf(z_new);
        bool take = false;
        ChainRecord proposal;
        if (std::isfinite(log_prior_new)) {
            try {
                proposal.theta = untransform(z_new, options.fixed);
                FilterDraw draw = filter(proposal.theta, pf_seed);
                proposal.z = std::move(z_new);
                proposal.fine = std::move(draw.fine);
                proposal.coarse = std::move(draw.coarse);
                proposal.log_z = draw.log_z;
                proposal.accepted = true;
                take = u < acceptance_probability(proposal.log_z, log_prior_new, current.log_z, log_prior);
            } catch (const Error&) {
                chain.failed_proposals.push_back(k);
            }
        }
        if (take) {
            current = std::move(proposal);
            log_prior = log_prior_new;
            ++accepted;
        } else {
            current.accepted = false;
        }
        chain.records.push_back(current);
    }
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(options.iterations);
    return chain;
}

}  // namespace

void validate(const ProposalConfig& cfg) {
    if (cfg.step_sizes.empty()) throw Error(ErrorKind::Config, "mcmc", "validate", "proposal needs step sizes");
    for (double s : cfg.step_sizes) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw Error(ErrorKind::Config, "mcmc", "validate", "proposal step sizes must be positive and finite");
        }
    }
}

UnconstrainedParams rw_propose(const UnconstrainedParams& z, const ProposalConfig& cfg, Stream& rng) {
    if (z.size() != cfg.step_sizes.size()) {
        throw Error(ErrorKind::Domain, "mcmc", "rw_propose", "dimension mismatch");
    }
    UnconstrainedParams out = z;
    for (std::size_t i = 0; i < out.z.size(); ++i) out.z[i] += cfg.step_sizes[i] * rng.normal();
    return out;
}

double rw_log_density(const UnconstrainedParams& to, const UnconstrainedParams& from, const ProposalConfig& cfg) {
    double lp = 0.0;
    for (std::size_t i = 0; i < to.z.size(); ++i) {
        const double s = cfg.step_sizes[i];
        lp += gaussian_logpdf(to.z[i], from.z[i], s * s);
    }
    return lp;
}

double acceptance_probability(double log_z_proposed, double log_prior_proposed, double log_z_current,
                              double log_prior_current) {
    const double log_ratio = (log_z_proposed + log_prior_proposed) - (log_z_current + log_prior_current);
    if (std::isnan(log_ratio)) return 0.0;
    if (log_ratio >= 0.0) return 1.0;
    return std::exp(log_ratio);
}

double ChainRecord::z_hat() const { return std::exp(log_z); }

Chain pmcmc_chain(const ObservationSeries& obs, Level level, const ChainOptions& options, std::uint64_t seed) {
    return run_chain(level, options, seed, false,
                     [&](const ModelParams& theta, std::uint64_t pf_seed) {
                         FilterOutput out = particle_filter(obs, level, options.particles, theta, pf_seed);
                         return FilterDraw{std::make_shared<const IncrementPath>(std::move(out.trajectory)), nullptr,
                                           out.log_z};
                     },
                     "pmcmc_chain");
}

Chain coupled_chain(const ObservationSeries& obs, Level level, const ChainOptions& options, std::uint64_t seed) {
    if (level.l < 1) throw Error(ErrorKind::LevelUnderflow, "mcmc", "coupled_chain", "coupled chain needs level >= 1");
    return run_chain(level, options, seed, true,
                     [&](const ModelParams& theta, std::uint64_t pf_seed) {
                         CoupledOutput out = delta_particle_filter(obs, level, options.particles, theta, pf_seed);
                         return FilterDraw{std::make_shared<const IncrementPath>(std::move(out.fine)),
                                           std::make_shared<const IncrementPath>(std::move(out.coarse)), out.log_z};
                     },
                     "coupled_chain");
}

TuningResult tune_proposal(const ObservationSeries& obs, Level level, const ChainOptions& options,
                           const TuningOptions& tuning, std::uint64_t seed) {
    const std::size_t dim = active_parameters(options.fixed).size();
    std::vector<double> shape(dim, 1.0);
    double log_scale = std::log(tuning.initial_step);
    Stream rng(seed);

    ChainOptions pilot = options;
    pilot.iterations = tuning.batch_size;
    std::vector<std::vector<double>> samples(dim);
    TuningResult result;

    for (std::size_t b = 0; b < tuning.batches; ++b) {
        pilot.proposal.step_sizes.assign(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) pilot.proposal.step_sizes[i] = std::exp(log_scale) * shape[i];
        Chain batch = pmcmc_chain(obs, level, pilot, rng.next_seed());
        pilot.start = batch.records.back().theta;
        result.last_acceptance = batch.acceptance_rate;
        log_scale += tuning.gain * (batch.acceptance_rate - tuning.target) / std::sqrt(static_cast<double>(b) + 1.0);

        if (b >= tuning.batches / 4) {
            for (const auto& rec : batch.records) {
                for (std::size_t i = 0; i < dim; ++i) samples[i].push_back(rec.z.z[i]);
            }
        }
        if (b + 1 == tuning.batches / 2) {
            // Re-shape by the pilot spread, keeping the overall step size.
            double mean_sd = 0.0;
            std::vector<double> sd(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                const auto& xs = samples[i];
                double m = 0.0;
                for (double x : xs) m += x;
                m /= static_cast<double>(xs.size());
                double ss = 0.0;
                for (double x : xs) ss += (x - m) * (x - m);
                sd[i] = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
                mean_sd += sd[i];
            }
            mean_sd /= static_cast<double>(dim);
            if (mean_sd > 0.0) {
                for (std::size_t i = 0; i < dim; ++i) {
                    shape[i] = sd[i] > 0.0 ? std::clamp(sd[i] / mean_sd, 0.2, 5.0) : 1.0;
                }
            }
        }
    }
    result.proposal.step_sizes.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) result.proposal.step_sizes[i] = std::exp(log_scale) * shape[i];
    return result;
}

}  // namespace mlpmcmc
