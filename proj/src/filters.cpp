#include "mlpmcmc/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlpmcmc/error.hpp"

namespace mlpmcmc {

namespace {

/// Histories of N particles at one level: increments, Euler forcing terms
/// and volatility values, one row per particle.
class Lane {
public:
    Lane(const ModelParams& theta, Level level, int horizon, std::size_t particles)
        : theta_(theta),
          level_(level),
          per_(static_cast<std::size_t>(level.steps_per_unit())),
          n_(grid_size(level, horizon)),
          particles_(particles),
          kernel_(theta.kernel, level, n_),
          w_(particles * n_),
          f_(particles * n_),
          v_(particles * (n_ + 1)),
          w_tmp_(w_.size()),
          f_tmp_(f_.size()),
          v_tmp_(v_.size()) {
        for (std::size_t i = 0; i < particles_; ++i) v_[i * (n_ + 1)] = theta.vol.V0;
    }

    std::span<double> w_row(std::size_t i) { return {w_.data() + i * n_, n_}; }
    std::span<const double> w_row(std::size_t i) const { return {w_.data() + i * n_, n_}; }
    std::span<double> v_row(std::size_t i) { return {v_.data() + i * (n_ + 1), n_ + 1}; }

    void draw_block(std::size_t i, int t, Stream& rng) {
        const double sd = std::sqrt(level_.step());
        auto row = w_row(i);
        for (std::size_t k = block_begin(t); k < block_end(t); ++k) row[k] = sd * rng.normal();
    }

    void coarsen_block_from(std::size_t i, int t, const Lane& fine) {
        auto row = w_row(i);
        auto src = fine.w_row(i);
        for (std::size_t k = block_begin(t); k < block_end(t); ++k) row[k] = src[2 * k] + src[2 * k + 1];
    }

    void advance(std::size_t i, int t) {
        euler_extend(theta_.vol, kernel_, w_row(i), {f_.data() + i * n_, n_}, v_row(i), block_begin(t),
                     block_end(t));
    }

    double log_density(std::size_t i, int t, const ObservationSeries& obs) {
        auto v = v_row(i);
        if (theta_.model_kind == ModelKind::StateSpace) {
            const double vt = v[block_end(t)];
            if (!std::isfinite(vt)) return std::numeric_limits<double>::quiet_NaN();
            return log_g_ssm(theta_, vt, obs.at(t));
        }
        return log_kappa_sv(theta_, level_, v.subspan(block_begin(t), per_), w_row(i).subspan(block_begin(t), per_),
                            obs.prev(t), obs.at(t));
    }

    /// Replaces every history by the one at indices[i], keeping blocks 1..t.
    void resample(std::span<const std::size_t> indices, int t) {
        const std::size_t len = block_end(t);
        for (std::size_t i = 0; i < particles_; ++i) {
            const std::size_t src = indices[i];
            std::copy_n(w_.data() + src * n_, len, w_tmp_.data() + i * n_);
            std::copy_n(f_.data() + src * n_, len, f_tmp_.data() + i * n_);
            std::copy_n(v_.data() + src * (n_ + 1), len + 1, v_tmp_.data() + i * (n_ + 1));
        }
        w_.swap(w_tmp_);
        f_.swap(f_tmp_);
        v_.swap(v_tmp_);
    }

    IncrementPath path(std::size_t i, int horizon) const {
        auto row = w_row(i);
        return IncrementPath{level_, horizon, std::vector<double>(row.begin(), row.end())};
    }

private:
    std::size_t block_begin(int t) const { return static_cast<std::size_t>(t - 1) * per_; }
    std::size_t block_end(int t) const { return static_cast<std::size_t>(t) * per_; }

    const ModelParams& theta_;
    Level level_;
    std::size_t per_;
    std::size_t n_;
    std::size_t particles_;
    KernelTable kernel_;
    std::vector<double> w_, f_, v_;
    std::vector<double> w_tmp_, f_tmp_, v_tmp_;
};

std::vector<Stream> particle_streams(std::uint64_t seed, std::size_t particles) {
    std::vector<Stream> streams;
    streams.reserve(particles);
    for (std::size_t i = 0; i < particles; ++i) streams.push_back(Stream::derived(seed, i));
    return streams;
}

void check_inputs(const ObservationSeries& obs, std::size_t particles, const ModelParams& theta, const char* op) {
    if (particles < 1) throw Error(ErrorKind::Domain, "filters", op, "particle count must be >= 1");
    validate(obs);
    validate(theta);
}

}  // namespace

double FilterOutput::z_hat() const { return std::exp(log_z); }
double CoupledOutput::z_hat() const { return std::exp(log_z); }

NormalizedWeights normalize_log_weights(std::span<const double> log_weights, int t, const char* op) {
    double max_lw = -std::numeric_limits<double>::infinity();
    for (double lw : log_weights) {
        if (std::isfinite(lw)) max_lw = std::max(max_lw, lw);
    }
    if (!std::isfinite(max_lw)) throw FilterCollapse(op, t);
    NormalizedWeights out;
    out.probs.resize(log_weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        const double lw = log_weights[i];
        out.probs[i] = std::isfinite(lw) ? std::exp(lw - max_lw) : 0.0;
        total += out.probs[i];
    }
    for (double& p : out.probs) p /= total;
    out.log_mean = max_lw + std::log(total) - std::log(static_cast<double>(log_weights.size()));
    return out;
}

std::vector<std::size_t> multinomial_resample(std::span<const double> probs, std::size_t count, Stream& rng) {
    std::vector<double> cumulative(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!(probs[i] >= 0.0)) {
            throw Error(ErrorKind::Domain, "filters", "multinomial_resample", "weights must be non-negative");
        }
        acc += probs[i];
        cumulative[i] = acc;
    }
    if (!(acc > 0.0)) {
        throw Error(ErrorKind::DegenerateWeights, "filters", "multinomial_resample", "all weights are zero");
    }
    std::vector<std::size_t> out(count);
    for (auto& idx : out) {
        const double u = rng.uniform() * acc;
        idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                       cumulative.begin());
        // u can round up to acc; fall back to the last slot with mass.
        if (idx == probs.size()) {
            idx = probs.size() - 1;
            while (probs[idx] == 0.0) --idx;
        }
    }
    return out;
}

FilterOutput particle_filter(const ObservationSeries& obs, Level level, std::size_t particles,
                             const ModelParams& theta, std::uint64_t seed) {
    constexpr const char* op = "particle_filter";
    check_inputs(obs, particles, theta, op);
    const int horizon = obs.horizon();
    auto streams = particle_streams(seed, particles);
    Stream resampler = Stream::derived(seed, kResampleStream);
    Lane lane(theta, level, horizon, particles);
    std::vector<double> log_w(particles);

    for (std::size_t i = 0; i < particles; ++i) {
        lane.draw_block(i, 1, streams[i]);
        lane.advance(i, 1);
    }
    double log_z = 0.0;
    for (int t = 1;; ++t) {
        for (std::size_t i = 0; i < particles; ++i) log_w[i] = lane.log_density(i, t, obs);
        const auto weights = normalize_log_weights(log_w, t, op);
        log_z += weights.log_mean;
        if (t == horizon) {
            const std::size_t pick = multinomial_resample(weights.probs, 1, resampler).front();
            return FilterOutput{lane.path(pick, horizon), log_z};
        }
        lane.resample(multinomial_resample(weights.probs, particles, resampler), t);
        for (std::size_t i = 0; i < particles; ++i) {
            lane.draw_block(i, t + 1, streams[i]);
            lane.advance(i, t + 1);
        }
    }
}

CoupledOutput delta_particle_filter(const ObservationSeries& obs, Level level, std::size_t particles,
                                    const ModelParams& theta, std::uint64_t seed) {
    constexpr const char* op = "delta_particle_filter";
    if (level.l < 1) throw Error(ErrorKind::LevelUnderflow, "filters", op, "delta particle filter needs level >= 1");
    check_inputs(obs, particles, theta, op);
    const int horizon = obs.horizon();
    auto streams = particle_streams(seed, particles);
    Stream resampler = Stream::derived(seed, kResampleStream);
    Lane fine(theta, level, horizon, particles);
    Lane coarse(theta, Level{level.l - 1}, horizon, particles);
    std::vector<double> log_w(particles);

    auto extend = [&](std::size_t i, int t) {
        fine.draw_block(i, t, streams[i]);
        coarse.coarsen_block_from(i, t, fine);
        fine.advance(i, t);
        coarse.advance(i, t);
    };
    auto log_max = [](double a, double b) {
        if (std::isnan(a)) return b;
        if (std::isnan(b)) return a;
        return std::max(a, b);
    };

    for (std::size_t i = 0; i < particles; ++i) extend(i, 1);
    double log_z = 0.0;
    for (int t = 1;; ++t) {
        for (std::size_t i = 0; i < particles; ++i) {
            log_w[i] = log_max(fine.log_density(i, t, obs), coarse.log_density(i, t, obs));
        }
        const auto weights = normalize_log_weights(log_w, t, op);
        log_z += weights.log_mean;
        if (t == horizon) {
            const std::size_t pick = multinomial_resample(weights.probs, 1, resampler).front();
            return CoupledOutput{fine.path(pick, horizon), coarse.path(pick, horizon), log_z};
        }
        const auto indices = multinomial_resample(weights.probs, particles, resampler);
        fine.resample(indices, t);
        coarse.resample(indices, t);
        for (std::size_t i = 0; i < particles; ++i) extend(i, t + 1);
    }
}

}  // namespace mlpmcmc
