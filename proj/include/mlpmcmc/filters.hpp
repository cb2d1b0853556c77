#pragma once

// Bootstrap particle filter on Brownian-increment histories and the delta
// particle filter on synchronously coupled fine/coarse histories.
//
// Random streams: a filter run with seed s gives particle slot i the stream
// Stream::derived(s, i), used only for that slot's fresh increments (drawn
// block by block in time order), and uses Stream::derived(s, kResampleStream)
// for every resampling and the grand selection. With N = 1 the returned
// trajectory is therefore sample_increments(level, T, Stream::derived(s, 0)).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlpmcmc/models.hpp"
#include "mlpmcmc/random.hpp"
#include "mlpmcmc/sve.hpp"

namespace mlpmcmc {

inline constexpr std::uint64_t kResampleStream = ~std::uint64_t{0};

struct FilterOutput {
    IncrementPath trajectory;
    double log_z = 0.0;

    double z_hat() const;
};

struct CoupledOutput {
    IncrementPath fine;
    IncrementPath coarse;
    double log_z = 0.0;

    double z_hat() const;
};

struct NormalizedWeights {
    std::vector<double> probs;  // sums to 1
    double log_mean = 0.0;      // log of the mean unnormalized weight
};

/// Normalizes log weights. Non-finite entries count as zero weight; if every
/// weight is zero, throws FilterCollapse carrying t.
NormalizedWeights normalize_log_weights(std::span<const double> log_weights, int t, const char* op);

/// N independent categorical draws from `probs`; returns source indices.
std::vector<std::size_t> multinomial_resample(std::span<const double> probs, std::size_t count, Stream& rng);

template <class T>
std::vector<T> multinomial_resample(std::span<const double> probs, std::span<const T> items, std::size_t count,
                                    Stream& rng) {
    std::vector<T> out;
    out.reserve(count);
    for (std::size_t idx : multinomial_resample(probs, count, rng)) out.push_back(items[idx]);
    return out;
}

FilterOutput particle_filter(const ObservationSeries& obs, Level level, std::size_t particles,
                             const ModelParams& theta, std::uint64_t seed);

/// Requires level.l >= 1. The coarse trajectory is coarsen(fine).
CoupledOutput delta_particle_filter(const ObservationSeries& obs, Level level, std::size_t particles,
                                    const ModelParams& theta, std::uint64_t seed);

}  // namespace mlpmcmc
