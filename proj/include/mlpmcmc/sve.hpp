#pragma once

// Time grids, the Volterra kernel, Brownian increments and the Euler-Maruyama
// recursion for V_t = V0 + int K(t-s){(kappa - lambda V_s) ds + nu sqrt(V_s) dW_s}.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlpmcmc/random.hpp"

namespace mlpmcmc {

/// Dyadic discretization level: step 2^-l.
struct Level {
    int l = 0;

    double step() const noexcept { return std::ldexp(1.0, -l); }
    std::int64_t steps_per_unit() const noexcept { return std::int64_t{1} << l; }

    friend bool operator==(Level, Level) = default;
};

/// Checks 0 <= l <= 30 and returns the level.
Level make_level(int l);

struct KernelParams {
    double C = 0.7;
    double H = 0.4;
};

struct VolParams {
    double V0 = 1.0;
    double kappa = 1.0;
    double lambda = 1.0;
    double nu = 1.0;
};

void validate(const KernelParams& kp);
void validate(const VolParams& vp);

/// Brownian increments on the level grid over [0, horizon]. Entry k is the
/// increment over (k*step, (k+1)*step].
struct IncrementPath {
    Level level;
    int horizon = 0;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    /// Increments of unit interval (t-1, t], t in 1..horizon.
    std::span<const double> block(int t) const;
};

/// V at grid times 0, step, ..., horizon.
struct VolatilityPath {
    Level level;
    int horizon = 0;
    std::vector<double> values;

    double at_unit(int t) const { return values[static_cast<std::size_t>(t) * level.steps_per_unit()]; }
    /// V_1, ..., V_horizon.
    std::vector<double> skeleton() const;
};

/// C * t^H.
double kernel_eval(const KernelParams& kp, double t);

/// Kernel values K(m * step), m = 1..count, laid out in reverse so that the
/// convolution in the Euler recursion is a forward dot product.
class KernelTable {
public:
    KernelTable(const KernelParams& kp, Level level, std::size_t count);

    double operator()(std::size_t m) const { return reversed_[reversed_.size() - m]; }
    std::size_t size() const noexcept { return reversed_.size(); }
    Level level() const noexcept { return level_; }

    /// sum_{j=0}^{k} K((k+1-j) step) * forcing[j], with k = forcing.size() - 1.
    double convolve(std::span<const double> forcing) const;

private:
    Level level_;
    std::vector<double> reversed_;
};

/// Number of grid steps for a horizon at a level.
std::size_t grid_size(Level level, int horizon);

IncrementPath sample_increments(Level level, int horizon, Stream& rng);

/// Pairwise sums of adjacent fine increments: coarse[k] = fine[2k] + fine[2k+1].
IncrementPath coarsen(const IncrementPath& fine);

/// Advances the Euler recursion over grid steps [from, to).
///
/// On entry v[0..from] and forcing[0..from) are filled; on exit v[0..to] and
/// forcing[0..to) are. forcing[k] = (kappa - lambda v_k) step + nu sqrt|v_k| w_k
/// and v_{k+1} = V0 + sum_j K((k+1-j) step) forcing[j]. The particle filters
/// and euler_volatility_path both go through here so their arithmetic is
/// identical.
void euler_extend(const VolParams& vp, const KernelTable& kernel, std::span<const double> w,
                  std::span<double> forcing, std::span<double> v, std::size_t from, std::size_t to);

VolatilityPath euler_volatility_path(const VolParams& vp, const KernelParams& kp, const IncrementPath& w);

/// Multiply-adds spent by the Euler convolution over a horizon: n(n+1)/2.
double euler_cost(Level level, int horizon);

}  // namespace mlpmcmc
