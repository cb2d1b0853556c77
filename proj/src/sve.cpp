#include "mlpmcmc/sve.hpp"

#include <string>

#include "mlpmcmc/error.hpp"

namespace mlpmcmc {

namespace {

[[noreturn]] void domain_error(const char* op, const std::string& detail) {
    throw Error(ErrorKind::Domain, "sve_core", op, detail);
}

}  // namespace

Level make_level(int l) {
    if (l < 0 || l > 30) domain_error("make_level", "level must lie in [0, 30], got " + std::to_string(l));
    return Level{l};
}

void validate(const KernelParams& kp) {
    if (!(kp.C > 0.0) || !std::isfinite(kp.C)) domain_error("validate", "C must be positive");
    if (!(kp.H >= 0.0 && kp.H < 0.5)) domain_error("validate", "H must lie in [0, 0.5)");
}

void validate(const VolParams& vp) {
    const double fields[] = {vp.V0, vp.kappa, vp.lambda, vp.nu};
    for (double x : fields) {
        if (!(x > 0.0) || !std::isfinite(x)) domain_error("validate", "V0, kappa, lambda and nu must be positive");
    }
}

std::span<const double> IncrementPath::block(int t) const {
    const auto per = static_cast<std::size_t>(level.steps_per_unit());
    return std::span<const double>(values).subspan(static_cast<std::size_t>(t - 1) * per, per);
}

std::vector<double> VolatilityPath::skeleton() const {
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int t = 1; t <= horizon; ++t) out[static_cast<std::size_t>(t - 1)] = at_unit(t);
    return out;
}

double kernel_eval(const KernelParams& kp, double t) {
    if (!(t >= 0.0)) domain_error("kernel_eval", "t must be non-negative");
    return kp.C * std::pow(t, kp.H);
}

KernelTable::KernelTable(const KernelParams& kp, Level level, std::size_t count)
    : level_(level), reversed_(count) {
    const double dt = level.step();
    for (std::size_t m = 1; m <= count; ++m) {
        reversed_[count - m] = kernel_eval(kp, static_cast<double>(m) * dt);
    }
}

double KernelTable::convolve(std::span<const double> forcing) const {
    const std::size_t len = forcing.size();
    const double* k = reversed_.data() + (reversed_.size() - len);
    const double* f = forcing.data();
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= len; j += 4) {
        a0 += k[j] * f[j];
        a1 += k[j + 1] * f[j + 1];
        a2 += k[j + 2] * f[j + 2];
        a3 += k[j + 3] * f[j + 3];
    }
    for (; j < len; ++j) a0 += k[j] * f[j];
    return (a0 + a1) + (a2 + a3);
}

std::size_t grid_size(Level level, int horizon) {
    return static_cast<std::size_t>(horizon) * static_cast<std::size_t>(level.steps_per_unit());
}

IncrementPath sample_increments(Level level, int horizon, Stream& rng) {
    if (horizon < 1) domain_error("sample_increments", "horizon must be >= 1");
    IncrementPath path{level, horizon, std::vector<double>(grid_size(level, horizon))};
    const double sd = std::sqrt(level.step());
    for (double& x : path.values) x = sd * rng.normal();
    return path;
}

IncrementPath coarsen(const IncrementPath& fine) {
    if (fine.level.l < 1) {
        throw Error(ErrorKind::LevelUnderflow, "sve_core", "coarsen", "cannot coarsen a level-0 path");
    }
    IncrementPath coarse{Level{fine.level.l - 1}, fine.horizon, std::vector<double>(fine.values.size() / 2)};
    for (std::size_t k = 0; k < coarse.values.size(); ++k) {
        coarse.values[k] = fine.values[2 * k] + fine.values[2 * k + 1];
    }
    return coarse;
}

void euler_extend(const VolParams& vp, const KernelTable& kernel, std::span<const double> w,
                  std::span<double> forcing, std::span<double> v, std::size_t from, std::size_t to) {
    const double dt = kernel.level().step();
    for (std::size_t k = from; k < to; ++k) {
        const double vk = v[k];
        forcing[k] = (vp.kappa - vp.lambda * vk) * dt + vp.nu * std::sqrt(std::abs(vk)) * w[k];
        v[k + 1] = vp.V0 + kernel.convolve(forcing.first(k + 1));
    }
}

VolatilityPath euler_volatility_path(const VolParams& vp, const KernelParams& kp, const IncrementPath& w) {
    const std::size_t n = w.values.size();
    KernelTable kernel(kp, w.level, n);
    VolatilityPath out{w.level, w.horizon, std::vector<double>(n + 1)};
    std::vector<double> forcing(n);
    out.values[0] = vp.V0;
    euler_extend(vp, kernel, w.values, forcing, out.values, 0, n);
    return out;
}

double euler_cost(Level level, int horizon) {
    const auto n = static_cast<double>(grid_size(level, horizon));
    return 0.5 * n * (n + 1.0);
}

}  // namespace mlpmcmc
