#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls into the library.

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double rel_err(double got, double want) {
    const double scale = std::max(std::abs(want), 1e-300);
    return std::abs(got - want) / scale;
}

inline double kernel(double C, double H, double t) {
    return static_cast<double>(static_cast<long double>(C) * std::exp(static_cast<long double>(H) * std::log(static_cast<long double>(t))));
}

inline double normal_logpdf(double x, double mean, double var) {
    const long double d = static_cast<long double>(x) - mean;
    return static_cast<double>(-0.5L * std::log(2.0L * std::numbers::pi_v<long double> * var) - d * d / (2.0L * var));
}

/// V_{k+1} = V0 + sum_{j<=k} K((k+1-j) dt) [(kappa - lambda V_j) dt + nu sqrt|V_j| w_j].
inline std::vector<double> euler_naive(double V0, double kappa, double lambda, double nu, double C, double H, double dt,
                                       const std::vector<double>& w) {
    std::vector<double> v(w.size() + 1, V0);
    std::vector<double> f(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        f[k] = (kappa - lambda * v[k]) * dt + nu * std::sqrt(std::abs(v[k])) * w[k];
        long double acc = V0;
        for (std::size_t j = 0; j <= k; ++j) acc += static_cast<long double>(kernel(C, H, static_cast<double>(k + 1 - j) * dt)) * f[j];
        v[k + 1] = static_cast<double>(acc);
    }
    return v;
}

/// Per-t observation log densities of one increment path: SSM N(V_t, sigma^2)
/// or the SV Gaussian built from left-point volatilities on [t-1, t).
template <class Theta, class Obs>
std::vector<double> log_densities(bool ssm, const Theta& th, int level, const std::vector<double>& w, const Obs& obs) {
    const double dt = std::ldexp(1.0, -level);
    const std::size_t per = std::size_t{1} << level;
    const auto v = euler_naive(th.vol.V0, th.vol.kappa, th.vol.lambda, th.vol.nu, th.kernel.C, th.kernel.H, dt, w);
    std::vector<double> out;
    for (int t = 1; t <= static_cast<int>(obs.y.size()); ++t) {
        const std::size_t b = static_cast<std::size_t>(t - 1) * per;
        const double yt = obs.y[static_cast<std::size_t>(t - 1)];
        const double yp = t == 1 ? obs.y0 : obs.y[static_cast<std::size_t>(t - 2)];
        if (ssm) {
            out.push_back(normal_logpdf(yt, v[b + per], th.sigma_obs * th.sigma_obs));
        } else {
            double noise = 0.0, energy = 0.0;
            for (std::size_t k = 0; k < per; ++k) {
                noise += std::sqrt(std::abs(v[b + k])) * w[b + k];
                energy += std::abs(v[b + k]);
            }
            const double mean = yp + (th.drift_in_mean ? th.r : 0.0) + th.rho * noise;
            out.push_back(normal_logpdf(yt, mean, (1.0 - th.rho * th.rho) * dt * energy));
        }
    }
    return out;
}

inline std::vector<double> coarse_of(const std::vector<double>& w) {
    std::vector<double> out(w.size() / 2);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = w[2 * k] + w[2 * k + 1];
    return out;
}

/// Two-pass sample moments in long double.
struct Moments {
    double mean, variance, skewness, kurtosis;
};

inline Moments two_pass_moments(const std::vector<double>& x) {
    const long double n = static_cast<long double>(x.size());
    long double s = 0.0L;
    for (double v : x) s += v;
    const long double m = s / n;
    long double m2 = 0.0L, m3 = 0.0L, m4 = 0.0L;
    for (double v : x) {
        const long double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const long double c2 = m2 / n;
    return {static_cast<double>(m), static_cast<double>(m2 / (n - 1.0L)),
            static_cast<double>((m3 / n) / std::pow(c2, 1.5L)), static_cast<double>((m4 / n) / (c2 * c2))};
}

/// Two-pass Pearson correlation of |r_i| with r_{i-j}.
inline double two_pass_lag_corr(const std::vector<double>& r, int j) {
    const long n = static_cast<long>(r.size());
    std::vector<long double> a, b;
    for (long i = 0; i < n; ++i) {
        const long k = i - j;
        if (k < 0 || k >= n) continue;
        a.push_back(std::abs(r[static_cast<std::size_t>(i)]));
        b.push_back(r[static_cast<std::size_t>(k)]);
    }
    long double ma = 0.0L, mb = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<long double>(a.size());
    mb /= static_cast<long double>(b.size());
    long double sab = 0.0L, saa = 0.0L, sbb = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return static_cast<double>(sab / std::sqrt(saa * sbb));
}

}  // namespace oracle
