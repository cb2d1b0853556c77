#pragma once

// Parameter vectors, priors, the constrained <-> unconstrained transform and
// the per-unit-time observation densities of the state-space (SSM) and
// stochastic-volatility (SV) models.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlpmcmc/random.hpp"
#include "mlpmcmc/sve.hpp"

namespace mlpmcmc {

enum class ModelKind { StateSpace, StochVol };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Named fields of the full parameter vector, in serialization order.
enum class ParamId { V0, kappa, lambda, nu, H, C, rho, r, sigma_obs };

inline constexpr ParamId kAllParams[] = {ParamId::V0, ParamId::kappa, ParamId::lambda,
                                         ParamId::nu, ParamId::H,     ParamId::C,
                                         ParamId::rho, ParamId::r,    ParamId::sigma_obs};

std::string_view name(ParamId id);
ParamId parse_param_id(std::string_view text);

struct ModelParams {
    VolParams vol;
    KernelParams kernel;
    double rho = 0.0;        // SV only
    double r = 0.0;          // SV only
    double sigma_obs = 0.8;  // SSM only
    ModelKind model_kind = ModelKind::StateSpace;
    bool estimate_H = false;
    /// Adds r to the Gaussian mean of the SV density.
    bool drift_in_mean = true;

    double get(ParamId id) const;
    void set(ParamId id, double value);
};

/// Throws a domain error naming the offending field.
void validate(const ModelParams& theta);

/// Parameters that are sampled for this model, in coordinate order:
/// SSM (V0, kappa, lambda, nu), SV (V0, rho, kappa, lambda, nu, r), then H
/// when it is estimated.
std::vector<ParamId> active_parameters(ModelKind kind, bool estimate_H);
inline std::vector<ParamId> active_parameters(const ModelParams& theta) {
    return active_parameters(theta.model_kind, theta.estimate_H);
}

/// Label of the unconstrained coordinate, e.g. "log(V0)".
std::string coordinate_label(ParamId id);

struct UnconstrainedParams {
    std::vector<double> z;

    std::size_t size() const noexcept { return z.size(); }
};

/// Unit-time observations y_1..y_T; y0 is the given initial value (SV).
struct ObservationSeries {
    double y0 = 0.0;
    std::vector<double> y;

    int horizon() const noexcept { return static_cast<int>(y.size()); }
    double prev(int t) const { return t == 1 ? y0 : y[static_cast<std::size_t>(t - 2)]; }
    double at(int t) const { return y[static_cast<std::size_t>(t - 1)]; }
};

void validate(const ObservationSeries& obs);

double gaussian_logpdf(double x, double mean, double var);

/// log kappa_{t,l}: Gaussian log density of y_t with mean
/// y_prev + r + rho * sum sqrt|v_k| w_k and variance (1 - rho^2) step sum |v_k|.
/// v_seg and w_seg hold the 2^l grid values on [t-1, t).
double log_kappa_sv(const ModelParams& theta, Level level, std::span<const double> v_seg,
                    std::span<const double> w_seg, double y_prev, double y_t);
double kappa_sv(const ModelParams& theta, Level level, std::span<const double> v_seg,
                std::span<const double> w_seg, double y_prev, double y_t);

/// Gaussian observation density of the SSM: y_t ~ N(v_t, sigma_obs^2).
double log_g_ssm(const ModelParams& theta, double v_t, double y_t);
double g_ssm(const ModelParams& theta, double v_t, double y_t);

/// Per-t log densities (log kappa_{t,l} or log g(y_t | v_t)) of one
/// increment path and its Euler volatility path.
std::vector<double> observation_log_densities(const ModelParams& theta, const IncrementPath& w,
                                              const VolatilityPath& v, const ObservationSeries& obs);

/// Unconstrained coordinates: log for positive parameters,
/// log((1+rho)/(1-rho)) for rho, identity for r and logit(2H) for H.
UnconstrainedParams transform(const ModelParams& theta);

/// Inverse of transform. Inactive and fixed fields are copied from `fixed`.
ModelParams untransform(const UnconstrainedParams& z, const ModelParams& fixed);
ModelParams untransform(const UnconstrainedParams& z, ModelKind kind, bool estimate_H);

/// Independent standard normal priors on every unconstrained coordinate.
/// The density is reported in the unconstrained parameterization, which
/// already absorbs the log-Jacobian of the transform. Out-of-support
/// parameters give -infinity.
double prior_logpdf(const ModelParams& theta);
double prior_logpdf(const UnconstrainedParams& z);

ModelParams prior_sample(const ModelParams& fixed, Stream& rng);
ModelParams prior_sample(ModelKind kind, bool estimate_H, Stream& rng);

/// Fixed-field defaults: C = 0.7, H = 0.4, sigma_obs = 0.8.
ModelParams default_params(ModelKind kind, bool estimate_H = false);

}  // namespace mlpmcmc
