#include "mlpmcmc/models.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mlpmcmc/error.hpp"

namespace mlpmcmc {

namespace {

[[noreturn]] void domain_error(const char* op, const std::string& detail) {
    throw Error(ErrorKind::Domain, "models", op, detail);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool in_support(ParamId id, double x) {
    switch (id) {
        case ParamId::V0:
        case ParamId::kappa:
        case ParamId::lambda:
        case ParamId::nu:
        case ParamId::C:
        case ParamId::sigma_obs: return x > 0.0 && std::isfinite(x);
        case ParamId::rho: return x > -1.0 && x < 1.0;
        case ParamId::r: return std::isfinite(x);
        case ParamId::H: return x > 0.0 && x < 0.5;
    }
    return false;
}

double to_unconstrained(ParamId id, double x) {
    switch (id) {
        case ParamId::rho: return std::log((1.0 + x) / (1.0 - x));
        case ParamId::r: return x;
        case ParamId::H: return std::log(2.0 * x / (1.0 - 2.0 * x));
        default: return std::log(x);
    }
}

double to_constrained(ParamId id, double z) {
    switch (id) {
        case ParamId::rho: return std::tanh(0.5 * z);
        case ParamId::r: return z;
        case ParamId::H: return 0.5 / (1.0 + std::exp(-z));
        default: return std::exp(z);
    }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::StateSpace ? "ssm" : "sv";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "ssm" || text == "state_space" || text == "StateSpace") return ModelKind::StateSpace;
    if (text == "sv" || text == "stoch_vol" || text == "StochVol") return ModelKind::StochVol;
    domain_error("parse_model_kind", "unknown model kind '" + std::string(text) + "' (expected ssm or sv)");
}

std::string_view name(ParamId id) {
    switch (id) {
        case ParamId::V0: return "V0";
        case ParamId::kappa: return "kappa";
        case ParamId::lambda: return "lambda";
        case ParamId::nu: return "nu";
        case ParamId::H: return "H";
        case ParamId::C: return "C";
        case ParamId::rho: return "rho";
        case ParamId::r: return "r";
        case ParamId::sigma_obs: return "sigma_obs";
    }
    return "?";
}

ParamId parse_param_id(std::string_view text) {
    for (ParamId id : kAllParams) {
        if (name(id) == text) return id;
    }
    domain_error("parse_param_id", "unknown parameter '" + std::string(text) + "'");
}

double ModelParams::get(ParamId id) const {
    switch (id) {
        case ParamId::V0: return vol.V0;
        case ParamId::kappa: return vol.kappa;
        case ParamId::lambda: return vol.lambda;
        case ParamId::nu: return vol.nu;
        case ParamId::H: return kernel.H;
        case ParamId::C: return kernel.C;
        case ParamId::rho: return rho;
        case ParamId::r: return r;
        case ParamId::sigma_obs: return sigma_obs;
    }
    return 0.0;
}

void ModelParams::set(ParamId id, double value) {
    switch (id) {
        case ParamId::V0: vol.V0 = value; break;
        case ParamId::kappa: vol.kappa = value; break;
        case ParamId::lambda: vol.lambda = value; break;
        case ParamId::nu: vol.nu = value; break;
        case ParamId::H: kernel.H = value; break;
        case ParamId::C: kernel.C = value; break;
        case ParamId::rho: rho = value; break;
        case ParamId::r: r = value; break;
        case ParamId::sigma_obs: sigma_obs = value; break;
    }
}

void validate(const ModelParams& theta) {
    validate(theta.vol);
    if (!(theta.kernel.H >= 0.0 && theta.kernel.H < 0.5)) domain_error("validate", "H must lie in [0, 0.5)");
    if (!(theta.kernel.C > 0.0)) domain_error("validate", "C must be positive");
    if (!(std::abs(theta.rho) <= 1.0)) domain_error("validate", "rho must lie in [-1, 1]");
    if (!std::isfinite(theta.r)) domain_error("validate", "r must be finite");
    if (!(theta.sigma_obs > 0.0)) domain_error("validate", "sigma_obs must be positive");
}

std::vector<ParamId> active_parameters(ModelKind kind, bool estimate_H) {
    std::vector<ParamId> ids;
    if (kind == ModelKind::StateSpace) {
        ids = {ParamId::V0, ParamId::kappa, ParamId::lambda, ParamId::nu};
    } else {
        ids = {ParamId::V0, ParamId::rho, ParamId::kappa, ParamId::lambda, ParamId::nu, ParamId::r};
    }
    if (estimate_H) ids.push_back(ParamId::H);
    return ids;
}

std::string coordinate_label(ParamId id) {
    switch (id) {
        case ParamId::rho: return "log((1+rho)/(1-rho))";
        case ParamId::r: return "r";
        case ParamId::H: return "logit(2H)";
        default: return "log(" + std::string(name(id)) + ")";
    }
}

void validate(const ObservationSeries& obs) {
    if (obs.y.empty()) domain_error("validate", "observation series must have T >= 1");
    if (!std::isfinite(obs.y0)) domain_error("validate", "y0 must be finite");
    for (double v : obs.y) {
        if (!std::isfinite(v)) domain_error("validate", "observations must be finite");
    }
}

double gaussian_logpdf(double x, double mean, double var) {
    if (!(var > 0.0)) domain_error("gaussian_logpdf", "variance must be positive");
    const double d = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

double log_kappa_sv(const ModelParams& theta, Level level, std::span<const double> v_seg,
                    std::span<const double> w_seg, double y_prev, double y_t) {
    double noise = 0.0;
    double energy = 0.0;
    for (std::size_t k = 0; k < v_seg.size(); ++k) {
        const double a = std::abs(v_seg[k]);
        noise += std::sqrt(a) * w_seg[k];
        energy += a;
    }
    const double mean = y_prev + (theta.drift_in_mean ? theta.r : 0.0) + theta.rho * noise;
    const double var = (1.0 - theta.rho) * (1.0 + theta.rho) * level.step() * energy;
    if (var == 0.0) {
        throw Error(ErrorKind::DegenerateVariance, "models", "kappa_sv",
                    "(1 - rho^2) * step * sum|v| is zero");
    }
    if (!std::isfinite(var) || !std::isfinite(mean)) return std::numeric_limits<double>::quiet_NaN();
    return gaussian_logpdf(y_t, mean, var);
}

double kappa_sv(const ModelParams& theta, Level level, std::span<const double> v_seg,
                std::span<const double> w_seg, double y_prev, double y_t) {
    return std::exp(log_kappa_sv(theta, level, v_seg, w_seg, y_prev, y_t));
}

double log_g_ssm(const ModelParams& theta, double v_t, double y_t) {
    if (!(theta.sigma_obs > 0.0)) domain_error("g_ssm", "sigma_obs must be positive");
    return gaussian_logpdf(y_t, v_t, theta.sigma_obs * theta.sigma_obs);
}

double g_ssm(const ModelParams& theta, double v_t, double y_t) {
    return std::exp(log_g_ssm(theta, v_t, y_t));
}

std::vector<double> observation_log_densities(const ModelParams& theta, const IncrementPath& w,
                                              const VolatilityPath& v, const ObservationSeries& obs) {
    const int horizon = obs.horizon();
    if (w.horizon != horizon || v.horizon != horizon) {
        domain_error("observation_log_densities", "path horizon does not match the observations");
    }
    const auto per = static_cast<std::size_t>(w.level.steps_per_unit());
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int t = 1; t <= horizon; ++t) {
        if (theta.model_kind == ModelKind::StateSpace) {
            out[static_cast<std::size_t>(t - 1)] = log_g_ssm(theta, v.at_unit(t), obs.at(t));
        } else {
            const auto begin = static_cast<std::size_t>(t - 1) * per;
            out[static_cast<std::size_t>(t - 1)] =
                log_kappa_sv(theta, w.level, std::span<const double>(v.values).subspan(begin, per),
                             w.block(t), obs.prev(t), obs.at(t));
        }
    }
    return out;
}

UnconstrainedParams transform(const ModelParams& theta) {
    UnconstrainedParams z;
    for (ParamId id : active_parameters(theta)) {
        const double x = theta.get(id);
        if (!in_support(id, x)) {
            domain_error("transform", std::string(name(id)) + " is outside the open support of its transform");
        }
        z.z.push_back(to_unconstrained(id, x));
    }
    return z;
}

ModelParams untransform(const UnconstrainedParams& z, const ModelParams& fixed) {
    const auto ids = active_parameters(fixed);
    if (z.size() != ids.size()) domain_error("untransform", "coordinate count does not match the model");
    ModelParams theta = fixed;
    for (std::size_t i = 0; i < ids.size(); ++i) theta.set(ids[i], to_constrained(ids[i], z.z[i]));
    return theta;
}

ModelParams untransform(const UnconstrainedParams& z, ModelKind kind, bool estimate_H) {
    return untransform(z, default_params(kind, estimate_H));
}

double prior_logpdf(const UnconstrainedParams& z) {
    double lp = 0.0;
    for (double x : z.z) {
        if (!std::isfinite(x)) return kNegInf;
        lp += gaussian_logpdf(x, 0.0, 1.0);
    }
    return lp;
}

double prior_logpdf(const ModelParams& theta) {
    for (ParamId id : active_parameters(theta)) {
        if (!in_support(id, theta.get(id))) return kNegInf;
    }
    return prior_logpdf(transform(theta));
}

ModelParams prior_sample(const ModelParams& fixed, Stream& rng) {
    UnconstrainedParams z;
    z.z.resize(active_parameters(fixed).size());
    for (double& x : z.z) x = rng.normal();
    return untransform(z, fixed);
}

ModelParams prior_sample(ModelKind kind, bool estimate_H, Stream& rng) {
    return prior_sample(default_params(kind, estimate_H), rng);
}

ModelParams default_params(ModelKind kind, bool estimate_H) {
    ModelParams theta;
    theta.model_kind = kind;
    theta.estimate_H = estimate_H;
    theta.kernel = KernelParams{0.7, 0.4};
    theta.sigma_obs = 0.8;
    return theta;
}

}  // namespace mlpmcmc
