#pragma once

// Functionals phi(theta, V_1..V_T) whose posterior expectations are
// estimated. Besides the built-in projections, expressions such as
// "log(V0)", "V[3] - V[1]" or "log((1+rho)/(1-rho))" are accepted.
//
// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | param | 'V' '[' integer ']' | func '(' expr ')' | '(' expr ')'
//   param   := V0 | kappa | lambda | nu | H | C | rho | r | sigma_obs
//   func    := log | exp | sqrt | abs | tanh | atanh

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlpmcmc/models.hpp"

namespace mlpmcmc {

struct Functional {
    std::string name;
    std::function<double(const ModelParams&, std::span<const double> skeleton)> eval;
    /// False when eval ignores the volatility skeleton, so callers may skip
    /// rebuilding Euler paths.
    bool needs_path = false;

    double operator()(const ModelParams& theta, std::span<const double> skeleton) const {
        return eval(theta, skeleton);
    }
};

/// Unconstrained coordinate of a parameter, labelled like "log(V0)".
Functional coordinate_functional(ParamId id);

/// One coordinate functional per active parameter of the model.
std::vector<Functional> coordinate_functionals(ModelKind kind, bool estimate_H);

/// Constrained parameter value.
Functional parameter_functional(ParamId id);

/// V_t on the unit-time skeleton (1-based).
Functional skeleton_functional(int t);

Functional constant_functional(double c);

Functional parse_functional(std::string_view expression);

}  // namespace mlpmcmc
