#include "mlpmcmc/functional.hpp"

#include <cctype>
#include <cmath>
#include <memory>

#include "mlpmcmc/error.hpp"

namespace mlpmcmc {

namespace {

using Eval = std::function<double(const ModelParams&, std::span<const double>)>;

double unconstrained(ParamId id, double x) {
    switch (id) {
        case ParamId::rho: return std::log((1.0 + x) / (1.0 - x));
        case ParamId::r: return x;
        case ParamId::H: return std::log(2.0 * x / (1.0 - 2.0 * x));
        default: return std::log(x);
    }
}

double skeleton_at(std::span<const double> skeleton, int t) {
    if (t < 1 || static_cast<std::size_t>(t) > skeleton.size()) {
        throw Error(ErrorKind::Domain, "multilevel", "functional",
                    "V[" + std::to_string(t) + "] is outside the observation horizon");
    }
    return skeleton[static_cast<std::size_t>(t - 1)];
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Eval parse() {
        Eval e = expr();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

    bool needs_path() const { return needs_path_; }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::Config, "multilevel", "parse_functional",
                    what + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Eval expr() {
        Eval lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = [a = lhs, b = term()](const ModelParams& p, std::span<const double> s) { return a(p, s) + b(p, s); };
            } else if (accept('-')) {
                lhs = [a = lhs, b = term()](const ModelParams& p, std::span<const double> s) { return a(p, s) - b(p, s); };
            } else {
                return lhs;
            }
        }
    }

    Eval term() {
        Eval lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = [a = lhs, b = unary()](const ModelParams& p, std::span<const double> s) { return a(p, s) * b(p, s); };
            } else if (accept('/')) {
                lhs = [a = lhs, b = unary()](const ModelParams& p, std::span<const double> s) { return a(p, s) / b(p, s); };
            } else {
                return lhs;
            }
        }
    }

    Eval unary() {
        if (accept('-')) {
            return [a = unary()](const ModelParams& p, std::span<const double> s) { return -a(p, s); };
        }
        return power();
    }

    Eval power() {
        Eval base = primary();
        if (accept('^')) {
            return [a = base, b = unary()](const ModelParams& p, std::span<const double> s) {
                return std::pow(a(p, s), b(p, s));
            };
        }
        return base;
    }

    Eval primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (accept('(')) {
            Eval inner = expr();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Eval number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                                       text_[pos_] == 'e' || text_[pos_] == 'E' ||
                                       ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                                        (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
            ++pos_;
        }
        const std::string token(text_.substr(start, pos_ - start));
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(token, &used);
        } catch (const std::exception&) {
            fail("bad number '" + token + "'");
        }
        if (used != token.size()) fail("bad number '" + token + "'");
        return [value](const ModelParams&, std::span<const double>) { return value; };
    }

    Eval identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        const std::string id(text_.substr(start, pos_ - start));

        if (id == "V" && accept('[')) {
            skip_space();
            const std::size_t digits = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (digits == pos_) fail("expected an integer index");
            const int t = std::stoi(std::string(text_.substr(digits, pos_ - digits)));
            expect(']');
            needs_path_ = true;
            return [t](const ModelParams&, std::span<const double> s) { return skeleton_at(s, t); };
        }

        using Unary = double (*)(double);
        static const std::pair<const char*, Unary> functions[] = {
            {"log", [](double x) { return std::log(x); }},   {"exp", [](double x) { return std::exp(x); }},
            {"sqrt", [](double x) { return std::sqrt(x); }}, {"abs", [](double x) { return std::abs(x); }},
            {"tanh", [](double x) { return std::tanh(x); }}, {"atanh", [](double x) { return std::atanh(x); }},
        };
        for (const auto& [fname, fn] : functions) {
            if (id == fname) {
                expect('(');
                Eval arg = expr();
                expect(')');
                return [fn = fn, arg](const ModelParams& p, std::span<const double> s) { return fn(arg(p, s)); };
            }
        }
        for (ParamId pid : kAllParams) {
            if (name(pid) == id) {
                return [pid](const ModelParams& p, std::span<const double>) { return p.get(pid); };
            }
        }
        fail("unknown identifier '" + id + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    bool needs_path_ = false;
};

}  // namespace

Functional coordinate_functional(ParamId id) {
    return Functional{coordinate_label(id),
                      [id](const ModelParams& p, std::span<const double>) { return unconstrained(id, p.get(id)); },
                      false};
}

std::vector<Functional> coordinate_functionals(ModelKind kind, bool estimate_H) {
    std::vector<Functional> out;
    for (ParamId id : active_parameters(kind, estimate_H)) out.push_back(coordinate_functional(id));
    return out;
}

Functional parameter_functional(ParamId id) {
    return Functional{std::string(name(id)), [id](const ModelParams& p, std::span<const double>) { return p.get(id); },
                      false};
}

Functional skeleton_functional(int t) {
    return Functional{"V[" + std::to_string(t) + "]",
                      [t](const ModelParams&, std::span<const double> s) { return skeleton_at(s, t); }, true};
}

Functional constant_functional(double c) {
    return Functional{std::to_string(c), [c](const ModelParams&, std::span<const double>) { return c; }, false};
}

Functional parse_functional(std::string_view expression) {
    Parser parser(expression);
    Eval eval = parser.parse();
    return Functional{std::string(expression), std::move(eval), parser.needs_path()};
}

}  // namespace mlpmcmc
