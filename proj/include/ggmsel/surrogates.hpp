#pragma once
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <ggmsel/errors.hpp>

namespace ggmsel {

/**
 * Concave surrogates g(x) of the l0 indicator, used as the outer function of
 * the group penalty sum_j g(||group_j||_2).
 *
 *   lp         x^p                              0 < p < 1
 *   geman      x / (x + epsilon)                epsilon > 0
 *   laplace    1 - exp(-x / gamma)              gamma > 0
 *   log        log(gamma + x)                   gamma > 0
 *   logarithm  log(gamma x + 1) / log(gamma + 1) gamma > 0
 *   etp        (1 - exp(-gamma x)) / (1 - exp(-gamma))   gamma > 0
 *   identity   x    (l1 reference; makes the group penalty the l2,1 norm)
 *
 * Note that log(gamma + x) is negative at 0 when gamma < 1. The constant
 * offset does not move any minimizer.
 */
enum class SurrogateKind
{
    Lp,
    Geman,
    Laplace,
    Log,
    Logarithm,
    Etp,
    Identity,
};

inline constexpr std::array<SurrogateKind, 7> all_surrogate_kinds{
    SurrogateKind::Lp,        SurrogateKind::Geman, SurrogateKind::Laplace,
    SurrogateKind::Log,       SurrogateKind::Logarithm,
    SurrogateKind::Etp,       SurrogateKind::Identity,
};

inline std::string_view to_string(SurrogateKind kind)
{
    switch (kind) {
        case SurrogateKind::Lp: return "lp";
        case SurrogateKind::Geman: return "geman";
        case SurrogateKind::Laplace: return "laplace";
        case SurrogateKind::Log: return "log";
        case SurrogateKind::Logarithm: return "logarithm";
        case SurrogateKind::Etp: return "etp";
        case SurrogateKind::Identity: return "identity";
    }
    return "unknown";
}

inline SurrogateKind surrogate_kind_from_string(std::string_view name)
{
    for (auto kind : all_surrogate_kinds) {
        if (to_string(kind) == name) return kind;
    }
    throw InputError("unknown surrogate kind '" + std::string(name) + "'");
}

/// Name of the single parameter a kind takes, empty for identity.
inline std::string_view surrogate_param_name(SurrogateKind kind)
{
    switch (kind) {
        case SurrogateKind::Lp: return "p";
        case SurrogateKind::Geman: return "epsilon";
        case SurrogateKind::Identity: return "";
        default: return "gamma";
    }
}

/**
 * Immutable surrogate g with validated parameters and analytic g, g', g''.
 */
class SurrogateSpec
{
public:
    using param_map_t = std::map<std::string, double, std::less<>>;

    SurrogateSpec() : SurrogateSpec(SurrogateKind::Identity, {}) {}

    SurrogateSpec(SurrogateKind kind, param_map_t params)
        : kind_(kind), params_(std::move(params))
    {
        const auto name = surrogate_param_name(kind_);
        for (const auto& [key, _] : params_) {
            if (key != name) {
                throw InputError("surrogate '" + std::string(to_string(kind_))
                                 + "' does not take parameter '" + key + "'");
            }
        }
        if (name.empty()) return;

        auto it = params_.find(name);
        if (it == params_.end()) {
            throw InputError("surrogate '" + std::string(to_string(kind_))
                             + "' requires parameter '" + std::string(name) + "'");
        }
        a_ = it->second;
        if (!std::isfinite(a_)) {
            throw DomainError("surrogate parameter must be finite");
        }
        if (kind_ == SurrogateKind::Lp) {
            if (!(a_ > 0.0 && a_ < 1.0)) {
                throw DomainError("lp surrogate requires 0 < p < 1");
            }
        } else if (!(a_ > 0.0)) {
            throw DomainError("surrogate '" + std::string(to_string(kind_)) + "' requires "
                              + std::string(name) + " > 0");
        }
        if (kind_ == SurrogateKind::Logarithm) c_ = std::log1p(a_);
        if (kind_ == SurrogateKind::Etp) c_ = -std::expm1(-a_);
    }

    static SurrogateSpec identity() { return {SurrogateKind::Identity, {}}; }
    static SurrogateSpec lp(double p) { return {SurrogateKind::Lp, {{"p", p}}}; }
    static SurrogateSpec geman(double eps) { return {SurrogateKind::Geman, {{"epsilon", eps}}}; }
    static SurrogateSpec laplace(double gamma) { return {SurrogateKind::Laplace, {{"gamma", gamma}}}; }
    static SurrogateSpec log(double gamma) { return {SurrogateKind::Log, {{"gamma", gamma}}}; }
    static SurrogateSpec logarithm(double gamma) { return {SurrogateKind::Logarithm, {{"gamma", gamma}}}; }
    static SurrogateSpec etp(double gamma) { return {SurrogateKind::Etp, {{"gamma", gamma}}}; }

    SurrogateKind kind() const { return kind_; }
    const param_map_t& params() const { return params_; }

    /// The kind's single parameter (p, epsilon or gamma); 0 for identity.
    double param() const { return a_; }

    double value(double x) const
    {
        if (!(x >= 0.0)) throw DomainError("surrogate evaluated at negative or NaN x");
        switch (kind_) {
            case SurrogateKind::Lp: return std::pow(x, a_);
            case SurrogateKind::Geman: return x / (x + a_);
            case SurrogateKind::Laplace: return -std::expm1(-x / a_);
            case SurrogateKind::Log: return std::log(a_ + x);
            case SurrogateKind::Logarithm: return std::log1p(a_ * x) / c_;
            case SurrogateKind::Etp: return -std::expm1(-a_ * x) / c_;
            case SurrogateKind::Identity: return x;
        }
        return x;
    }

    /// g'(x). Lp is singular at 0 and requires x > 0; the rest accept x = 0.
    double derivative(double x) const
    {
        check_derivative_domain(x);
        switch (kind_) {
            case SurrogateKind::Lp: return a_ * std::pow(x, a_ - 1.0);
            case SurrogateKind::Geman: return a_ / ((x + a_) * (x + a_));
            case SurrogateKind::Laplace: return std::exp(-x / a_) / a_;
            case SurrogateKind::Log: return 1.0 / (a_ + x);
            case SurrogateKind::Logarithm: return a_ / ((a_ * x + 1.0) * c_);
            case SurrogateKind::Etp: return a_ * std::exp(-a_ * x) / c_;
            case SurrogateKind::Identity: return 1.0;
        }
        return 1.0;
    }

    /// g''(x), nonpositive and nondecreasing in x for every kind.
    double second_derivative(double x) const
    {
        check_derivative_domain(x);
        switch (kind_) {
            case SurrogateKind::Lp: return a_ * (a_ - 1.0) * std::pow(x, a_ - 2.0);
            case SurrogateKind::Geman: return -2.0 * a_ / std::pow(x + a_, 3);
            case SurrogateKind::Laplace: return -std::exp(-x / a_) / (a_ * a_);
            case SurrogateKind::Log: return -1.0 / ((a_ + x) * (a_ + x));
            case SurrogateKind::Logarithm: {
                const double d = a_ * x + 1.0;
                return -a_ * a_ / (d * d * c_);
            }
            case SurrogateKind::Etp: return -a_ * a_ * std::exp(-a_ * x) / c_;
            case SurrogateKind::Identity: return 0.0;
        }
        return 0.0;
    }

    /// Sum of g over the entries of a range of nonnegative group norms.
    template <class Range>
    double sum(const Range& norms) const
    {
        double s = 0.0;
        for (double v : norms) s += value(v);
        return s;
    }

private:
    void check_derivative_domain(double x) const
    {
        if (kind_ == SurrogateKind::Lp) {
            if (!(x > 0.0)) throw DomainError("lp surrogate derivative requires x > 0");
        } else if (!(x >= 0.0)) {
            throw DomainError("surrogate derivative evaluated at negative or NaN x");
        }
    }

    SurrogateKind kind_;
    param_map_t params_;
    double a_ = 0.0;
    double c_ = 1.0; // log(gamma+1) for logarithm, 1-exp(-gamma) for etp
};

} // namespace ggmsel
