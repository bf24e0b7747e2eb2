#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <ggmsel/errors.hpp>
#include <ggmsel/surrogates.hpp>

namespace ggmsel {

/// Scalar thresholding problem argmin_{x >= 0} 1/2 (y - x)^2 + lam g(x).
struct ProxProblem
{
    double y = 0.0;
    double lam = 1.0;
    SurrogateSpec g;
    double tol = 1e-10;            ///< stop when |J1(J1(x)) - 2 J1(x) + x| <= tol
    std::size_t max_iter = 10000;
};

enum class ProxBranch
{
    FixedPoint, ///< minimizer found by the accelerated fixed-point iteration
    Breakpoint, ///< f' >= 0 at the breakpoint, candidate is the breakpoint itself
    Zero,       ///< f(0) <= f(candidate)
};

inline std::string_view to_string(ProxBranch b)
{
    switch (b) {
        case ProxBranch::FixedPoint: return "fixed_point";
        case ProxBranch::Breakpoint: return "breakpoint";
        case ProxBranch::Zero: return "zero";
    }
    return "unknown";
}

struct ProxSolution
{
    double x_star = 0.0;
    std::size_t iterations = 0;
    ProxBranch branch = ProxBranch::Zero;
};

/// f_y(x) = 1/2 (y - x)^2 + lam g(x).
inline double prox_objective(double y, double lam, const SurrogateSpec& g, double x)
{
    const double r = y - x;
    return 0.5 * r * r + lam * g.value(x);
}

namespace detail {

inline void validate(const ProxProblem& p)
{
    if (!(p.y >= 0.0) || !std::isfinite(p.y)) {
        throw DomainError("threshold input y must be finite and >= 0");
    }
    if (!(p.lam > 0.0) || !std::isfinite(p.lam)) {
        throw DomainError("threshold weight lam must be finite and > 0");
    }
    if (!(p.tol > 0.0)) throw DomainError("threshold tolerance must be > 0");
}

} // namespace detail

/**
 * Largest x >= 0 with J1'(x) = -lam g''(x) = 1, or 0 if there is none.
 *
 * g'' is nondecreasing for every supported kind, so f_y is concave on
 * [0, a0] and convex on [a0, inf). All kinds have a closed form.
 */
inline double breakpoint_a0(const SurrogateSpec& g, double lam)
{
    if (!(lam > 0.0)) throw DomainError("breakpoint requires lam > 0");
    const double a = g.param();
    double x = 0.0;
    switch (g.kind()) {
        case SurrogateKind::Identity:
            x = 0.0;
            break;
        case SurrogateKind::Lp:
            // p (1 - p) x^{p - 2} = 1 / lam
            x = std::pow(lam * a * (1.0 - a), 1.0 / (2.0 - a));
            break;
        case SurrogateKind::Geman:
            // 2 eps / (x + eps)^3 = 1 / lam
            x = std::cbrt(2.0 * lam * a) - a;
            break;
        case SurrogateKind::Laplace:
            // exp(-x / gamma) / gamma^2 = 1 / lam
            x = a * std::log(lam / (a * a));
            break;
        case SurrogateKind::Log:
            // (gamma + x)^2 = lam
            x = std::sqrt(lam) - a;
            break;
        case SurrogateKind::Logarithm:
            // (gamma x + 1)^2 log(gamma + 1) = lam gamma^2
            x = std::sqrt(lam / std::log1p(a)) - 1.0 / a;
            break;
        case SurrogateKind::Etp:
            // gamma^2 exp(-gamma x) / (1 - exp(-gamma)) = 1 / lam
            x = std::log(lam * a * a / -std::expm1(-a)) / a;
            break;
    }
    return std::max(x, 0.0);
}

/**
 * Global minimizer of f_y over x >= 0 by the generalized accelerating
 * iterative (GAI) scheme.
 *
 * With J1(x) = y - lam g'(x), the minimizer on [a0, inf) is the fixed point
 * of J1, located with Aitken-accelerated iterates started at y. On [0, a0]
 * f_y is concave, so the global answer is either that fixed point or 0.
 * Ties go to 0.
 *
 * Throws IterationLimitError if the iteration does not settle within
 * max_iter steps.
 */
inline ProxSolution solve_threshold(const ProxProblem& p)
{
    detail::validate(p);
    const auto& g = p.g;
    const double y = p.y;
    const double lam = p.lam;
    if (y == 0.0) return {0.0, 0, ProxBranch::Zero};

    const double a0 = breakpoint_a0(g, lam);
    ProxSolution sol;
    double x_hat = a0;
    sol.branch = ProxBranch::Breakpoint;

    const double slope_a0 = a0 - y + lam * g.derivative(a0);
    if (slope_a0 < 0.0) {
        // [a0, y] is invariant under J1 here; keep iterates inside it.
        const auto j1 = [&](double x) {
            return std::clamp(y - lam * g.derivative(x), a0, y);
        };
        double x = y;
        std::size_t it = 0;
        while (true) {
            const double u = j1(x);
            const double v = j1(u);
            const double denom = v - 2.0 * u + x;
            if (!std::isfinite(denom)) {
                throw NumericalError("threshold fixed-point iterate is not finite");
            }
            if (std::abs(denom) <= p.tol || std::abs(denom) < 1e-15) break;
            if (it >= p.max_iter) {
                throw IterationLimitError("threshold fixed-point iteration did not converge within "
                                          + std::to_string(p.max_iter) + " steps");
            }
            double next = u - (v - u) * (u - x) / denom;
            // Fall back to the plain double step when the Aitken
            // extrapolation leaves the invariant interval.
            if (!std::isfinite(next) || next < a0 || next > y) next = v;
            x = next;
            ++it;
        }
        x_hat = j1(x);
        sol.iterations = it;
        sol.branch = ProxBranch::FixedPoint;
    }

    if (prox_objective(y, lam, g, 0.0) <= prox_objective(y, lam, g, x_hat)) {
        sol.x_star = 0.0;
        sol.branch = ProxBranch::Zero;
    } else {
        sol.x_star = x_hat;
    }
    return sol;
}

/// Odd extension T(-y) = -T(y) for signed inputs.
inline double threshold_signed(double y, double lam, const SurrogateSpec& g, double tol = 1e-10)
{
    ProxProblem p{std::abs(y), lam, g, tol};
    const double x = solve_threshold(p).x_star;
    return std::signbit(y) ? -x : x;
}

/**
 * Brute-force minimizer of f_y on [0, y]: scan the grid {0, step, ..., y},
 * then refine by trisection inside the cell around the best grid point.
 * Test oracle only; cost is O(y / step).
 */
inline double oracle_threshold(const ProxProblem& p, double grid_step)
{
    detail::validate(p);
    if (!(grid_step > 0.0)) throw DomainError("oracle grid step must be > 0");
    const double y = p.y;
    if (y == 0.0) return 0.0;
    const auto f = [&](double x) { return prox_objective(y, p.lam, p.g, x); };

    const auto count = static_cast<std::size_t>(std::floor(y / grid_step));
    double best_x = 0.0;
    double best_f = f(0.0);
    for (std::size_t k = 1; k <= count + 1; ++k) {
        const double x = std::min(static_cast<double>(k) * grid_step, y);
        const double fx = f(x);
        if (fx < best_f) {
            best_f = fx;
            best_x = x;
        }
    }

    double lo = std::max(best_x - grid_step, 0.0);
    double hi = std::min(best_x + grid_step, y);
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++i) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (f(m1) <= f(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    const double refined = 0.5 * (lo + hi);
    // Trisection assumes unimodality inside the cell; keep the grid answer if
    // refinement did worse.
    if (f(refined) < best_f) best_x = refined;
    if (f(0.0) <= f(best_x)) return 0.0;
    return best_x;
}

} // namespace ggmsel
