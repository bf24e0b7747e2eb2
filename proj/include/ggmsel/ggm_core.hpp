#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Dense>
#include <ggmsel/errors.hpp>
#include <ggmsel/scalar_prox.hpp>
#include <ggmsel/surrogates.hpp>

namespace ggmsel {

using matrix_t = Eigen::MatrixXd;
using vector_t = Eigen::VectorXd;
using index_t = Eigen::Index;
using index_set_t = std::vector<index_t>;

/**
 * Which entries of column i form the penalized group.
 *
 * FullOffDiag:    every off-diagonal entry of column i, for every i.
 * ImportantRows:  rows in the important set I, only for columns i not in I.
 *
 * Diagonal entries are never penalized in either mode.
 */
enum class PenaltyMode
{
    FullOffDiag,
    ImportantRows,
};

inline std::string_view to_string(PenaltyMode m)
{
    return m == PenaltyMode::FullOffDiag ? "full_offdiag" : "important_rows";
}

inline PenaltyMode penalty_mode_from_string(std::string_view s)
{
    if (s == "full_offdiag" || s == "full") return PenaltyMode::FullOffDiag;
    if (s == "important_rows" || s == "important") return PenaltyMode::ImportantRows;
    throw InputError("unknown penalty mode '" + std::string(s) + "'");
}

enum class PrecisionMethod
{
    GradientAscent,
    EigenClosedForm,
};

inline std::string_view to_string(PrecisionMethod m)
{
    return m == PrecisionMethod::GradientAscent ? "gradient" : "eigen";
}

inline PrecisionMethod precision_method_from_string(std::string_view s)
{
    if (s == "gradient" || s == "gradient_ascent") return PrecisionMethod::GradientAscent;
    if (s == "eigen" || s == "eigen_closed_form") return PrecisionMethod::EigenClosedForm;
    throw InputError("unknown precision method '" + std::string(s) + "'");
}

/**
 * max_{Omega > 0} log det Omega - <Sigma, Omega> - tau sum_j g(||group_j(Omega)||_2)
 */
struct GgmProblem
{
    matrix_t sigma_hat;
    index_set_t important_set; ///< 0-based, ordered
    double tau = 0.1;
    double lam = 1.0;
    SurrogateSpec g = SurrogateSpec::identity();
    PenaltyMode mode = PenaltyMode::ImportantRows;

    index_t size() const { return sigma_hat.rows(); }

    void validate() const
    {
        const index_t n = sigma_hat.rows();
        if (n == 0 || sigma_hat.cols() != n) throw InputError("covariance must be a nonempty square matrix");
        if (!sigma_hat.allFinite()) throw InputError("covariance has non-finite entries");
        const double scale = std::max(1.0, sigma_hat.cwiseAbs().maxCoeff());
        if ((sigma_hat - sigma_hat.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
            throw InputError("covariance not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<matrix_t> es(sigma_hat, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
        if (es.eigenvalues().minCoeff() < -1e-10 * scale) throw InputError("covariance not positive semidefinite");

        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        for (auto i : important_set) {
            if (i < 0 || i >= n) throw InputError("important index " + std::to_string(i) + " out of range");
            if (seen[static_cast<std::size_t>(i)]) throw InputError("duplicate important index " + std::to_string(i));
            seen[static_cast<std::size_t>(i)] = true;
        }
        if (mode == PenaltyMode::ImportantRows && important_set.empty()) {
            throw InputError("important_rows mode requires a nonempty important set");
        }
        if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("tau must be finite and >= 0");
        if (!(lam > 0.0) || !std::isfinite(lam)) throw DomainError("lambda must be finite and > 0");
    }
};

/**
 * Row indices of the penalized group of every column; empty for columns
 * that carry no penalty.
 */
class GroupStructure
{
public:
    GroupStructure(index_t n, const index_set_t& important, PenaltyMode mode)
        : rows_(static_cast<std::size_t>(n))
    {
        std::vector<bool> is_important(static_cast<std::size_t>(n), false);
        for (auto i : important) is_important[static_cast<std::size_t>(i)] = true;
        for (index_t col = 0; col < n; ++col) {
            auto& r = rows_[static_cast<std::size_t>(col)];
            if (mode == PenaltyMode::FullOffDiag) {
                for (index_t j = 0; j < n; ++j) {
                    if (j != col) r.push_back(j);
                }
            } else if (!is_important[static_cast<std::size_t>(col)]) {
                r = important;
            }
        }
    }

    explicit GroupStructure(const GgmProblem& p) : GroupStructure(p.size(), p.important_set, p.mode) {}

    index_t size() const { return static_cast<index_t>(rows_.size()); }
    const index_set_t& rows(index_t col) const { return rows_[static_cast<std::size_t>(col)]; }

    /// Whether column col is penalized at all.
    bool penalized(index_t col) const
    {
        // Under FullOffDiag with n = 1 the lone column has an empty group.
        return !rows(col).empty();
    }

    double norm(const matrix_t& m, index_t col) const
    {
        double s = 0.0;
        for (auto j : rows(col)) s += m(j, col) * m(j, col);
        return std::sqrt(s);
    }

    /// Per-column group norms; 0 for unpenalized columns.
    vector_t norms(const matrix_t& m) const
    {
        vector_t out = vector_t::Zero(size());
        for (index_t c = 0; c < size(); ++c) out(c) = norm(m, c);
        return out;
    }

    double penalty(const matrix_t& m, const SurrogateSpec& g) const
    {
        double s = 0.0;
        for (index_t c = 0; c < size(); ++c) {
            if (penalized(c)) s += g.value(norm(m, c));
        }
        return s;
    }

private:
    std::vector<index_set_t> rows_;
};

namespace detail {

/// log det of a symmetric matrix via Cholesky; nullopt when not PD.
inline std::optional<double> log_det_pd(const matrix_t& m)
{
    Eigen::LLT<matrix_t> llt(m);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const auto d = llt.matrixLLT().diagonal();
    if ((d.array() <= 0.0).any()) return std::nullopt;
    return 2.0 * d.array().log().sum();
}

inline double min_eigenvalue(const matrix_t& m)
{
    Eigen::SelfAdjointEigenSolver<matrix_t> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    return es.eigenvalues().minCoeff();
}

inline matrix_t symmetrized(const matrix_t& m) { return 0.5 * (m + m.transpose()); }

/// Positive root of w^2 + a w - 1/(2 lam) = 0, stable for either sign of a.
inline double precision_root(double a, double lam)
{
    const double c = 1.0 / (2.0 * lam);
    const double disc = std::sqrt(a * a + 4.0 * c);
    return a >= 0.0 ? 2.0 * c / (a + disc) : 0.5 * (disc - a);
}

} // namespace detail

/// A_s = sym(Sigma / (2 lam) - Delta), the linear term of the precision subproblem.
inline matrix_t precision_linear_term(const matrix_t& sigma_hat, const matrix_t& delta, double lam)
{
    return detail::symmetrized(sigma_hat / (2.0 * lam) - delta);
}

/// (1/2lam) log det Omega - <A_s, Omega> - 1/2 ||Omega||_F^2.
inline double precision_subproblem_objective(const matrix_t& omega, const matrix_t& a_s, double lam)
{
    auto ld = detail::log_det_pd(omega);
    if (!ld) throw DomainError("precision matrix is not positive definite");
    return *ld / (2.0 * lam) - a_s.cwiseProduct(omega).sum() - 0.5 * omega.squaredNorm();
}

/**
 * log det Omega - <Sigma, Omega> - lam ||Omega - Delta||_F^2 - tau sum_j g(||group_j(Delta)||_2)
 */
inline double penalized_objective(const matrix_t& omega, const matrix_t& delta, const GgmProblem& p)
{
    auto ld = detail::log_det_pd(omega);
    if (!ld) throw DomainError("precision matrix is not positive definite");
    const GroupStructure groups(p);
    double value = *ld - p.sigma_hat.cwiseProduct(omega).sum() - p.lam * (omega - delta).squaredNorm();
    if (p.tau != 0.0) value -= p.tau * groups.penalty(delta, p.g);
    return value;
}

/// The unsplit l2,g objective log det Omega - <Sigma, Omega> - tau sum_j g(||group_j(Omega)||_2).
inline double ggm_objective(const matrix_t& omega, const GgmProblem& p)
{
    auto ld = detail::log_det_pd(omega);
    if (!ld) throw DomainError("precision matrix is not positive definite");
    const GroupStructure groups(p);
    double value = *ld - p.sigma_hat.cwiseProduct(omega).sum();
    if (p.tau != 0.0) value -= p.tau * groups.penalty(omega, p.g);
    return value;
}

/**
 * Closed-form maximizer of the precision subproblem. With A_s = Q diag(a) Q^T
 * the stationarity condition (1/2lam) Omega^{-1} - A_s - Omega = 0 decouples
 * per eigenvalue into w^2 + a w - 1/(2 lam) = 0.
 */
inline matrix_t update_precision_eig(const matrix_t& sigma_hat, const matrix_t& delta, double lam)
{
    if (!(lam > 0.0)) throw DomainError("lambda must be > 0");
    if (!delta.allFinite()) throw NumericalError("auxiliary matrix has non-finite entries");
    const matrix_t a_s = precision_linear_term(sigma_hat, delta, lam);
    Eigen::SelfAdjointEigenSolver<matrix_t> es(a_s);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of A_s failed");
    vector_t w = es.eigenvalues().unaryExpr([lam](double a) { return detail::precision_root(a, lam); });
    const matrix_t& q = es.eigenvectors();
    return detail::symmetrized(q * w.asDiagonal() * q.transpose());
}

struct GradientAscentOptions
{
    double eta = 1.0;
    std::size_t max_iter = 10000;
    double tol = 1e-9; ///< on ||gradient||_F
};

struct PrecisionUpdate
{
    matrix_t omega;
    bool converged = false;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
};

/**
 * Gradient ascent on the precision subproblem,
 *
 *   Omega <- Omega + eta ((1/2lam) Omega^{-1} - A_s - Omega),
 *
 * started from init (identity when absent). A step is halved until the
 * iterate stays symmetric PD (min eigenvalue > 1e-10) and the subproblem
 * objective increases by at least half the first-order prediction, or, once
 * that prediction is below roundoff, the gradient norm decreases.
 */
inline PrecisionUpdate update_precision(const matrix_t& sigma_hat, const matrix_t& delta, double lam,
                                        const GradientAscentOptions& opts = {},
                                        const std::optional<matrix_t>& init = std::nullopt)
{
    if (!(lam > 0.0)) throw DomainError("lambda must be > 0");
    if (!(opts.eta > 0.0)) throw DomainError("learning rate must be > 0");
    if (!delta.allFinite()) throw NumericalError("auxiliary matrix has non-finite entries");
    const index_t n = sigma_hat.rows();
    const matrix_t a_s = precision_linear_term(sigma_hat, delta, lam);

    PrecisionUpdate out;
    out.omega = init ? detail::symmetrized(*init) : matrix_t(matrix_t::Identity(n, n));
    auto obj = [&](const matrix_t& om) -> std::optional<double> {
        auto ld = detail::log_det_pd(om);
        if (!ld) return std::nullopt;
        return *ld / (2.0 * lam) - a_s.cwiseProduct(om).sum() - 0.5 * om.squaredNorm();
    };
    auto current = obj(out.omega);
    if (!current) throw DomainError("initial precision matrix is not positive definite");

    const matrix_t eye = matrix_t::Identity(n, n);
    auto gradient = [&](const matrix_t& om) {
        Eigen::LLT<matrix_t> llt(om);
        return matrix_t(detail::symmetrized(llt.solve(eye) / (2.0 * lam) - a_s - om));
    };
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
        const matrix_t grad = gradient(out.omega);
        out.grad_norm = grad.norm();
        if (!std::isfinite(out.grad_norm)) throw NumericalError("precision gradient is not finite");
        out.iterations = it;
        if (out.grad_norm <= opts.tol) {
            out.converged = true;
            return out;
        }

        const double gsq = out.grad_norm * out.grad_norm;
        const double slack = 1e-14 * std::max(1.0, std::abs(*current));
        double step = opts.eta;
        bool accepted = false;
        while (step > 1e-30) {
            matrix_t cand = detail::symmetrized(out.omega + step * grad);
            auto val = obj(cand);
            bool ok = val && detail::min_eigenvalue(cand) > 1e-10;
            if (ok && 0.5 * step * gsq > slack) {
                ok = *val >= *current + 0.5 * step * gsq;
            } else if (ok) {
                // Predicted gain is below roundoff: require a smaller gradient instead.
                ok = gradient(cand).norm() < out.grad_norm;
            }
            if (ok) {
                out.omega = std::move(cand);
                current = val;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        // No acceptable step: gradient is at roundoff level.
        if (!accepted) return out;
    }
    out.iterations = opts.max_iter;
    return out;
}

/**
 * Exact minimizer over Delta of 1/2 ||Omega - Delta||_F^2 + (tau / 2lam) sum_j g(||group_j(Delta)||_2).
 *
 * Entries outside every group are copied from Omega. Each group is shrunk
 * along its own direction to length T_g(||group||, tau / 2lam).
 */
inline matrix_t update_auxiliary(const matrix_t& omega, const GgmProblem& p, double prox_tol = 1e-12)
{
    matrix_t delta = omega;
    if (p.tau == 0.0) return delta;
    const GroupStructure groups(p);
    const double weight = p.tau / (2.0 * p.lam);
    for (index_t col = 0; col < groups.size(); ++col) {
        if (!groups.penalized(col)) continue;
        const double norm = groups.norm(omega, col);
        const double alpha = solve_threshold({norm, weight, p.g, prox_tol}).x_star;
        const double scale = norm > 0.0 ? alpha / norm : 0.0;
        for (auto j : groups.rows(col)) delta(j, col) = scale * omega(j, col);
    }
    return delta;
}

struct GgmSolverOptions
{
    std::size_t max_outer = 200;      ///< T, number of BCD sweeps
    double outer_tol = 1e-7;          ///< on ||Omega_{t+1} - Omega_t||_F
    PrecisionMethod precision_method = PrecisionMethod::EigenClosedForm;
    GradientAscentOptions gradient;   ///< used by PrecisionMethod::GradientAscent
    double prox_tol = 1e-12;
    double continuation = 1.0;        ///< lam <- continuation * lam after each sweep; 1 disables
    bool track_min_eigenvalue = true;
};

struct ObjectivePoint
{
    std::size_t iteration = 0;
    double objective = 0.0;
};

struct SolverReport
{
    matrix_t omega_star;
    matrix_t delta_star;
    std::vector<ObjectivePoint> objective_trace;  ///< after each full sweep; entry 0 is the start
    std::vector<double> half_step_trace;          ///< after each precision half-step
    std::vector<double> min_eigenvalues;          ///< of each Omega iterate
    bool converged = false;
    bool inner_converged = true;                  ///< every gradient-ascent solve hit its tolerance
    std::size_t iterations = 0;
    vector_t group_norms;                         ///< ||group_i(Omega*)||_2, 0 for unpenalized columns
};

/// Omega_0 = diag(Sigma)^{-1} with the diagonal floored at 1e-8.
inline matrix_t initial_precision(const matrix_t& sigma_hat)
{
    vector_t d = sigma_hat.diagonal().unaryExpr([](double v) { return 1.0 / std::max(v, 1e-8); });
    return d.asDiagonal();
}

/**
 * Block coordinate ascent on the penalty-split objective
 *
 *   log det Omega - <Sigma, Omega> - lam ||Omega - Delta||_F^2 - tau sum_j g(||group_j(Delta)||_2),
 *
 * alternating the precision update and the auxiliary update from
 * Omega_0 = Delta_0 = diag(Sigma)^{-1}. Both half-steps maximize over their
 * block, so the traced objective is nondecreasing while lam is held fixed.
 */
inline SolverReport solve_ggm(const GgmProblem& problem, const GgmSolverOptions& opts = {})
{
    problem.validate();
    if (!(opts.continuation >= 1.0)) throw DomainError("lambda continuation factor must be >= 1");

    GgmProblem p = problem;
    SolverReport rep;
    matrix_t omega = initial_precision(p.sigma_hat);
    matrix_t delta = omega;
    rep.objective_trace.push_back({0, penalized_objective(omega, delta, p)});

    for (std::size_t t = 1; t <= opts.max_outer; ++t) {
        matrix_t next;
        if (opts.precision_method == PrecisionMethod::EigenClosedForm) {
            next = update_precision_eig(p.sigma_hat, delta, p.lam);
        } else {
            auto up = update_precision(p.sigma_hat, delta, p.lam, opts.gradient, omega);
            rep.inner_converged = rep.inner_converged && up.converged;
            next = std::move(up.omega);
        }
        if (!next.allFinite()) throw NumericalError("precision iterate is not finite");
        if (opts.track_min_eigenvalue) rep.min_eigenvalues.push_back(detail::min_eigenvalue(next));
        rep.half_step_trace.push_back(penalized_objective(next, delta, p));

        delta = update_auxiliary(next, p, opts.prox_tol);
        rep.objective_trace.push_back({t, penalized_objective(next, delta, p)});

        const double change = (next - omega).norm();
        omega = std::move(next);
        rep.iterations = t;
        if (change <= opts.outer_tol) {
            rep.converged = true;
            break;
        }
        p.lam *= opts.continuation;
    }

    const GroupStructure groups(p);
    rep.group_norms = groups.norms(omega);
    rep.omega_star = std::move(omega);
    rep.delta_star = std::move(delta);
    return rep;
}

} // namespace ggmsel
