#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Dense>
#include <ggmsel/errors.hpp>
#include <ggmsel/ggm_core.hpp>
#include <ggmsel/io.hpp>
#include <ggmsel/node_model.hpp>
#include <ggmsel/random.hpp>

namespace ggmsel {

/// Exactly one of budget / threshold must be set.
struct SelectionCriterion
{
    std::optional<std::size_t> budget;
    std::optional<double> threshold;
    bool full_column_norm = false; ///< rank by ||Omega*_i||_2 instead of the group norm
};

struct SelectionResult
{
    index_set_t important_set;
    index_set_t solver_selected;
    index_set_t frozen;
    vector_t scores;

    index_set_t trainable() const
    {
        index_set_t t = important_set;
        t.insert(t.end(), solver_selected.begin(), solver_selected.end());
        std::sort(t.begin(), t.end());
        return t;
    }
};

/**
 * Keep the important set trainable, add the non-important nodes with the
 * largest scores (budget mode, ties to the lower index) or with scores above
 * a threshold, and freeze the rest.
 */
inline SelectionResult select_trainable(const SolverReport& report, const index_set_t& important,
                                        const SelectionCriterion& crit)
{
    if (crit.budget.has_value() == crit.threshold.has_value()) {
        throw InputError("selection needs exactly one of budget or threshold");
    }
    const index_t n = report.omega_star.rows();
    std::vector<bool> is_important(static_cast<std::size_t>(n), false);
    for (auto i : important) {
        if (i < 0 || i >= n) throw InputError("important index out of range");
        is_important[static_cast<std::size_t>(i)] = true;
    }

    SelectionResult out;
    out.important_set = important;
    std::sort(out.important_set.begin(), out.important_set.end());
    out.scores = crit.full_column_norm ? vector_t(report.omega_star.colwise().norm().transpose())
                                       : report.group_norms;
    if (out.scores.size() != n) throw InputError("report group norms do not match omega");

    index_set_t candidates;
    for (index_t i = 0; i < n; ++i) {
        if (!is_important[static_cast<std::size_t>(i)]) candidates.push_back(i);
    }

    if (crit.budget) {
        if (*crit.budget > candidates.size()) throw InputError("selection budget exceeds n - h");
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](index_t a, index_t b) { return out.scores(a) > out.scores(b); });
        out.solver_selected.assign(candidates.begin(), candidates.begin() + static_cast<long>(*crit.budget));
    } else {
        if (!(*crit.threshold >= 0.0)) throw InputError("selection threshold must be >= 0");
        for (auto i : candidates) {
            if (out.scores(i) > *crit.threshold) out.solver_selected.push_back(i);
        }
    }
    std::sort(out.solver_selected.begin(), out.solver_selected.end());

    std::vector<bool> trainable = is_important;
    for (auto i : out.solver_selected) trainable[static_cast<std::size_t>(i)] = true;
    for (index_t i = 0; i < n; ++i) {
        if (!trainable[static_cast<std::size_t>(i)]) out.frozen.push_back(i);
    }
    return out;
}

/// F1 of a selected index set against a ground-truth set.
inline double recovery_f1(const index_set_t& selected, const index_set_t& truth)
{
    if (selected.empty() && truth.empty()) return 1.0;
    std::size_t hits = 0;
    for (auto i : selected) hits += static_cast<std::size_t>(std::count(truth.begin(), truth.end(), i));
    if (hits == 0) return 0.0;
    const double precision = static_cast<double>(hits) / static_cast<double>(selected.size());
    const double recall = static_cast<double>(hits) / static_cast<double>(truth.size());
    return 2.0 * precision * recall / (precision + recall);
}

struct PlantedSpec
{
    index_t n = 30;
    index_t h = 3;
    index_t k_connected = 4;
    double coupling = 0.5;
    index_t m = 4000;
    std::uint64_t seed = 7;
    double max_diag_boost = 10.0; ///< PD repair gives up beyond this diagonal shift
};

struct PlantedProblem
{
    matrix_t omega_true;
    index_set_t important_set;
    index_set_t true_connected;
    std::uint64_t seed = 0;
    index_t m = 0;
};

/**
 * Synthetic GGM with known support. A seeded permutation picks the h
 * important nodes and k_connected coupled nodes; every important/coupled
 * pair gets +-coupling in Omega_true, and the diagonal is shifted until the
 * minimum eigenvalue is >= 0.1. Samples are N(0, Omega_true^{-1}) plus a
 * per-column constant shift that makes every value nonnegative and puts the
 * important nodes on top of the sample mean. The shift leaves the
 * covariance unchanged.
 */
inline std::pair<PlantedProblem, SampleSet> make_planted(const PlantedSpec& spec)
{
    if (spec.n < 1 || spec.h < 1 || spec.k_connected < 0 || spec.h + spec.k_connected > spec.n) {
        throw InputError("planted problem needs 1 <= h and h + k_connected <= n");
    }
    if (spec.m < 1) throw InputError("planted problem needs m >= 1");
    if (!(spec.coupling >= 0.0) || !std::isfinite(spec.coupling)) {
        throw InputError("planted coupling must be finite and >= 0");
    }

    Rng rng(spec.seed);
    std::vector<index_t> perm(static_cast<std::size_t>(spec.n));
    std::iota(perm.begin(), perm.end(), index_t{0});
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.below(i + 1)]);
    }

    PlantedProblem prob;
    prob.seed = spec.seed;
    prob.m = spec.m;
    prob.important_set.assign(perm.begin(), perm.begin() + spec.h);
    prob.true_connected.assign(perm.begin() + spec.h, perm.begin() + spec.h + spec.k_connected);
    std::sort(prob.important_set.begin(), prob.important_set.end());
    std::sort(prob.true_connected.begin(), prob.true_connected.end());

    prob.omega_true = matrix_t::Identity(spec.n, spec.n);
    if (spec.coupling > 0.0) {
        for (auto i : prob.important_set) {
            for (auto j : prob.true_connected) {
                const double v = (rng.next() & 1U) ? spec.coupling : -spec.coupling;
                prob.omega_true(i, j) = v;
                prob.omega_true(j, i) = v;
            }
        }
    }
    const double min_eig = detail::min_eigenvalue(prob.omega_true);
    if (min_eig < 0.1) {
        const double boost = 0.1 - min_eig;
        if (boost > spec.max_diag_boost) throw DomainError("planted precision not PD");
        prob.omega_true.diagonal().array() += boost;
    }

    const matrix_t eye = matrix_t::Identity(spec.n, spec.n);
    Eigen::LLT<matrix_t> prec(prob.omega_true);
    if (prec.info() != Eigen::Success) throw DomainError("planted precision not PD");
    const matrix_t cov_true = prec.solve(eye);
    Eigen::LLT<matrix_t> chol(cov_true);
    if (chol.info() != Eigen::Success) throw NumericalError("planted covariance Cholesky failed");
    const matrix_t lower = chol.matrixL();

    matrix_t z(spec.m, spec.n);
    for (index_t i = 0; i < spec.m; ++i) {
        for (index_t j = 0; j < spec.n; ++j) z(i, j) = rng.normal();
    }
    SampleSet samples;
    samples.values = z * lower.transpose();

    const double max_sd = cov_true.diagonal().cwiseSqrt().maxCoeff();
    const double base = std::max(0.0, -samples.values.minCoeff()) + 1.0;
    const double gap = 6.0 * max_sd + 1.0;
    vector_t shift = vector_t::Constant(spec.n, base);
    for (auto i : prob.important_set) shift(i) += gap;
    samples.values.rowwise() += shift.transpose();
    samples.names = io::default_node_names(spec.n);
    return {std::move(prob), std::move(samples)};
}

struct PipelineConfig
{
    enum class Source
    {
        Planted,
        Dump,
    };

    Source source = Source::Planted;
    PlantedSpec planted;
    std::string samples_csv;  ///< dump mode: SampleSet CSV
    std::string dump_dir;     ///< dump mode: raw score dump directory
    double beta1 = 0.85;
    double beta2 = 0.85;
    bool standardize = false;

    index_t h = 3;
    double tau = 0.1;
    double lam = 1.0;
    SurrogateSpec surrogate = SurrogateSpec::geman(0.5);
    PenaltyMode mode = PenaltyMode::ImportantRows;
    GgmSolverOptions solver;
    SelectionCriterion selection{std::size_t{4}, std::nullopt, false};
};

struct PipelineResult
{
    std::optional<PlantedProblem> planted;
    SampleSet samples;
    SampleStatistics stats;
    GgmProblem problem;
    SolverReport report;
    SelectionResult selection;
};

namespace detail {

/// Runs fn and prefixes any library error with the pipeline stage name.
template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const IterationLimitError& e) {
        throw IterationLimitError(stage + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(stage + ": " + e.what());
    } catch (const DomainError& e) {
        throw DomainError(stage + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(stage + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(stage + ": " + e.what());
    }
}

} // namespace detail

/**
 * Sample statistics -> important set from the sample mean -> GGM solve ->
 * trainable-node selection.
 */
inline PipelineResult run_pipeline(const PipelineConfig& cfg)
{
    PipelineResult out;
    detail::in_stage("samples", [&] {
        if (cfg.source == PipelineConfig::Source::Planted) {
            auto [prob, samples] = make_planted(cfg.planted);
            out.planted = std::move(prob);
            out.samples = std::move(samples);
        } else if (!cfg.samples_csv.empty()) {
            out.samples = io::read_samples_csv(cfg.samples_csv);
        } else if (!cfg.dump_dir.empty()) {
            out.samples = replay_scores(io::read_dump_dir(cfg.dump_dir), cfg.beta1, cfg.beta2);
        } else {
            throw InputError("dump mode needs 'samples' or 'dump_dir'");
        }
        out.samples.validate(true);
    });

    detail::in_stage("statistics", [&] {
        out.stats = sample_statistics(out.samples.values);
        if (cfg.standardize) {
            // Important set still comes from the raw means.
            out.stats.cov = sample_statistics(standardize(out.samples.values)).cov;
        }
    });

    detail::in_stage("important set", [&] {
        out.problem.important_set = select_important(out.stats.mean, cfg.h);
    });

    detail::in_stage("solve", [&] {
        out.problem.sigma_hat = out.stats.cov;
        out.problem.tau = cfg.tau;
        out.problem.lam = cfg.lam;
        out.problem.g = cfg.surrogate;
        out.problem.mode = cfg.mode;
        out.report = solve_ggm(out.problem, cfg.solver);
    });

    detail::in_stage("selection", [&] {
        out.selection = select_trainable(out.report, out.problem.important_set, cfg.selection);
    });
    return out;
}

} // namespace ggmsel
