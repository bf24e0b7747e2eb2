#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>
#include <Eigen/Dense>
#include <ggmsel/errors.hpp>
#include <ggmsel/ggm_core.hpp>

namespace ggmsel {

struct LayerShape
{
    int layer_id = 0;
    index_t d1 = 0; ///< length of A_i (rows of W0)
    index_t d2 = 0; ///< length of B_i (columns of W0)
    index_t r = 0;  ///< principal components kept
};

/**
 * Flat node numbering. Each layer contributes its r principal pairs
 * (A_1, B_1) ... (A_r, B_r) followed by its bias, so n = sum (r + 1).
 * Component indices are 1-based, flat indices 0-based.
 */
class NodeLayout
{
public:
    NodeLayout() = default;

    explicit NodeLayout(std::vector<LayerShape> layers) : layers_(std::move(layers))
    {
        index_t offset = 0;
        for (const auto& l : layers_) {
            if (l.r < 1 || (l.d1 > 0 && l.d2 > 0 && l.r > std::min(l.d1, l.d2))) {
                throw InputError("layer " + std::to_string(l.layer_id)
                                 + ": need 1 <= r <= min(d1, d2)");
            }
            offsets_.push_back(offset);
            offset += l.r + 1;
        }
        size_ = offset;
    }

    index_t size() const { return size_; }
    const std::vector<LayerShape>& layers() const { return layers_; }

    index_t pair_index(std::size_t layer_pos, index_t component) const
    {
        const auto& l = layers_.at(layer_pos);
        if (component < 1 || component > l.r) throw InputError("component index out of range");
        return offsets_[layer_pos] + component - 1;
    }

    index_t bias_index(std::size_t layer_pos) const
    {
        return offsets_.at(layer_pos) + layers_[layer_pos].r;
    }

    /// "L{layer}:A{i}" for principal pairs, "L{layer}:b" for biases.
    std::string name(index_t flat) const
    {
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const auto& l = layers_[k];
            if (flat >= offsets_[k] && flat < offsets_[k] + l.r + 1) {
                const index_t local = flat - offsets_[k];
                const std::string prefix = "L" + std::to_string(l.layer_id) + ":";
                return local == l.r ? prefix + "b" : prefix + "A" + std::to_string(local + 1);
            }
        }
        throw InputError("node index out of range");
    }

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        out.reserve(static_cast<std::size_t>(size_));
        for (index_t i = 0; i < size_; ++i) out.push_back(name(i));
        return out;
    }

private:
    std::vector<LayerShape> layers_;
    std::vector<index_t> offsets_;
    index_t size_ = 0;
};

struct LayerDecomposition
{
    matrix_t a;               ///< d1 x r, column i is A_i = S_ii U_i
    matrix_t b;               ///< r x d2, row i is B_i = V_i^T
    vector_t singular_values; ///< all of them, nonincreasing
    matrix_t residual;        ///< W0 - sum_i A_i B_i
};

/**
 * Split W0 = U S V^T into its r leading principal pairs and a frozen
 * residual. Sign convention: the largest-magnitude entry of each U_i
 * (first one on ties) is made nonnegative.
 */
inline LayerDecomposition decompose_layer(const matrix_t& w0, index_t r)
{
    const index_t k = std::min(w0.rows(), w0.cols());
    if (r < 1 || r > k) throw InputError("decompose_layer: need 1 <= r <= min(d1, d2)");
    if (!w0.allFinite()) throw NumericalError("decompose_layer: weight matrix has non-finite entries");

    Eigen::BDCSVD<matrix_t> svd(w0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success) throw NumericalError("decompose_layer: SVD failed");
    matrix_t u = svd.matrixU().leftCols(r);
    matrix_t v = svd.matrixV().leftCols(r);
    const vector_t& s = svd.singularValues();

    for (index_t i = 0; i < r; ++i) {
        index_t arg = 0;
        u.col(i).cwiseAbs().maxCoeff(&arg);
        if (u(arg, i) < 0.0) {
            u.col(i) = -u.col(i);
            v.col(i) = -v.col(i);
        }
    }

    LayerDecomposition out;
    out.a = u * s.head(r).asDiagonal();
    out.b = v.transpose();
    out.singular_values = s;
    out.residual = w0 - out.a * out.b;
    return out;
}

/// |w o grad| elementwise.
inline matrix_t sensitivity(const matrix_t& w, const matrix_t& grad)
{
    if (w.rows() != grad.rows() || w.cols() != grad.cols()) {
        throw InputError("sensitivity: value and gradient shapes differ");
    }
    return w.cwiseProduct(grad).cwiseAbs();
}

/**
 * Smoothed sensitivity and uncertainty of one parameter tensor:
 *
 *   Ibar_k = b1 Ibar_{k-1} + (1 - b1) I_k
 *   Ubar_k = b2 Ubar_{k-1} + (1 - b2) |I_k - Ibar_k|
 *   s_k    = Ibar_k o Ubar_k
 *
 * Both averages start at zero.
 */
class ImportanceState
{
public:
    ImportanceState(index_t rows, index_t cols, double beta1, double beta2)
        : ibar_(matrix_t::Zero(rows, cols)), ubar_(matrix_t::Zero(rows, cols)), beta1_(beta1), beta2_(beta2)
    {
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw DomainError("EMA coefficients must lie in [0, 1)");
        }
    }

    /// Fold in the step-k sensitivity and return the step-k score.
    matrix_t update(const matrix_t& sens)
    {
        if (sens.rows() != ibar_.rows() || sens.cols() != ibar_.cols()) {
            throw InputError("importance update: sensitivity shape does not match state");
        }
        ibar_ = beta1_ * ibar_ + (1.0 - beta1_) * sens;
        ubar_ = beta2_ * ubar_ + (1.0 - beta2_) * (sens - ibar_).cwiseAbs();
        ++step_;
        return ibar_.cwiseProduct(ubar_);
    }

    const matrix_t& smoothed_sensitivity() const { return ibar_; }
    const matrix_t& smoothed_uncertainty() const { return ubar_; }
    std::size_t step() const { return step_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }

private:
    matrix_t ibar_;
    matrix_t ubar_;
    double beta1_;
    double beta2_;
    std::size_t step_ = 0;
};

/// v(A_i, B_i) = mean(score_A) / 2 + mean(score_B) / 2.
inline double node_value_pair(const vector_t& score_a, const vector_t& score_b)
{
    if (score_a.size() == 0 || score_b.size() == 0) throw InputError("node_value_pair: empty score vector");
    return 0.5 * score_a.mean() + 0.5 * score_b.mean();
}

/// v(b) = sum(score_b) / (2 d2). The one-half factor is intentional.
inline double node_value_bias(const vector_t& score_b)
{
    if (score_b.size() == 0) throw InputError("node_value_bias: empty score vector");
    return 0.5 * score_b.mean();
}

/// m x n node values, one row per training step.
struct SampleSet
{
    matrix_t values;
    std::vector<std::string> names; ///< column names, may be empty

    index_t steps() const { return values.rows(); }
    index_t nodes() const { return values.cols(); }

    void validate(bool require_nonnegative = true) const
    {
        if (!names.empty() && static_cast<index_t>(names.size()) != values.cols()) {
            throw InputError("sample names do not match column count");
        }
        if (!values.allFinite()) throw InputError("samples contain non-finite values");
        if (require_nonnegative && values.size() > 0 && values.minCoeff() < 0.0) {
            throw InputError("samples contain negative node values");
        }
    }
};

struct SampleStatistics
{
    vector_t mean;
    matrix_t cov;
};

/// Column means and the unbiased (1 / (m-1)) sample covariance, symmetrized.
inline SampleStatistics sample_statistics(const matrix_t& values)
{
    if (values.rows() < 2) throw InputError("sample statistics need at least 2 samples");
    if (!values.allFinite()) throw InputError("samples contain non-finite values");
    SampleStatistics st;
    st.mean = values.colwise().mean().transpose();
    const matrix_t centered = values.rowwise() - st.mean.transpose();
    st.cov = (centered.transpose() * centered) / static_cast<double>(values.rows() - 1);
    st.cov = 0.5 * (st.cov + st.cov.transpose());
    return st;
}

/// z-scores per column; constant columns are only centered.
inline matrix_t standardize(const matrix_t& values)
{
    const auto st = sample_statistics(values);
    matrix_t out = values.rowwise() - st.mean.transpose();
    for (index_t j = 0; j < out.cols(); ++j) {
        const double sd = std::sqrt(st.cov(j, j));
        if (sd > 0.0) out.col(j) /= sd;
    }
    return out;
}

/// Indices of the h largest entries, ties to the lower index, returned ascending.
inline index_set_t select_important(const vector_t& mean, index_t h)
{
    const index_t n = mean.size();
    if (h < 1 || h > n) throw InputError("important set size h must satisfy 1 <= h <= n");
    index_set_t order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), index_t{0});
    std::stable_sort(order.begin(), order.end(), [&](index_t a, index_t b) { return mean(a) > mean(b); });
    order.resize(static_cast<std::size_t>(h));
    std::sort(order.begin(), order.end());
    return order;
}

enum class TensorKind
{
    A,
    B,
    Bias,
};

/// One (value, gradient) dump of a reparameterized tensor at one training step.
struct ScoreRecord
{
    long step = 0;
    int layer_id = 0;
    TensorKind tensor = TensorKind::A;
    int index = 0; ///< 1-based component index; ignored for biases
    std::vector<double> values;
    std::vector<double> grads;
    std::string source; ///< "file:line" for diagnostics
};

/**
 * Replay dumped (value, gradient) pairs step by step through per-tensor
 * importance states and emit one row of node values per step. Every step
 * must carry every tensor of the layout.
 */
inline SampleSet replay_scores(const std::vector<ScoreRecord>& records, double beta1, double beta2,
                               NodeLayout* layout_out = nullptr)
{
    if (records.empty()) throw InputError("score dump is empty");

    using key_t = std::tuple<int, int, int>; // layer, tensor, index
    auto key_of = [](const ScoreRecord& r) {
        return key_t{r.layer_id, static_cast<int>(r.tensor), r.tensor == TensorKind::Bias ? 0 : r.index};
    };

    std::map<key_t, std::size_t> lengths;
    std::map<long, std::map<key_t, const ScoreRecord*>> by_step;
    for (const auto& rec : records) {
        if (rec.values.size() != rec.grads.size() || rec.values.empty()) {
            throw InputError(rec.source + ": values and grads must be nonempty and of equal length");
        }
        if (rec.tensor != TensorKind::Bias && rec.index < 1) {
            throw InputError(rec.source + ": component index must be >= 1");
        }
        const auto k = key_of(rec);
        auto [it, fresh] = lengths.emplace(k, rec.values.size());
        if (!fresh && it->second != rec.values.size()) {
            throw InputError(rec.source + ": tensor length changes between steps");
        }
        if (!by_step[rec.step].emplace(k, &rec).second) {
            throw InputError(rec.source + ": duplicate tensor within step " + std::to_string(rec.step));
        }
    }

    // Layout: per layer, components 1..r must each have A and B, plus a bias.
    std::map<int, int> max_component;
    for (const auto& [k, _] : lengths) {
        auto [layer, tensor, index] = k;
        auto& m = max_component[layer];
        if (tensor != static_cast<int>(TensorKind::Bias)) m = std::max(m, index);
    }
    std::vector<LayerShape> shapes;
    for (const auto& [layer, r] : max_component) {
        if (r < 1) throw InputError("layer " + std::to_string(layer) + " has no principal components");
        for (int i = 1; i <= r; ++i) {
            for (auto t : {TensorKind::A, TensorKind::B}) {
                if (!lengths.count({layer, static_cast<int>(t), i})) {
                    throw InputError("layer " + std::to_string(layer) + " is missing "
                                     + (t == TensorKind::A ? "A" : "B") + std::to_string(i));
                }
            }
        }
        if (!lengths.count({layer, static_cast<int>(TensorKind::Bias), 0})) {
            throw InputError("layer " + std::to_string(layer) + " is missing its bias");
        }
        const auto d1 = static_cast<index_t>(lengths.at({layer, static_cast<int>(TensorKind::A), 1}));
        const auto d2 = static_cast<index_t>(lengths.at({layer, static_cast<int>(TensorKind::B), 1}));
        shapes.push_back({layer, d1, d2, r});
    }
    NodeLayout layout(shapes);

    std::map<key_t, ImportanceState> states;
    for (const auto& [k, len] : lengths) {
        states.emplace(k, ImportanceState(static_cast<index_t>(len), 1, beta1, beta2));
    }

    SampleSet out;
    out.names = layout.names();
    out.values = matrix_t::Zero(static_cast<index_t>(by_step.size()), layout.size());
    index_t row = 0;
    for (const auto& [step, recs] : by_step) {
        if (recs.size() != lengths.size()) {
            throw InputError("step " + std::to_string(step) + " does not carry every tensor");
        }
        std::map<key_t, vector_t> scores;
        for (const auto& [k, rec] : recs) {
            const auto w = Eigen::Map<const vector_t>(rec->values.data(), static_cast<index_t>(rec->values.size()));
            const auto gr = Eigen::Map<const vector_t>(rec->grads.data(), static_cast<index_t>(rec->grads.size()));
            scores[k] = states.at(k).update(sensitivity(w, gr));
        }
        for (std::size_t lp = 0; lp < layout.layers().size(); ++lp) {
            const auto& l = layout.layers()[lp];
            for (int i = 1; i <= l.r; ++i) {
                out.values(row, layout.pair_index(lp, i)) =
                    node_value_pair(scores.at({l.layer_id, static_cast<int>(TensorKind::A), i}),
                                    scores.at({l.layer_id, static_cast<int>(TensorKind::B), i}));
            }
            out.values(row, layout.bias_index(lp)) =
                node_value_bias(scores.at({l.layer_id, static_cast<int>(TensorKind::Bias), 0}));
        }
        ++row;
    }
    if (layout_out) *layout_out = layout;
    return out;
}

} // namespace ggmsel
