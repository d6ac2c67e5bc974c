#pragma once

#include "pici/core.hpp"
#include "pici/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pici {

struct Temperatures {
    double tau_i = 0.5;
    double tau_c = 1.0;

    void validate() const {
        if (!(tau_i > 0.0) || !(tau_c > 0.0)) throw InvalidTemperature("temperatures must be strictly positive");
    }
};

/// Per-batch loss values as logged by the trainer.
struct LossBreakdown {
    double l_pisd = 0.0;
    double l_ins = 0.0;
    double l_clu = 0.0;
    double l_entropy = 0.0;
    double l_picd = 0.0;
    double l_cli = 0.0;
};

/// Floor applied inside every logarithm of a probability.
inline constexpr double log_floor = 1e-12;

template <typename U, typename V>
double cosine_sim(const Eigen::MatrixBase<U>& u, const Eigen::MatrixBase<V>& v) {
    const double nu = u.norm(), nv = v.norm();
    if (!(nu > 0.0) || !(nv > 0.0)) throw ZeroNormError("cosine similarity of a zero vector");
    return u.dot(v) / (nu * nv);
}

/// Value of a contrastive objective and its gradient with respect to both inputs.
struct PairLoss {
    double value = 0.0;
    Mat d_a;
    Mat d_b;
};

namespace detail {

/// Symmetric InfoNCE over the rows of two views. Row i of `a` and row i of `b` form
/// the positive pair; every row of both views is a candidate in the denominator,
/// except the anchor itself unless include_self is set. Averaged over all 2K anchors.
inline PairLoss nce_rows(const Mat& a, const Mat& b, double tau, bool include_self) {
    const Eigen::Index k = a.rows();
    const Eigen::Index n = 2 * k;
    Mat u(n, a.cols());
    u.topRows(k) = a;
    u.bottomRows(k) = b;
    Eigen::VectorXd norms = u.rowwise().norm();
    for (Eigen::Index r = 0; r < n; ++r)
        if (!(norms(r) > 0.0)) throw ZeroNormError("contrastive loss: zero-norm representation");
    const Mat unit = u.array().colwise() / norms.array();
    const Mat sim = (unit * unit.transpose()) / tau;

    Mat g = Mat::Zero(n, n);
    double total = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Eigen::Index pos = (r + k) % n;
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < n; ++c)
            if (c != r || include_self) m = std::max(m, sim(r, c));
        double denom = 0.0;
        for (Eigen::Index c = 0; c < n; ++c)
            if (c != r || include_self) denom += std::exp(sim(r, c) - m);
        total += m + std::log(denom) - sim(r, pos);
        for (Eigen::Index c = 0; c < n; ++c)
            if (c != r || include_self) g(r, c) = std::exp(sim(r, c) - m) / denom;
        g(r, pos) -= 1.0;
    }
    const double inv = 1.0 / static_cast<double>(n);
    g *= inv;

    const Mat dunit = ((g + g.transpose()) * unit) / tau;
    Mat du(n, a.cols());
    for (Eigen::Index r = 0; r < n; ++r)
        du.row(r) = (dunit.row(r) - unit.row(r) * unit.row(r).dot(dunit.row(r))) / norms(r);

    return {total * inv, du.topRows(k), du.bottomRows(k)};
}

inline void require_non_negative(const Mat& c) {
    if (!c.allFinite() || (c.array() < 0.0).any()) throw InvalidProbability("cluster probabilities must be finite and >= 0");
}

}  // namespace detail

/// Instance-level contrastive loss over two (N x d) views; the dot products of
/// unit rows are cosine similarities.
inline PairLoss instance_loss_grad(const Mat& z_a, const Mat& z_b, double tau_i, bool include_self = false) {
    if (!(tau_i > 0.0)) throw InvalidTemperature("instance temperature must be > 0");
    if (z_a.rows() < 1 || z_a.rows() != z_b.rows() || z_a.cols() != z_b.cols())
        throw InputError("instance_loss: views must share a non-empty (N, d) shape");
    return detail::nce_rows(z_a, z_b, tau_i, include_self);
}

inline double instance_loss(const Mat& z_a, const Mat& z_b, double tau_i, bool include_self = false) {
    return instance_loss_grad(z_a, z_b, tau_i, include_self).value;
}

/// Entropy of the batch-mean cluster assignment of each view, summed over views.
inline PairLoss cluster_entropy_grad(const Mat& c_a, const Mat& c_b) {
    detail::require_non_negative(c_a);
    detail::require_non_negative(c_b);
    PairLoss out;
    auto one_view = [&out](const Mat& c, Mat& d) {
        const double n = static_cast<double>(c.rows());
        const RowVec p = c.colwise().sum() / n;
        d.resize(c.rows(), c.cols());
        for (Eigen::Index i = 0; i < c.cols(); ++i) {
            const double pi = p(i);
            const double lp = std::log(std::max(pi, log_floor));
            out.value -= pi * lp;
            const double dp = pi >= log_floor ? -(lp + 1.0) : -lp;
            d.col(i).setConstant(dp / n);
        }
    };
    one_view(c_a, out.d_a);
    one_view(c_b, out.d_b);
    return out;
}

inline double cluster_entropy(const Mat& c_a, const Mat& c_b) { return cluster_entropy_grad(c_a, c_b).value; }

struct ClusterLoss {
    double value = 0.0;        // contrastive - entropy
    double contrastive = 0.0;  // mean of per-cluster InfoNCE terms
    double entropy = 0.0;
    Mat d_a;
    Mat d_b;
};

/// Cluster-level contrastive loss: columns of the (N x M) probability matrices are
/// the cluster representations; the assignment entropy is subtracted. `column_eps`
/// is added to every entry before the contrastive term (0 disables).
inline ClusterLoss cluster_loss_grad(const Mat& c_a, const Mat& c_b, double tau_c, bool include_self = false,
                                     double column_eps = 0.0) {
    if (!(tau_c > 0.0)) throw InvalidTemperature("cluster temperature must be > 0");
    if (c_a.rows() < 1 || c_a.rows() != c_b.rows() || c_a.cols() != c_b.cols())
        throw InputError("cluster_loss: views must share a non-empty (N, M) shape");
    if (c_a.cols() < 2) throw InputError("cluster_loss: needs at least two clusters");
    const PairLoss ent = cluster_entropy_grad(c_a, c_b);

    PairLoss nce;
    try {
        Mat ta = c_a.transpose();
        Mat tb = c_b.transpose();
        if (column_eps != 0.0) {
            ta.array() += column_eps;
            tb.array() += column_eps;
        }
        nce = detail::nce_rows(ta, tb, tau_c, include_self);
    } catch (const ZeroNormError&) {
        throw EmptyClusterError("cluster_loss: a cluster column has zero mass in this batch");
    }
    ClusterLoss out;
    out.contrastive = nce.value;
    out.entropy = ent.value;
    out.value = nce.value - ent.value;
    out.d_a = nce.d_a.transpose() - ent.d_a;
    out.d_b = nce.d_b.transpose() - ent.d_b;
    return out;
}

inline double cluster_loss(const Mat& c_a, const Mat& c_b, double tau_c, bool include_self = false) {
    return cluster_loss_grad(c_a, c_b, tau_c, include_self).value;
}

struct ReconstructionLoss {
    double value = 0.0;
    bool empty_mask = false;  // nothing masked: value is 0 and the gradient vanishes
    Mat d_pred;
};

/// Pixel MSE over masked patches (or every patch when all_patches is set).
inline ReconstructionLoss reconstruction_loss_grad(const PatchSequence& pred, const PatchSequence& target,
                                                   const MaskPlan& plan, bool all_patches = false) {
    if (pred.patches.rows() != target.patches.rows() || pred.patches.cols() != target.patches.cols() ||
        pred.grid_rows != target.grid_rows || pred.grid_cols != target.grid_cols)
        throw PatchGridError("reconstruction_loss: prediction and target grids differ");
    if (plan.n_patches() != pred.n_patches()) throw PatchGridError("reconstruction_loss: mask plan does not match grid");

    ReconstructionLoss out;
    out.d_pred = Mat::Zero(pred.patches.rows(), pred.patches.cols());
    std::vector<int> all;
    const std::vector<int>* rows = &plan.masked_idx;
    if (all_patches) {
        all.resize(static_cast<std::size_t>(pred.n_patches()));
        for (int i = 0; i < pred.n_patches(); ++i) all[static_cast<std::size_t>(i)] = i;
        rows = &all;
    }
    if (rows->empty()) {
        out.empty_mask = true;
        return out;
    }
    const double count = static_cast<double>(rows->size()) * static_cast<double>(pred.patches.cols());
    for (int k : *rows) {
        const RowVec diff = pred.patches.row(k) - target.patches.row(k);
        out.value += diff.squaredNorm();
        out.d_pred.row(k) = diff * (2.0 / count);
    }
    out.value /= count;
    return out;
}

inline double reconstruction_loss(const PatchSequence& pred, const PatchSequence& target, const MaskPlan& plan,
                                  bool all_patches = false) {
    return reconstruction_loss_grad(pred, target, plan, all_patches).value;
}

/// Mean of the two views' reconstruction errors.
inline double pisd_loss(double recon_a, double recon_b) {
    return 0.5 * (recon_a + recon_b);
}

}  // namespace pici
