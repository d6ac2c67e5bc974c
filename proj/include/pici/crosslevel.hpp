#pragma once

// Cross-level alignment: K-means pseudo-labels in the instance space are
// relabeled onto the cluster head's hard assignments via maximum matching, and
// the head is trained toward the relabeled one-hot targets.

#include "pici/core.hpp"
#include "pici/hungarian.hpp"
#include "pici/losses.hpp"
#include "pici/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace pici {

struct KMeansResult {
    Mat centroids;  // M x d
    Labels labels;
    double objective = 0.0;
    int iterations_run = 0;
    std::vector<double> objective_history;  // one entry per assignment step
};

namespace detail {

inline double sq_dist(const Mat& a, Eigen::Index i, const Mat& b, Eigen::Index j) {
    return (a.row(i) - b.row(j)).squaredNorm();
}

/// k-means++ seeding: first centroid uniform, then proportional to squared distance.
inline Mat kmeanspp_seed(const Mat& z, int m, Rng& rng) {
    const Eigen::Index n = z.rows();
    Mat c(m, z.cols());
    c.row(0) = z.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(z, i, c, 0);
    for (int k = 1; k < m; ++k) {
        const double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc > target && d2(i) > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        c.row(k) = z.row(pick);
        for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), sq_dist(z, i, c, k));
    }
    return c;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeding. Stops when labels repeat, when the
/// objective improves by less than `tol`, or after `max_iters` assignment steps.
/// Ties in the assignment go to the smallest centroid index. A centroid left
/// without members is moved onto the point farthest from its own centroid.
inline KMeansResult kmeans(const Mat& z, int m, std::uint64_t seed, int max_iters = 100, double tol = 1e-10) {
    const Eigen::Index n = z.rows();
    if (m < 1 || n < m) throw InputError("kmeans: requires N >= M >= 1");
    if (max_iters < 1) throw InputError("kmeans: max_iters must be >= 1");
    Rng rng(seed);
    KMeansResult res;
    Mat centroids = detail::kmeanspp_seed(z, m, rng);
    Labels labels(static_cast<std::size_t>(n), 0), prev;
    Eigen::VectorXd dist(n);

    for (int it = 0; it < max_iters; ++it) {
        double obj = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = detail::sq_dist(z, i, centroids, 0);
            for (int k = 1; k < m; ++k) {
                const double d = detail::sq_dist(z, i, centroids, k);
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            labels[static_cast<std::size_t>(i)] = best;
            dist(i) = best_d;
            obj += best_d;
        }
        res.objective_history.push_back(obj);
        res.centroids = centroids;
        res.labels = labels;
        res.objective = obj;
        res.iterations_run = it + 1;

        if (it > 0) {
            const double prev_obj = res.objective_history[res.objective_history.size() - 2];
            if (labels == prev || prev_obj - obj < tol) break;
        }
        if (it + 1 == max_iters) break;
        prev = labels;

        Mat sums = Mat::Zero(m, z.cols());
        std::vector<int> counts(static_cast<std::size_t>(m), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += z.row(i);
            ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        }
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        for (int k = 0; k < m; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0) {
                centroids.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
                continue;
            }
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i)
                if (!taken[static_cast<std::size_t>(i)] && (far < 0 || dist(i) > dist(far))) far = i;
            taken[static_cast<std::size_t>(far)] = 1;
            centroids.row(k) = z.row(far);
        }
    }
    return res;
}

/// Row-wise argmax; ties resolve to the smallest index.
inline Labels hard_labels(const Mat& c) {
    Labels out(static_cast<std::size_t>(c.rows()));
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < c.cols(); ++j)
            if (c(i, j) > c(i, best)) best = static_cast<int>(j);
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

/// Permutation matrix w over M clusters: w(m, s) = 1 pairs cluster-head label m
/// with pseudo-label s.
class Matching {
public:
    Matching() = default;
    explicit Matching(std::vector<int> cluster_of_pseudo) : cluster_of_pseudo_(std::move(cluster_of_pseudo)) {
        std::vector<char> seen(cluster_of_pseudo_.size(), 0);
        for (int m : cluster_of_pseudo_) {
            if (m < 0 || m >= size() || seen[static_cast<std::size_t>(m)]) throw InputError("matching is not a permutation");
            seen[static_cast<std::size_t>(m)] = 1;
        }
    }

    static Matching identity(int m) {
        std::vector<int> v(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) v[static_cast<std::size_t>(i)] = i;
        return Matching(std::move(v));
    }

    int size() const noexcept { return static_cast<int>(cluster_of_pseudo_.size()); }
    int cluster_of(int pseudo) const { return cluster_of_pseudo_.at(static_cast<std::size_t>(pseudo)); }
    int w(int m, int s) const { return cluster_of(s) == m ? 1 : 0; }

    Eigen::MatrixXi matrix() const {
        Eigen::MatrixXi out = Eigen::MatrixXi::Zero(size(), size());
        for (int s = 0; s < size(); ++s) out(cluster_of(s), s) = 1;
        return out;
    }

    friend bool operator==(const Matching&, const Matching&) = default;

private:
    std::vector<int> cluster_of_pseudo_;
};

/// overlap(m, s) = |{i : q_i = m and p_i = s}|.
inline std::vector<std::vector<long long>> label_overlap(const Labels& p, const Labels& q, int m) {
    if (p.size() != q.size()) throw InputError("label vectors differ in length");
    std::vector<std::vector<long long>> o(static_cast<std::size_t>(m), std::vector<long long>(static_cast<std::size_t>(m), 0));
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0 || p[i] >= m || q[i] < 0 || q[i] >= m) throw InputError("label outside [0, M)");
        ++o[static_cast<std::size_t>(q[i])][static_cast<std::size_t>(p[i])];
    }
    return o;
}

/// Permutation maximizing the total overlap between cluster-head labels q and pseudo-labels p.
inline Matching match_clusters(const Labels& p, const Labels& q, int m) {
    const auto overlap = label_overlap(p, q, m);
    const std::vector<int> col_of_row = hungarian_max(overlap);  // cluster m -> pseudo s
    std::vector<int> cluster_of_pseudo(static_cast<std::size_t>(m));
    for (int row = 0; row < m; ++row) cluster_of_pseudo[static_cast<std::size_t>(col_of_row[static_cast<std::size_t>(row)])] = row;
    return Matching(std::move(cluster_of_pseudo));
}

inline long long matching_overlap(const Labels& p, const Labels& q, const Matching& w) {
    const auto overlap = label_overlap(p, q, w.size());
    long long total = 0;
    for (int s = 0; s < w.size(); ++s) total += overlap[static_cast<std::size_t>(w.cluster_of(s))][static_cast<std::size_t>(s)];
    return total;
}

/// One-hot targets: row i is hot at the cluster matched to pseudo-label p_i.
inline Mat modify_pseudo(const Labels& p, const Matching& w) {
    Mat out = Mat::Zero(static_cast<Eigen::Index>(p.size()), w.size());
    for (std::size_t i = 0; i < p.size(); ++i) out(static_cast<Eigen::Index>(i), w.cluster_of(p[i])) = 1.0;
    return out;
}

/// Cross-entropy between one-hot targets and cluster probabilities, averaged over
/// samples and over the two views.
inline PairLoss cli_loss_grad(const Mat& p_a, const Mat& c_a, const Mat& p_b, const Mat& c_b) {
    if (p_a.rows() != c_a.rows() || p_a.cols() != c_a.cols() || p_b.rows() != c_b.rows() || p_b.cols() != c_b.cols() ||
        c_a.rows() < 1 || c_b.rows() < 1)
        throw InputError("cli_loss: target and probability shapes differ");
    PairLoss out;
    auto one_view = [&out](const Mat& t, const Mat& c, Mat& d) {
        const double scale = 0.5 / static_cast<double>(c.rows());
        d = Mat::Zero(c.rows(), c.cols());
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index j = 0; j < c.cols(); ++j) {
                if (t(i, j) == 0.0) continue;
                const double cij = c(i, j);
                out.value -= scale * t(i, j) * std::log(std::max(cij, log_floor));
                if (cij >= log_floor) d(i, j) = -scale * t(i, j) / cij;
            }
    };
    one_view(p_a, c_a, out.d_a);
    one_view(p_b, c_b, out.d_b);
    return out;
}

inline double cli_loss(const Mat& p_a, const Mat& c_a, const Mat& p_b, const Mat& c_b) {
    return cli_loss_grad(p_a, c_a, p_b, c_b).value;
}

}  // namespace pici
