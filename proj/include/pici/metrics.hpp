#pragma once

#include "pici/core.hpp"
#include "pici/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace pici {

/// Counts of (true class, predicted cluster) co-occurrences. Label values are
/// compacted to 0..K-1 in increasing order.
struct Contingency {
    std::vector<std::vector<long long>> table;  // K_true x K_pred
    std::vector<long long> row_sums;
    std::vector<long long> col_sums;
    long long total = 0;

    std::size_t k_true() const noexcept { return row_sums.size(); }
    std::size_t k_pred() const noexcept { return col_sums.size(); }

    static Contingency build(const Labels& truth, const Labels& pred) {
        if (truth.size() != pred.size()) throw InputError("label vectors differ in length");
        auto compact = [](const Labels& l) {
            std::map<int, int> ids;
            for (int v : l) ids.emplace(v, 0);
            int next = 0;
            for (auto& [value, id] : ids) id = next++;
            return ids;
        };
        const auto tid = compact(truth), pid = compact(pred);
        Contingency c;
        c.table.assign(tid.size(), std::vector<long long>(pid.size(), 0));
        c.row_sums.assign(tid.size(), 0);
        c.col_sums.assign(pid.size(), 0);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const auto r = static_cast<std::size_t>(tid.at(truth[i]));
            const auto k = static_cast<std::size_t>(pid.at(pred[i]));
            ++c.table[r][k];
            ++c.row_sums[r];
            ++c.col_sums[k];
        }
        c.total = static_cast<long long>(truth.size());
        return c;
    }
};

enum class NmiNorm { sqrt, arithmetic };

namespace detail {

inline double entropy_of_counts(const std::vector<long long>& counts, double n) {
    double h = 0.0;
    for (long long c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
    return h;
}

inline double choose2(long long n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace detail

/// Normalized mutual information (natural log). Two single-cluster partitions
/// score 1; a single-cluster partition against anything else scores 0.
inline double nmi(const Labels& truth, const Labels& pred, NmiNorm norm = NmiNorm::sqrt) {
    if (truth.empty()) throw InputError("nmi: empty label vectors");
    const Contingency c = Contingency::build(truth, pred);
    const double n = static_cast<double>(c.total);
    const double ht = detail::entropy_of_counts(c.row_sums, n);
    const double hp = detail::entropy_of_counts(c.col_sums, n);
    if (c.k_true() == 1 && c.k_pred() == 1) return 1.0;
    if (c.k_true() == 1 || c.k_pred() == 1) return 0.0;

    double mi = 0.0;
    for (std::size_t i = 0; i < c.k_true(); ++i)
        for (std::size_t j = 0; j < c.k_pred(); ++j) {
            const long long nij = c.table[i][j];
            if (nij == 0) continue;
            mi += static_cast<double>(nij) / n *
                  std::log(n * static_cast<double>(nij) /
                           (static_cast<double>(c.row_sums[i]) * static_cast<double>(c.col_sums[j])));
        }
    const double denom = norm == NmiNorm::sqrt ? std::sqrt(ht * hp) : 0.5 * (ht + hp);
    return std::clamp(mi / denom, 0.0, 1.0);
}

/// Best cluster-to-class matching accuracy (Hungarian on the zero-padded square table).
inline double accuracy(const Labels& truth, const Labels& pred) {
    if (truth.empty()) throw InputError("accuracy: empty label vectors");
    const Contingency c = Contingency::build(truth, pred);
    const std::size_t k = std::max(c.k_true(), c.k_pred());
    std::vector<std::vector<long long>> w(k, std::vector<long long>(k, 0));
    for (std::size_t i = 0; i < c.k_true(); ++i)
        for (std::size_t j = 0; j < c.k_pred(); ++j) w[j][i] = c.table[i][j];
    const std::vector<int> cls = hungarian_max(w);  // cluster j -> class
    long long matched = 0;
    for (std::size_t j = 0; j < k; ++j) matched += w[j][static_cast<std::size_t>(cls[j])];
    return static_cast<double>(matched) / static_cast<double>(c.total);
}

/// Adjusted Rand index from pair counts. Identical degenerate partitions score 1.
inline double ari(const Labels& truth, const Labels& pred) {
    if (truth.size() != pred.size()) throw InputError("label vectors differ in length");
    if (truth.size() < 2) throw InputError("ari: needs at least two samples");
    const Contingency c = Contingency::build(truth, pred);
    double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
    for (const auto& row : c.table)
        for (long long nij : row) index += detail::choose2(nij);
    for (long long a : c.row_sums) sum_rows += detail::choose2(a);
    for (long long b : c.col_sums) sum_cols += detail::choose2(b);
    const double expected = sum_rows * sum_cols / detail::choose2(c.total);
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

struct ClusterScores {
    double nmi = 0.0;
    double acc = 0.0;
    double ari = 0.0;
};

inline ClusterScores score_clustering(const Labels& truth, const Labels& pred, NmiNorm norm = NmiNorm::sqrt) {
    ClusterScores s;
    s.nmi = nmi(truth, pred, norm);
    s.acc = accuracy(truth, pred);
    s.ari = truth.size() >= 2 ? ari(truth, pred) : 1.0;
    return s;
}

}  // namespace pici
