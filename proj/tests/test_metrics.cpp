#include "oracles.hpp"

#include "pici/metrics.hpp"

#include <gtest/gtest.h>

using namespace pici;

namespace {

Labels relabel(const Labels& l, const std::vector<int>& sigma) {
    Labels out(l.size());
    for (std::size_t i = 0; i < l.size(); ++i) out[i] = sigma[static_cast<std::size_t>(l[i])];
    return out;
}

}  // namespace

TEST(Contingency, MarginalsConsistent) {
    const Contingency c = Contingency::build({0, 0, 1, 5, 5}, {3, 3, 3, 1, 2});
    EXPECT_EQ(c.k_true(), 3u);
    EXPECT_EQ(c.k_pred(), 3u);
    EXPECT_EQ(c.total, 5);
    long long sum = 0;
    for (std::size_t i = 0; i < c.k_true(); ++i) {
        long long row = 0;
        for (long long v : c.table[i]) row += v;
        EXPECT_EQ(row, c.row_sums[i]);
        sum += row;
    }
    EXPECT_EQ(sum, 5);
}

TEST(Nmi, Examples) {
    const Labels t{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(nmi(t, t), 1.0);
    EXPECT_EQ(nmi(t, {0, 0, 0, 0}), 0.0);
    EXPECT_EQ(nmi({2, 2}, {7, 7}), 1.0);
    const Labels p{0, 1, 1, 1};
    EXPECT_NEAR(nmi(t, p), oracle::nmi(t, p), 1e-12);
    const double h_t = std::log(2.0);
    const double h_p = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
    const double mi = 0.25 * std::log(0.25 / (0.5 * 0.25)) + 0.25 * std::log(0.25 / (0.5 * 0.75)) +
                      0.5 * std::log(0.5 / (0.5 * 0.75));
    EXPECT_NEAR(nmi(t, p), mi / std::sqrt(h_t * h_p), 1e-12);
    EXPECT_NEAR(nmi(t, p, NmiNorm::arithmetic), mi / (0.5 * (h_t + h_p)), 1e-12);
}

TEST(Nmi, LengthMismatch) {
    EXPECT_THROW(nmi({0, 1}, {0}), InputError);
    EXPECT_THROW(accuracy({0, 1}, {0}), InputError);
    EXPECT_THROW(ari({0, 1}, {0}), InputError);
}

TEST(Accuracy, Examples) {
    EXPECT_DOUBLE_EQ(accuracy({0, 0, 1, 1, 2}, {2, 2, 0, 0, 1}), 1.0);
    EXPECT_DOUBLE_EQ(accuracy({0, 0, 1, 1}, {0, 1, 0, 1}), 0.5);
    EXPECT_DOUBLE_EQ(accuracy({3}, {9}), 1.0);
}

TEST(Accuracy, LowerBoundForSurjectivePredictions) {
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const Labels truth = oracle::random_labels(rng, 30, 4);
        Labels pred = oracle::random_labels(rng, 30, 3);
        pred[0] = 0, pred[1] = 1, pred[2] = 2;
        const Contingency c = Contingency::build(truth, pred);
        EXPECT_GE(accuracy(truth, pred), 1.0 / static_cast<double>(std::max(c.k_true(), c.k_pred())));
    }
}

TEST(Ari, Examples) {
    const Labels t{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(ari(t, t), 1.0);
    EXPECT_NEAR(ari({0, 0, 1, 1, 2, 2}, {0, 0, 0, 0, 0, 0}), 0.0, 1e-15);
    const Labels p{0, 1, 1, 1};
    // pairs: (01) t-same p-diff, (23) both same, (12) (13) p-same t-diff, others differ in both
    const double a = 1, b = 1, c = 2, pairs = 6;
    const double expected = (a + b) * (a + c) / pairs;
    EXPECT_NEAR(ari(t, p), (a - expected) / (0.5 * ((a + b) + (a + c)) - expected), 1e-12);
    EXPECT_NEAR(ari(t, p), oracle::ari(t, p), 1e-12);
    EXPECT_THROW(ari({0}, {0}), InputError);
}

TEST(Metrics, MatchOraclesAndRelabelInvariance) {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(rng.below(40));
        const int kt = 1 + static_cast<int>(rng.below(6)), kp = 1 + static_cast<int>(rng.below(6));
        const Labels truth = oracle::random_labels(rng, n, kt), pred = oracle::random_labels(rng, n, kp);
        EXPECT_NEAR(nmi(truth, pred), oracle::nmi(truth, pred), 1e-10);
        EXPECT_NEAR(nmi(truth, pred, NmiNorm::arithmetic), oracle::nmi(truth, pred, NmiNorm::arithmetic), 1e-10);
        EXPECT_NEAR(ari(truth, pred), oracle::ari(truth, pred), 1e-10);
        EXPECT_EQ(accuracy(truth, pred), static_cast<double>(oracle::best_matched_count(truth, pred)) / n);

        std::vector<int> sigma{5, 2, 0, 4, 1, 3};
        const Labels pr = relabel(pred, sigma);
        EXPECT_NEAR(nmi(truth, pr), nmi(truth, pred), 1e-12);
        EXPECT_EQ(accuracy(truth, pr), accuracy(truth, pred));
        EXPECT_NEAR(ari(relabel(truth, sigma), pred), ari(truth, pred), 1e-12);
    }
}

TEST(Metrics, BoundsAndSymmetry) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const Labels a = oracle::random_labels(rng, 25, 4), b = oracle::random_labels(rng, 25, 4);
        const ClusterScores s = score_clustering(a, b);
        EXPECT_GE(s.nmi, 0.0);
        EXPECT_LE(s.nmi, 1.0);
        EXPECT_GE(s.acc, 0.0);
        EXPECT_LE(s.acc, 1.0);
        EXPECT_GE(s.ari, -1.0);
        EXPECT_LE(s.ari, 1.0);
        EXPECT_NEAR(nmi(a, b), nmi(b, a), 1e-12);
        EXPECT_NEAR(ari(a, b), ari(b, a), 1e-12);
    }
}

TEST(Hungarian, MinimizesCost) {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const int k = 1 + t % 6;
        std::vector<std::vector<long long>> w(static_cast<std::size_t>(k), std::vector<long long>(static_cast<std::size_t>(k)));
        for (auto& row : w)
            for (auto& v : row) v = static_cast<long long>(rng.below(20));
        const std::vector<int> col = hungarian_max(w);
        long long got = 0;
        for (int r = 0; r < k; ++r) got += w[static_cast<std::size_t>(r)][static_cast<std::size_t>(col[static_cast<std::size_t>(r)])];
        EXPECT_EQ(got, oracle::best_overlap(w));
        std::vector<int> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        for (int r = 0; r < k; ++r) EXPECT_EQ(sorted[static_cast<std::size_t>(r)], r);
    }
}
