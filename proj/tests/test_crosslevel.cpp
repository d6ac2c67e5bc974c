#include "oracles.hpp"

#include "pici/crosslevel.hpp"

#include <gtest/gtest.h>

using namespace pici;

namespace {

Mat two_blobs(Rng& rng, int per_blob) {
    Mat z(2 * per_blob, 2);
    for (int i = 0; i < 2 * per_blob; ++i) {
        const double c = i < per_blob ? 0.0 : 10.0;
        z(i, 0) = c + 0.5 * rng.normal();
        z(i, 1) = c + 0.5 * rng.normal();
    }
    return z;
}

}  // namespace

TEST(KMeans, OnePointPerCentroid) {
    Rng rng(1);
    const Mat z = oracle::random_matrix(rng, 5, 3);
    const KMeansResult r = kmeans(z, 5, 2);
    EXPECT_EQ(r.objective, 0.0);
    std::vector<int> sorted = r.labels;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(KMeans, IdenticalPoints) {
    const Mat z = Mat::Constant(6, 2, 3.5);
    const KMeansResult r = kmeans(z, 2, 1);
    EXPECT_EQ(r.objective, 0.0);
    for (int l : r.labels) EXPECT_EQ(l, r.labels[0]);
}

TEST(KMeans, SeparatesTwoBlobs) {
    Rng rng(2);
    const Mat z = two_blobs(rng, 20);
    const KMeansResult r = kmeans(z, 2, 3);
    for (int i = 1; i < 20; ++i) EXPECT_EQ(r.labels[static_cast<std::size_t>(i)], r.labels[0]);
    for (int i = 21; i < 40; ++i) EXPECT_EQ(r.labels[static_cast<std::size_t>(i)], r.labels[20]);
    EXPECT_NE(r.labels[0], r.labels[20]);
}

TEST(KMeans, SubsampleMatchesBestTwoPartition) {
    Rng rng(3);
    const Mat z = two_blobs(rng, 20);
    Mat sub(8, 2);
    for (int i = 0; i < 8; ++i) sub.row(i) = z.row(i < 4 ? i : 16 + i);
    const KMeansResult r = kmeans(sub, 2, 4);
    EXPECT_NEAR(r.objective, oracle::best_two_partition(sub), 1e-9);
}

TEST(KMeans, ObjectiveMonotoneAndConsistent) {
    Rng rng(4);
    for (int t = 0; t < 25; ++t) {
        const int m = 2 + t % 4;
        const Mat z = oracle::random_matrix(rng, 30, 3);
        const KMeansResult r = kmeans(z, m, static_cast<std::uint64_t>(t));
        for (std::size_t i = 1; i < r.objective_history.size(); ++i)
            EXPECT_LE(r.objective_history[i], r.objective_history[i - 1]);
        double obj = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const int l = r.labels[static_cast<std::size_t>(i)];
            ASSERT_GE(l, 0);
            ASSERT_LT(l, m);
            obj += (z.row(i) - r.centroids.row(l)).squaredNorm();
            for (int k = 0; k < m; ++k)
                EXPECT_LE((z.row(i) - r.centroids.row(l)).squaredNorm(), (z.row(i) - r.centroids.row(k)).squaredNorm() + 1e-12);
        }
        EXPECT_NEAR(obj, r.objective, 1e-9);
    }
}

TEST(KMeans, DeterministicPerSeed) {
    Rng rng(5);
    const Mat z = oracle::random_matrix(rng, 40, 4);
    EXPECT_EQ(kmeans(z, 3, 9).labels, kmeans(z, 3, 9).labels);
}

TEST(KMeans, RejectsTooFewPoints) {
    EXPECT_THROW(kmeans(Mat::Zero(2, 2), 3, 0), InputError);
}

TEST(HardLabels, ArgmaxWithLowestIndexTies) {
    Mat c(3, 3);
    c << 0, 1, 0, 1.0 / 3, 1.0 / 3, 1.0 / 3, 0.2, 0.5, 0.3;
    EXPECT_EQ(hard_labels(c), (Labels{1, 0, 1}));
}

TEST(MatchClusters, IdentityWhenEqual) {
    const Labels p{0, 1, 2, 2, 1, 0};
    EXPECT_EQ(match_clusters(p, p, 3), Matching::identity(3));
}

TEST(MatchClusters, RecoversKnownPermutation) {
    const std::vector<int> pi{2, 0, 3, 1};
    Rng rng(6);
    const Labels p = oracle::random_labels(rng, 40, 4);
    Labels q(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) q[i] = pi[static_cast<std::size_t>(p[i])];
    const Matching w = match_clusters(p, q, 4);
    for (int s = 0; s < 4; ++s) EXPECT_EQ(w.cluster_of(s), pi[static_cast<std::size_t>(s)]);
    const Eigen::MatrixXi mat = w.matrix();
    EXPECT_EQ(mat.rowwise().sum(), Eigen::VectorXi::Ones(4));
    EXPECT_EQ(mat.colwise().sum(), Eigen::RowVectorXi::Ones(4));
}

TEST(MatchClusters, OptimalAgainstAllPermutations) {
    Rng rng(7);
    for (int t = 0; t < 50; ++t) {
        const Labels p = oracle::random_labels(rng, 20, 4), q = oracle::random_labels(rng, 20, 4);
        EXPECT_EQ(matching_overlap(p, q, match_clusters(p, q, 4)), oracle::best_overlap(label_overlap(p, q, 4)));
    }
}

TEST(MatchClusters, AbsentLabelsAllowed) {
    const Labels p{0, 0, 0}, q{2, 2, 2};
    const Matching w = match_clusters(p, q, 3);
    EXPECT_EQ(w.cluster_of(0), 2);
}

TEST(ModifyPseudo, IdentityAndSwap) {
    const Labels p{0, 1, 1};
    EXPECT_EQ(modify_pseudo(p, Matching::identity(2)), oracle::one_hot(p, 2));
    const Mat swapped = modify_pseudo(Labels{0, 1}, Matching({1, 0}));
    EXPECT_EQ(swapped, oracle::one_hot(Labels{1, 0}, 2));
}

TEST(ModifyPseudo, SelfMatchGivesOwnOneHot) {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const Labels p = oracle::random_labels(rng, 15, 5);
        EXPECT_EQ(modify_pseudo(p, match_clusters(p, p, 5)), oracle::one_hot(p, 5));
    }
}

TEST(ModifyPseudo, RelabelInvariant) {
    Rng rng(9);
    const std::vector<int> sigma{3, 1, 4, 0, 2};
    for (int t = 0; t < 20; ++t) {
        const Labels q = oracle::random_labels(rng, 30, 5);
        Labels p(q.size());
        for (std::size_t i = 0; i < q.size(); ++i)  // mostly agree with q so the optimum is unique
            p[i] = rng.uniform() < 0.8 ? q[i] : static_cast<int>(rng.below(5));
        Labels p2(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) p2[i] = sigma[static_cast<std::size_t>(p[i])];
        EXPECT_EQ(modify_pseudo(p, match_clusters(p, q, 5)), modify_pseudo(p2, match_clusters(p2, q, 5)));
    }
}

TEST(Matching, RejectsNonPermutation) {
    EXPECT_THROW(Matching({0, 0}), InputError);
}

TEST(CliLoss, Examples) {
    const Mat hot = oracle::one_hot(Labels{0, 2, 1}, 3);
    EXPECT_EQ(cli_loss(hot, hot, hot, hot), 0.0);
    const Mat uniform = Mat::Constant(3, 3, 1.0 / 3.0);
    EXPECT_NEAR(cli_loss(hot, uniform, hot, uniform), std::log(3.0), 1e-15);
    const Mat t = oracle::one_hot(Labels{0, 1}, 2);
    Mat c(2, 2);
    c << 0.9, 0.1, 0.2, 0.8;
    EXPECT_NEAR(cli_loss(t, c, t, c), -(std::log(0.9) + std::log(0.8)) / 2.0, 1e-15);
    EXPECT_NEAR(cli_loss(t, c, t, c), 0.16425, 1e-5);
}

TEST(CliLoss, NonNegativeAndMatchesOracle) {
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const Mat pa = oracle::one_hot(oracle::random_labels(rng, 6, 3), 3), pb = oracle::one_hot(oracle::random_labels(rng, 6, 3), 3);
        const Mat ca = oracle::simplex_rows(rng, 6, 3), cb = oracle::simplex_rows(rng, 6, 3);
        const double v = cli_loss(pa, ca, pb, cb);
        EXPECT_GE(v, 0.0);
        EXPECT_NEAR(v, oracle::cli_loss(pa, ca, pb, cb), 1e-12);
    }
}

TEST(CliLoss, GradientMatchesFiniteDifferences) {
    Rng rng(11);
    for (int t = 0; t < 10; ++t) {
        const Mat pa = oracle::one_hot(oracle::random_labels(rng, 4, 3), 3), pb = oracle::one_hot(oracle::random_labels(rng, 4, 3), 3);
        Mat ca = oracle::simplex_rows(rng, 4, 3), cb = oracle::simplex_rows(rng, 4, 3);
        const PairLoss g = cli_loss_grad(pa, ca, pb, cb);
        auto f = [&] { return cli_loss(pa, ca, pb, cb); };
        EXPECT_LT(oracle::check_gradient(ca, g.d_a, f), 1e-4);
        EXPECT_LT(oracle::check_gradient(cb, g.d_b, f), 1e-4);
    }
}
