#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "rfcl/clustering.hpp"
#include "rfcl/filter_bank.hpp"

using namespace rfcl;

namespace {

PatchSet random_patches(std::size_t rows, std::size_t fanin, std::size_t size, std::uint64_t seed) {
    PatchSet ps;
    ps.fanin = fanin;
    ps.size = size;
    ps.patches.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(fanin * size * size));
    const auto v = oracle::random_vector(static_cast<std::size_t>(ps.patches.size()), seed);
    std::copy(v.begin(), v.end(), ps.patches.data());
    return ps;
}

struct TwoClouds {
    PatchSet ps;
    std::vector<int> truth;
    Eigen::RowVector2d mean0{0.0, 0.0};
    Eigen::RowVector2d mean1{10.0, 0.0};  // 10 sigma apart with sigma = 1
};

TwoClouds two_clouds(std::uint64_t seed) {
    TwoClouds tc;
    tc.ps.fanin = 2;
    tc.ps.size = 1;
    tc.ps.patches.resize(400, 2);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index i = 0; i < 400; ++i) {
        const int c = i < 200 ? 0 : 1;
        const auto& m = c == 0 ? tc.mean0 : tc.mean1;
        tc.ps.patches.row(i) << m(0) + g(rng), m(1) + g(rng);
        tc.truth.push_back(c);
    }
    return tc;
}

}  // namespace

TEST(ExtractPatches, LayoutLengths) {
    const std::vector<Tensor3> maps{oracle::random_tensor(32, 14, 14, 1), oracle::random_tensor(32, 14, 14, 2)};
    EXPECT_EQ(extract_patches(maps, std::vector<std::size_t>{3, 17}, 5, 10, 1).dim(), 50u);
    std::vector<std::size_t> all(32);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const PatchSet ps = extract_patches(maps, all, 5, 10, 1);
    EXPECT_EQ(ps.patches.cols(), 800);
    EXPECT_EQ(ps.rows(), 10u);
}

TEST(ExtractPatches, SinglePositionCopiesSource) {
    const std::vector<Tensor3> src{oracle::random_tensor(1, 5, 5, 3)};
    const PatchSet ps = extract_patches(src, std::vector<std::size_t>{0}, 5, 4, 9);
    for (Eigen::Index r = 0; r < 4; ++r)
        for (Eigen::Index i = 0; i < 25; ++i) EXPECT_EQ(ps.patches(r, i), src[0].data()[static_cast<std::size_t>(i)]);
}

TEST(ExtractPatches, PatchesAreWindowsOfSelectedChannels) {
    const std::vector<Tensor3> src{oracle::random_tensor(4, 9, 9, 5)};
    const std::vector<std::size_t> sel{2, 0};
    const PatchSet ps = extract_patches(src, sel, 3, 30, 11);
    // Every patch must occur at some position of the source.
    for (Eigen::Index n = 0; n < ps.patches.rows(); ++n) {
        bool found = false;
        for (std::size_t r = 0; r + 3 <= 9 && !found; ++r)
            for (std::size_t c = 0; c + 3 <= 9 && !found; ++c) {
                bool same = true;
                std::size_t k = 0;
                for (std::size_t ch : sel)
                    for (std::size_t u = 0; u < 3; ++u)
                        for (std::size_t v = 0; v < 3; ++v)
                            same &= ps.patches(n, static_cast<Eigen::Index>(k++)) == src[0](ch, r + u, c + v);
                found = same;
            }
        EXPECT_TRUE(found) << "patch " << n;
    }
}

TEST(ExtractPatches, Errors) {
    const std::vector<Tensor3> none;
    EXPECT_THROW(extract_patches(none, std::vector<std::size_t>{0}, 3, 1, 0), ArgumentError);
    const std::vector<Tensor3> small{Tensor3(1, 4, 4)};
    EXPECT_THROW(extract_patches(small, std::vector<std::size_t>{0}, 5, 1, 0), ShapeError);
    EXPECT_THROW(extract_patches(small, std::vector<std::size_t>{1}, 3, 1, 0), ShapeError);
}

TEST(NormalizePatches, ConstantRowBecomesZero) {
    PatchSet ps = random_patches(1, 1, 2, 0);
    ps.patches.setConstant(3.5);
    EXPECT_EQ(normalize_patches(ps, 1.0).patches.cwiseAbs().maxCoeff(), 0.0);
}

TEST(NormalizePatches, TwoPointRow) {
    PatchSet ps;
    ps.fanin = 2;
    ps.size = 1;
    ps.patches.resize(1, 2);
    ps.patches << -1.0, 1.0;
    const PatchSet out = normalize_patches(ps, 1e-12);
    EXPECT_NEAR(out.patches(0, 0), -1.0, 1e-11);
    EXPECT_NEAR(out.patches(0, 1), 1.0, 1e-11);
}

TEST(NormalizePatches, RecomputedRowMeansVanish) {
    const PatchSet out = normalize_patches(random_patches(50, 2, 3, 7), 0.1);
    for (Eigen::Index r = 0; r < out.patches.rows(); ++r) EXPECT_NEAR(out.patches.row(r).mean(), 0.0, 1e-12);
}

TEST(KMeans, SingleClusterIsColumnMean) {
    const PatchSet ps = random_patches(300, 3, 2, 8);
    const Centroids c = kmeans(ps, 1, 100, 1e-4, 1);
    const Eigen::RowVectorXd mean = ps.patches.colwise().mean();
    EXPECT_LT((c.vectors.row(0) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(KMeans, RecoversTwoWellSeparatedClouds) {
    const TwoClouds tc = two_clouds(3);
    const Centroids c = kmeans(tc.ps, 2, 100, 1e-4, 5);
    const int c0 = c.vectors(0, 0) < 5.0 ? 0 : 1;  // centroid matching cloud 0
    EXPECT_LT((c.vectors.row(c0) - tc.mean0).norm(), 0.5);
    EXPECT_LT((c.vectors.row(1 - c0) - tc.mean1).norm(), 0.5);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < tc.truth.size(); ++i)
        agree += (static_cast<int>(c.assignment[i]) == c0) == (tc.truth[i] == 0);
    EXPECT_GE(static_cast<double>(agree) / 400.0, 0.99);
}

TEST(KMeans, KEqualsRowsHasZeroInertia) {
    const PatchSet ps = random_patches(12, 1, 2, 9);
    const Centroids c = kmeans(ps, 12, 10, 1e-4, 2);
    EXPECT_EQ(c.inertia(), 0.0);
    for (Eigen::Index i = 0; i < ps.patches.rows(); ++i) {
        bool found = false;
        for (Eigen::Index j = 0; j < c.vectors.rows(); ++j) found |= c.vectors.row(j) == ps.patches.row(i);
        EXPECT_TRUE(found);
    }
}

TEST(KMeans, InertiaNeverIncreases) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const PatchSet ps = random_patches(500, 2, 2, 100 + seed);
        const Centroids c = kmeans(ps, 7, 100, 0.0, seed);
        for (std::size_t i = 1; i < c.inertia_history.size(); ++i)
            ASSERT_LE(c.inertia_history[i], c.inertia_history[i - 1]) << "seed " << seed << " iter " << i;
    }
}

TEST(KMeans, DeterministicGivenSeed) {
    const PatchSet ps = random_patches(400, 3, 2, 10);
    const Centroids a = kmeans(ps, 9, 50, 1e-6, 77);
    const Centroids b = kmeans(ps, 9, 50, 1e-6, 77);
    EXPECT_EQ(a.vectors, b.vectors);
    EXPECT_EQ(a.inertia_history, b.inertia_history);
}

TEST(KMeans, MoreClustersNeverWorseWithRestarts) {
    const PatchSet ps = random_patches(300, 1, 2, 11);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 8; ++k) {
        const Centroids c = kmeans_best_of(ps, k, 300, 0.0, 4, 3);
        EXPECT_LE(c.inertia(), prev) << "k=" << k;
        prev = c.inertia();
    }
}

TEST(KMeans, EmptyClustersAreReseeded) {
    // Duplicate rows make several initial centroids coincide, so some clusters
    // start empty; every centroid must still end up finite and the history monotone.
    PatchSet ps = random_patches(60, 1, 1, 12);
    for (Eigen::Index i = 0; i < 30; ++i) ps.patches(i, 0) = 0.25;
    const Centroids c = kmeans(ps, 10, 100, 0.0, 3);
    EXPECT_TRUE(c.vectors.allFinite());
    for (std::size_t i = 1; i < c.inertia_history.size(); ++i)
        EXPECT_LE(c.inertia_history[i], c.inertia_history[i - 1]);
}

TEST(KMeans, TooFewRowsIsArgumentError) {
    EXPECT_THROW(kmeans(random_patches(3, 1, 1, 0), 4, 10, 1e-4, 0), ArgumentError);
    EXPECT_THROW(kmeans(random_patches(3, 1, 1, 0), 0, 10, 1e-4, 0), ArgumentError);
}

TEST(CentroidsToFilterbank, ShapesAndUnitNorm) {
    Centroids c;
    c.k = 16;
    c.vectors = RowMatrix::Random(16, 25);
    const auto kernels = centroids_to_filterbank(c, 1, 5);
    ASSERT_EQ(kernels.size(), 16u);
    for (std::size_t j = 0; j < kernels.size(); ++j) {
        EXPECT_EQ(kernels[j].fanin, 1u);
        EXPECT_EQ(kernels[j].size, 5u);
        const Eigen::Map<const Eigen::RowVectorXd> w(kernels[j].weights.data(), 25);
        EXPECT_NEAR(w.norm(), 1.0, 1e-12);
        const Eigen::RowVectorXd dir = c.vectors.row(static_cast<Eigen::Index>(j)) / c.vectors.row(static_cast<Eigen::Index>(j)).norm();
        EXPECT_LT((w - dir).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(CentroidsToFilterbank, ZeroCentroidReplacedByUnitKernel) {
    Centroids c;
    c.k = 2;
    c.vectors = RowMatrix::Zero(2, 8);
    c.vectors(1, 3) = 2.0;
    const auto kernels = centroids_to_filterbank(c, 2, 2, 5);
    const Eigen::Map<const Eigen::RowVectorXd> w(kernels[0].weights.data(), 8);
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
    EXPECT_TRUE(w.allFinite());
    EXPECT_EQ(kernels[1].weights[3], 1.0);
}

TEST(CentroidsToFilterbank, LengthMismatchIsShapeError) {
    Centroids c;
    c.vectors = RowMatrix::Random(2, 24);
    EXPECT_THROW(centroids_to_filterbank(c, 1, 5), ShapeError);
}

TEST(FilterBankFile, RoundTripAndLayout) {
    FilterBank fb;
    fb.fanin = 2;
    fb.size = 3;
    fb.filters.push_back({Kernel(2, 3, oracle::random_vector(18, 1)), {4, 7}});
    fb.filters.push_back({Kernel(2, 3, oracle::random_vector(18, 2)), {0, 31}});
    const auto p = std::filesystem::temp_directory_path() / "rfcl_fb_test.fb";
    save_filter_bank(fb, p.string());
    EXPECT_EQ(std::filesystem::file_size(p), 8u + 12u + 2u * (2u * 4u + 18u * 8u));
    EXPECT_EQ(load_filter_bank(p.string()), fb);
}
