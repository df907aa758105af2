#include "tafilter/pooling.hpp"

#include <gtest/gtest.h>

namespace taf {
namespace {

TEST(GlobalPool, TwoByTwo) {
    Matrix x(2, 2);
    x << 1, 0, 3, 2;
    EXPECT_EQ(global_pool(x, PoolMode::Max), Vector((Vector(2) << 3, 2).finished()));
    EXPECT_EQ(global_pool(x, PoolMode::Sum), Vector((Vector(2) << 4, 2).finished()));
    EXPECT_EQ(global_pool(x, PoolMode::Mean), Vector((Vector(2) << 2, 1).finished()));
}

TEST(GlobalPool, SingleFrameIsIdentity) {
    Matrix x(1, 3);
    x << -1.5, 0.25, 7;
    for (auto mode : {PoolMode::Max, PoolMode::Sum, PoolMode::Mean})
        EXPECT_EQ(global_pool(x, mode), Vector(x.row(0).transpose()));
}

TEST(GlobalPool, MeanIsSumOverLength) {
    Rng rng(50);
    const Matrix x = gaussian_matrix(50, 8, 1.0, rng);
    const Vector mean = global_pool(x, PoolMode::Mean);
    Vector sum = Vector::Zero(8);
    for (Eigen::Index t = 0; t < 50; ++t) sum += x.row(t).transpose();
    EXPECT_LE((mean - sum / 50.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GlobalPool, RejectsEmpty) {
    EXPECT_THROW(global_pool(Matrix(0, 3), PoolMode::Mean), DataError);
}

TEST(GlobalPool, MaxBackwardRoutesToFirstArgmax) {
    Matrix x(3, 2);
    x << 1, 5, 4, 5, 4, 0;
    const Matrix dx = global_pool_backward(x, PoolMode::Max, Vector::Ones(2));
    Matrix expected = Matrix::Zero(3, 2);
    expected(1, 0) = 1;
    expected(0, 1) = 1;
    EXPECT_EQ(dx, expected);
}

TEST(Pyramid, LevelOneIsOneWholeSequenceFilter) {
    const auto filters = pyramid_params(1, 1);
    ASSERT_EQ(filters.size(), 1u);
    EXPECT_EQ(filters[0].placement.center, 0.0);
    EXPECT_EQ(filters[0].placement.relative_stride(), 1.0);
}

TEST(Pyramid, LevelFourHasFifteenFilters) {
    const auto filters = pyramid_params(4, 1);
    ASSERT_EQ(filters.size(), 15u);
    std::vector<int> per_depth(4, 0);
    for (const auto& f : filters) ++per_depth[size_t(f.depth)];
    EXPECT_EQ(per_depth, (std::vector<int>{1, 2, 4, 8}));
}

TEST(Pyramid, SecondHalfFilter) {
    const auto filters = pyramid_params(2, 3);
    ASSERT_EQ(filters.size(), 3u);
    EXPECT_NEAR(filters[2].placement.center, 0.5, 1e-15);
    EXPECT_NEAR(filters[2].placement.relative_stride(), 0.5, 1e-15);
}

TEST(Pyramid, SizeAndSymmetry) {
    for (int level = 1; level <= 7; ++level)
        for (int taps : {1, 2, 5}) {
            const auto filters = pyramid_params(level, taps);
            EXPECT_EQ(filters.size(), size_t((1 << level) - 1));
            for (int depth = 0; depth < level; ++depth) {
                std::vector<double> centers;
                for (const auto& f : filters)
                    if (f.depth == depth) centers.push_back(f.placement.center);
                for (size_t j = 0; j < centers.size(); ++j)
                    EXPECT_NEAR(centers[j], -centers[centers.size() - 1 - j], 1e-12);
            }
        }
}

TEST(Pyramid, TapsSpanTheirSegment) {
    // With N taps the outermost taps sit (N - 1) * delta apart = segment width.
    const Eigen::Index length = 64;
    for (const auto& f : pyramid_params(3, 4)) {
        const FilterBank bank = materialize(f.at_length(length), length, 4);
        EXPECT_NEAR(bank.mu[3] - bank.mu[0], double(length) / (1 << f.depth), 1e-9);
        EXPECT_NEAR(std::sqrt(bank.variance), bank.stride / 2.0, 1e-9);
    }
}

TEST(Pyramid, SingleTapWidthScalesWithDepth) {
    for (const auto& f : pyramid_params(4, 1)) {
        const FilterBank bank = materialize(f.at_length(80), 80, 1);
        EXPECT_NEAR(std::sqrt(bank.variance), 80.0 / (4.0 * (1 << f.depth)), 1e-9);
    }
}

TEST(Pyramid, WideLevelOneMatchesMeanPooling) {
    Rng rng(4);
    for (Eigen::Index length : {1, 7, 40, 123}) {
        PyramidFilter f = pyramid_params(1, 1).front();
        f.relative_sigma = 1000.0;  // sigma^2 = 1e6 T^2
        const Matrix x = gaussian_matrix(length, 6, 1.0, rng);
        const FilterBank bank = materialize(f.at_length(length), length, 1);
        const Vector filtered = read(bank, x).row(0).transpose();
        EXPECT_LE((filtered - global_pool(x, PoolMode::Mean)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

}  // namespace
}  // namespace taf
