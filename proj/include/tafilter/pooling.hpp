#pragma once

// Non-learned temporal aggregation: global max/sum/mean pooling and the
// fixed temporal pyramid.

#include "tafilter/filterbank.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace taf {

enum class PoolMode { Max, Sum, Mean };

inline std::string_view to_string(PoolMode mode) {
    switch (mode) {
        case PoolMode::Max: return "max";
        case PoolMode::Sum: return "sum";
        case PoolMode::Mean: return "mean";
    }
    return "?";
}

inline Vector global_pool(const Matrix& x, PoolMode mode) {
    require(x.rows() >= 1, "global_pool: empty sequence");
    switch (mode) {
        case PoolMode::Max: return x.colwise().maxCoeff().transpose();
        case PoolMode::Sum: return x.colwise().sum().transpose();
        case PoolMode::Mean: return x.colwise().mean().transpose();
    }
    return {};
}

/// Input gradient of global_pool. Max routes each dimension's gradient to
/// the first frame attaining the maximum.
inline Matrix global_pool_backward(const Matrix& x, PoolMode mode, const Vector& upstream) {
    require(upstream.size() == x.cols(), "global_pool_backward: upstream must have D entries");
    const Eigen::Index length = x.rows();
    Matrix dx = Matrix::Zero(length, x.cols());
    switch (mode) {
        case PoolMode::Max:
            for (Eigen::Index d = 0; d < x.cols(); ++d) {
                Eigen::Index best = 0;
                for (Eigen::Index t = 1; t < length; ++t)
                    if (x(t, d) > x(best, d)) best = t;
                dx(best, d) = upstream[d];
            }
            break;
        case PoolMode::Sum: dx.rowwise() = upstream.transpose(); break;
        case PoolMode::Mean:
            dx.rowwise() = upstream.transpose() / static_cast<double>(length);
            break;
    }
    return dx;
}

/// A fixed pyramid filter. The width scales with the sequence, so the
/// variance is kept relative and resolved per length.
struct PyramidFilter {
    FilterParams placement;  ///< center and log_stride; log_variance unused
    double relative_sigma = 0.25;
    int depth = 0;
    int segment = 0;

    FilterParams at_length(Eigen::Index length) const {
        FilterParams p = placement;
        const double sigma = relative_sigma * static_cast<double>(length);
        p.log_variance = std::log(sigma * sigma);
        return p;
    }
};

/// Filters of a temporal pyramid: depth l contributes 2^l filters, each
/// spanning one of 2^l equal segments.
inline std::vector<PyramidFilter> pyramid_params(int level, int taps) {
    require_arg(level >= 1, "pyramid_params: level must be >= 1");
    require_arg(taps >= 1, "pyramid_params: taps must be >= 1");
    require_arg(level <= 20, "pyramid_params: level too large");
    std::vector<PyramidFilter> out;
    for (int depth = 0; depth < level; ++depth) {
        const int segments = 1 << depth;
        const double width = 1.0 / segments;
        for (int j = 0; j < segments; ++j) {
            PyramidFilter f;
            const double rel_center = (j + 0.5) * width;
            f.placement.center = 2.0 * rel_center - 1.0;
            f.placement.log_stride = std::log(width);
            // sigma = delta / 2 with delta = T / (N - 1) * width
            f.relative_sigma = taps >= 2 ? width / (2.0 * (taps - 1)) : width / 4.0;
            f.depth = depth;
            f.segment = j;
            out.push_back(f);
        }
    }
    return out;
}

}  // namespace taf
