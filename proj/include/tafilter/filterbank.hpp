#pragma once

// Temporal attention filters: a bank of N Gaussian taps placed relative to
// the sequence length, read as a weighted temporal average of a T x D
// feature sequence.

#include "tafilter/core.hpp"

#include <string>

namespace taf {

/// A T x D feature sequence with its class label.
struct FeatureSequence {
    Matrix data;
    int label = 0;
    std::string id;

    Eigen::Index length() const { return data.rows(); }
    Eigen::Index dim() const { return data.cols(); }
};

/// Learnable placement of one filter. Stride and variance live in log space
/// so they stay positive under unconstrained updates.
struct FilterParams {
    double center = 0.0;        ///< relative center in [-1, 1] maps to [0, T]
    double log_stride = 0.0;    ///< log of the relative stride
    double log_variance = 0.0;  ///< log of the Gaussian variance in frame^2

    bool finite() const {
        return std::isfinite(center) && std::isfinite(log_stride) && std::isfinite(log_variance);
    }
    double relative_stride() const { return std::exp(log_stride); }
    double variance() const { return std::exp(log_variance); }
};

/// Lower bound on a row's normalizer. Rows whose raw mass falls below it are
/// attenuated instead of renormalized.
inline constexpr double kNormalizerFloor = 1e-8;

/// Materialized N x T weight matrix of one filter for one sequence length.
struct FilterBank {
    Matrix weights;     ///< N x T, rows sum to 1 unless clamped
    Vector mu;          ///< tap centers in frames
    Vector normalizer;  ///< per-row Z_i = max(raw row mass, floor)
    Vector raw_mass;    ///< per-row sum of unnormalized Gaussian values
    double center = 0;  ///< g in frames
    double stride = 0;  ///< delta in frames
    double variance = 1;

    Eigen::Index taps() const { return weights.rows(); }
    Eigen::Index length() const { return weights.cols(); }
    bool clamped(Eigen::Index i) const { return raw_mass[i] < kNormalizerFloor; }
};

/// Offset of tap i from the filter center, in strides.
inline double tap_offset(Eigen::Index i, Eigen::Index taps) {
    return static_cast<double>(i) - 0.5 * static_cast<double>(taps) + 0.5;
}

/// Center in frames for sequence length T.
inline double center_frames(const FilterParams& p, Eigen::Index length) {
    return 0.5 * static_cast<double>(length) * (p.center + 1.0);
}

/// Stride in frames. A single tap has no stride and sits on the center.
inline double stride_frames(const FilterParams& p, Eigen::Index length, Eigen::Index taps) {
    if (taps == 1) return 0.0;
    return static_cast<double>(length) / static_cast<double>(taps - 1) * p.relative_stride();
}

inline FilterBank materialize(const FilterParams& params, Eigen::Index length, Eigen::Index taps) {
    require_arg(length >= 1, "materialize: sequence length must be >= 1");
    require_arg(taps >= 1, "materialize: tap count must be >= 1");
    require_arg(params.finite(), "materialize: filter parameters must be finite");

    FilterBank bank;
    bank.center = center_frames(params, length);
    bank.stride = stride_frames(params, length, taps);
    bank.variance = params.variance();
    require_arg(bank.variance > 0.0 && std::isfinite(bank.variance),
                "materialize: variance out of range");

    bank.mu.resize(taps);
    bank.weights.resize(taps, length);
    bank.normalizer.resize(taps);
    bank.raw_mass.resize(taps);
    const double inv_two_var = 1.0 / (2.0 * bank.variance);
    for (Eigen::Index i = 0; i < taps; ++i) {
        const double mu = bank.center + tap_offset(i, taps) * bank.stride;
        bank.mu[i] = mu;
        double mass = 0.0;
        for (Eigen::Index t = 0; t < length; ++t) {
            const double diff = static_cast<double>(t) - mu;
            const double w = std::exp(-diff * diff * inv_two_var);
            bank.weights(i, t) = w;
            mass += w;
        }
        bank.raw_mass[i] = mass;
        bank.normalizer[i] = std::max(mass, kNormalizerFloor);
        bank.weights.row(i) /= bank.normalizer[i];
    }
    return bank;
}

/// Filter response: N x D matrix of Gaussian-weighted temporal averages.
inline Matrix read(const FilterBank& bank, const Matrix& x) {
    require(bank.length() == x.rows(), "read: filter length " + std::to_string(bank.length()) +
                                           " does not match sequence length " +
                                           std::to_string(x.rows()));
    return bank.weights * x;
}

inline Matrix read(const FilterBank& bank, const FeatureSequence& x) { return read(bank, x.data); }

struct FilterGradient {
    FilterParams params;  ///< dL/d(center, log_stride, log_variance)
    Matrix input;         ///< dL/dx, T x D (empty when not requested)
};

/// Gradients of L = <upstream, read(bank, x)> with respect to the filter
/// parameters and the input.
inline FilterGradient read_backward(const FilterBank& bank, const Matrix& x, const Matrix& upstream,
                                    bool want_input = true) {
    const Eigen::Index taps = bank.taps();
    const Eigen::Index length = bank.length();
    require(x.rows() == length, "read_backward: sequence length mismatch");
    require(upstream.rows() == taps && upstream.cols() == x.cols(),
            "read_backward: upstream must be N x D");

    FilterGradient grad;
    if (want_input) grad.input = bank.weights.transpose() * upstream;

    // dL/dF, N x T
    const Matrix dweights = upstream * x.transpose();
    const double inv_var = 1.0 / bank.variance;

    double d_mu_sum = 0.0;     // sum_i dL/dmu_i
    double d_mu_offset = 0.0;  // sum_i dL/dmu_i * offset_i
    double d_log_var = 0.0;
    for (Eigen::Index i = 0; i < taps; ++i) {
        const double z = bank.normalizer[i];
        // Through the normalizer: dL/de_it for the unnormalized Gaussian.
        const double shift = bank.clamped(i) ? 0.0 : bank.weights.row(i).dot(dweights.row(i));
        double d_mu = 0.0;
        for (Eigen::Index t = 0; t < length; ++t) {
            const double de = (dweights(i, t) - shift) / z;
            const double e = bank.weights(i, t) * z;
            const double diff = static_cast<double>(t) - bank.mu[i];
            const double de_e = de * e;
            d_mu += de_e * diff * inv_var;
            d_log_var += de_e * diff * diff * 0.5 * inv_var;
        }
        d_mu_sum += d_mu;
        d_mu_offset += d_mu * tap_offset(i, taps);
    }
    grad.params.center = d_mu_sum * 0.5 * static_cast<double>(length);
    grad.params.log_stride = d_mu_offset * bank.stride;
    grad.params.log_variance = d_log_var;
    return grad;
}

}  // namespace taf
