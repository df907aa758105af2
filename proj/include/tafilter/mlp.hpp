#pragma once

// Two fully connected layers: ReLU hidden layer followed by softmax scores.

#include "tafilter/core.hpp"

namespace taf {

struct MlpHead {
    Matrix w1;  ///< H x input
    Vector b1;  ///< H
    Matrix w2;  ///< C x H
    Vector b2;  ///< C

    Eigen::Index input_width() const { return w1.cols(); }
    Eigen::Index hidden_width() const { return w1.rows(); }
    Eigen::Index classes() const { return w2.rows(); }

    static MlpHead zeros(Eigen::Index input, Eigen::Index hidden, Eigen::Index classes) {
        return {Matrix::Zero(hidden, input), Vector::Zero(hidden), Matrix::Zero(classes, hidden),
                Vector::Zero(classes)};
    }

    /// Weights ~ N(0, 1/fan_in), zero biases.
    static MlpHead random(Eigen::Index input, Eigen::Index hidden, Eigen::Index classes, Rng& rng) {
        MlpHead h = zeros(input, hidden, classes);
        h.w1 = gaussian_matrix(hidden, input, 1.0 / std::sqrt(static_cast<double>(input)), rng);
        h.w2 = gaussian_matrix(classes, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
        return h;
    }

    template <typename F>
    void for_each_param(F&& f) {
        f("classifier", w1.data(), w1.size());
        f("classifier", b1.data(), b1.size());
        f("classifier", w2.data(), w2.size());
        f("classifier", b2.data(), b2.size());
    }
};

inline Vector softmax(const Vector& logits) {
    const double peak = logits.maxCoeff();
    Vector p = (logits.array() - peak).exp().matrix();
    return p / p.sum();
}

struct MlpCache {
    Vector input;
    Vector pre_activation;
    Vector hidden;
    Vector logits;
    Vector probs;
};

inline MlpCache mlp_forward(const MlpHead& head, Vector input) {
    require(input.size() == head.input_width(),
            "classifier expects " + std::to_string(head.input_width()) + " inputs, got " +
                std::to_string(input.size()));
    MlpCache c;
    c.input = std::move(input);
    c.pre_activation = head.w1 * c.input + head.b1;
    c.hidden = c.pre_activation.cwiseMax(0.0);
    c.logits = head.w2 * c.hidden + head.b2;
    c.probs = softmax(c.logits);
    return c;
}

/// Accumulates parameter gradients into `grad` and returns dL/dinput.
inline Vector mlp_backward(const MlpHead& head, const MlpCache& cache, const Vector& dlogits,
                           MlpHead& grad) {
    require(dlogits.size() == head.classes(), "classifier backward: dlogits size mismatch");
    grad.w2.noalias() += dlogits * cache.hidden.transpose();
    grad.b2 += dlogits;
    Vector dhidden = head.w2.transpose() * dlogits;
    for (Eigen::Index j = 0; j < dhidden.size(); ++j)
        if (cache.pre_activation[j] <= 0.0) dhidden[j] = 0.0;
    grad.w1.noalias() += dhidden * cache.input.transpose();
    grad.b1 += dhidden;
    return head.w1.transpose() * dhidden;
}

}  // namespace taf
