#pragma once

#include "tafilter/core.hpp"

namespace taf {

/// Standard LSTM cell. Gate rows are stacked as [input, forget, output, candidate].
struct LstmCell {
    Matrix w_input;   ///< 4H x input
    Matrix w_hidden;  ///< 4H x H
    Vector bias;      ///< 4H

    Eigen::Index hidden_width() const { return w_hidden.cols(); }
    Eigen::Index input_width() const { return w_input.cols(); }

    static LstmCell zeros(Eigen::Index input, Eigen::Index hidden) {
        return {Matrix::Zero(4 * hidden, input), Matrix::Zero(4 * hidden, hidden),
                Vector::Zero(4 * hidden)};
    }

    /// Gate weights ~ N(0, 1/fan_in); forget-gate bias starts at +1.
    static LstmCell random(Eigen::Index input, Eigen::Index hidden, Rng& rng) {
        LstmCell c = zeros(input, hidden);
        c.w_input = gaussian_matrix(4 * hidden, input, 1.0 / std::sqrt(double(input)), rng);
        c.w_hidden = gaussian_matrix(4 * hidden, hidden, 1.0 / std::sqrt(double(hidden)), rng);
        c.bias.segment(hidden, hidden).setOnes();
        return c;
    }

    template <typename F>
    void for_each_param(F&& f) {
        f("lstm", w_input.data(), w_input.size());
        f("lstm", w_hidden.data(), w_hidden.size());
        f("lstm", bias.data(), bias.size());
    }
};

struct LstmStep {
    Vector input;
    Vector hidden_prev;
    Vector cell_prev;
    Vector in_gate, forget_gate, out_gate, candidate;
    Vector cell;
    Vector cell_tanh;
    Vector hidden;
};

inline Vector logistic(const Vector& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

inline LstmStep lstm_step(const LstmCell& cell, Vector input, Vector hidden_prev, Vector cell_prev) {
    const Eigen::Index h = cell.hidden_width();
    LstmStep s;
    const Vector z = cell.w_input * input + cell.w_hidden * hidden_prev + cell.bias;
    s.in_gate = logistic(z.segment(0, h));
    s.forget_gate = logistic(z.segment(h, h));
    s.out_gate = logistic(z.segment(2 * h, h));
    s.candidate = z.segment(3 * h, h).array().tanh().matrix();
    s.cell = s.forget_gate.cwiseProduct(cell_prev) + s.in_gate.cwiseProduct(s.candidate);
    s.cell_tanh = s.cell.array().tanh().matrix();
    s.hidden = s.out_gate.cwiseProduct(s.cell_tanh);
    s.input = std::move(input);
    s.hidden_prev = std::move(hidden_prev);
    s.cell_prev = std::move(cell_prev);
    return s;
}

struct LstmStepGradient {
    Vector input;
    Vector hidden_prev;
    Vector cell_prev;
};

/// Backward through one step given dL/dh and dL/dc at its output. Parameter
/// gradients accumulate into `grad`.
inline LstmStepGradient lstm_step_backward(const LstmCell& cell, const LstmStep& s,
                                           const Vector& dhidden, const Vector& dcell,
                                           LstmCell& grad) {
    const Eigen::Index h = cell.hidden_width();
    const Vector dc = dcell + dhidden.cwiseProduct(s.out_gate).cwiseProduct(
                                  (1.0 - s.cell_tanh.array().square()).matrix());
    Vector dz(4 * h);
    dz.segment(0, h) = dc.cwiseProduct(s.candidate).cwiseProduct(
        s.in_gate.cwiseProduct((1.0 - s.in_gate.array()).matrix()));
    dz.segment(h, h) = dc.cwiseProduct(s.cell_prev).cwiseProduct(
        s.forget_gate.cwiseProduct((1.0 - s.forget_gate.array()).matrix()));
    dz.segment(2 * h, h) = dhidden.cwiseProduct(s.cell_tanh).cwiseProduct(
        s.out_gate.cwiseProduct((1.0 - s.out_gate.array()).matrix()));
    dz.segment(3 * h, h) = dc.cwiseProduct(s.in_gate).cwiseProduct(
        (1.0 - s.candidate.array().square()).matrix());

    grad.w_input.noalias() += dz * s.input.transpose();
    grad.w_hidden.noalias() += dz * s.hidden_prev.transpose();
    grad.bias += dz;

    LstmStepGradient out;
    out.input = cell.w_input.transpose() * dz;
    out.hidden_prev = cell.w_hidden.transpose() * dz;
    out.cell_prev = dc.cwiseProduct(s.forget_gate);
    return out;
}

}  // namespace taf
