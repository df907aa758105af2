#pragma once

// Loss, optimizer, augmentation, training loops and gradient checking.

#include "tafilter/data.hpp"
#include "tafilter/model.hpp"

#include <functional>
#include <optional>
#include <ostream>

namespace taf {

struct Loss {
    double value = 0.0;
    Vector dlogits;
};

inline constexpr double kProbFloor = 1e-12;

/// Softmax cross-entropy given softmax output. dlogits is the gradient with
/// respect to the pre-softmax scores.
inline Loss cross_entropy(const Vector& probs, int label) {
    require(label >= 0 && label < probs.size(),
            "label " + std::to_string(label) + " out of range for " + std::to_string(probs.size()) +
                " classes");
    Loss out;
    out.value = -std::log(std::max(probs[label], kProbFloor));
    out.dlogits = probs;
    out.dlogits[label] -= 1.0;
    return out;
}

struct TrainConfig {
    int iterations = 10000;
    int batch_size = 100;
    double momentum = 0.9;
    double learning_rate = 0.01;
    std::uint64_t seed = 1;
    int max_skip = 5;
    bool one_vs_all = false;
    int eval_every = 500;        ///< 0 disables periodic evaluation
    double clip_norm = 5.0;      ///< global-norm clip for LSTM gradients

    void validate() const {
        require_arg(iterations >= 0, "iterations must be >= 0");
        require_arg(batch_size >= 1, "batch size must be >= 1");
        require_arg(learning_rate >= 0.0, "learning rate must be >= 0");
        require_arg(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
        require_arg(max_skip >= 0, "max skip must be >= 0");
        require_arg(eval_every >= 0, "eval interval must be >= 0");
    }
};

/// v <- momentum * v - lr * g; p <- p + v, over every trainable array.
template <typename M>
void sgd_momentum_step(M& params, M& velocity, const M& grads, double lr, double momentum) {
    auto p = param_views(params);
    auto v = param_views(velocity);
    auto g = param_views(const_cast<M&>(grads));
    require(p.size() == v.size() && p.size() == g.size(), "sgd: parameter layout mismatch");
    for (size_t k = 0; k < p.size(); ++k) {
        require(p[k].values.size() == v[k].values.size() && p[k].values.size() == g[k].values.size(),
                "sgd: parameter shape mismatch");
        for (size_t j = 0; j < p[k].values.size(); ++j) {
            v[k].values[j] = momentum * v[k].values[j] - lr * g[k].values[j];
            p[k].values[j] += v[k].values[j];
        }
    }
}

template <typename M>
void add_scaled(M& dst, const M& src, double scale) {
    auto d = param_views(dst);
    auto s = param_views(const_cast<M&>(src));
    for (size_t k = 0; k < d.size(); ++k)
        for (size_t j = 0; j < d[k].values.size(); ++j) d[k].values[j] += scale * s[k].values[j];
}

template <typename M>
double global_norm(const M& grads) {
    double sq = 0.0;
    for (const auto& view : param_views(const_cast<M&>(grads)))
        for (double v : view.values) sq += v * v;
    return std::sqrt(sq);
}

/// Drops the first k frames, k uniform on {0, ..., min(max_skip, T - 1)}.
inline FeatureSequence augment_skip(const FeatureSequence& x, int max_skip, Rng& rng) {
    const int limit = std::min<Eigen::Index>(max_skip, x.length() - 1);
    if (limit <= 0) return x;
    std::uniform_int_distribution<int> dist(0, limit);
    const int skip = dist(rng);
    FeatureSequence out;
    out.data = x.data.bottomRows(x.length() - skip);
    out.label = x.label;
    out.id = x.id;
    return out;
}

struct HistoryRow {
    int iteration = 0;
    double batch_loss = 0.0;
    std::optional<double> accuracy;  ///< train-split accuracy when evaluated

    bool operator==(const HistoryRow&) const = default;
};

using History = std::vector<HistoryRow>;

inline void write_history(std::ostream& out, const History& history) {
    out << "iteration\tbatch_loss\teval_accuracy\n";
    const auto precision = out.precision(17);
    for (const auto& row : history) {
        out << row.iteration << '\t' << row.batch_loss << '\t';
        if (row.accuracy) out << *row.accuracy;
        out << '\n';
    }
    out.precision(precision);
}

inline double accuracy(const Model& model, const std::vector<FeatureSequence>& samples) {
    require(!samples.empty(), "accuracy: empty split");
    size_t correct = 0;
    for (const auto& s : samples) correct += predict(model, s.data) == s.label;
    return double(correct) / double(samples.size());
}

/// confusion(true, predicted) counts.
inline Eigen::MatrixXi confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted,
                                        int classes) {
    Eigen::MatrixXi m = Eigen::MatrixXi::Zero(classes, classes);
    for (size_t i = 0; i < truth.size(); ++i) m(truth[i], predicted[i]) += 1;
    return m;
}

/// Loss and parameter gradient of one labelled sequence.
template <typename M>
double sample_gradient(const M& model, const FeatureSequence& x, M& grad_sum) {
    const auto fwd = forward(model, x.data);
    const Loss loss = cross_entropy(fwd.probs(), x.label);
    const auto g = backward(model, x.data, fwd, loss.dlogits, false);
    add_scaled(grad_sum, g.params, 1.0);
    return loss.value;
}

struct FitResult {
    Model model;
    History history;
};

namespace detail {

inline void check_dataset(const Dataset& ds) {
    require(!ds.train.empty(), "training split is empty");
    require(ds.classes >= 2, "need at least two classes");
    const Eigen::Index dim = ds.train.front().dim();
    for (const auto* split : {&ds.train, &ds.test})
        for (const auto& s : *split) {
            require(s.dim() == dim, "inconsistent feature dimension in " + s.id);
            require(s.length() >= 1, "empty sequence " + s.id);
            require(s.label >= 0 && s.label < ds.classes, "label out of range in " + s.id);
        }
}

template <typename M>
void train_loop(M& model, const Dataset& ds, const TrainConfig& cfg, Rng& rng, History& history) {
    M velocity = zeros_like(model);
    std::uniform_int_distribution<size_t> pick(0, ds.train.size() - 1);
    for (int it = 1; it <= cfg.iterations; ++it) {
        M grads = zeros_like(model);
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& sample = ds.train[pick(rng)];
            loss += cfg.max_skip > 0 ? sample_gradient(model, augment_skip(sample, cfg.max_skip, rng), grads)
                                     : sample_gradient(model, sample, grads);
        }
        const double inv = 1.0 / cfg.batch_size;
        for (auto& view : param_views(grads))
            for (double& v : view.values) v *= inv;
        if constexpr (std::is_same_v<M, LstmModel>) {
            const double norm = global_norm(grads);
            if (norm > cfg.clip_norm) {
                const double s = cfg.clip_norm / norm;
                for (auto& view : param_views(grads))
                    for (double& v : view.values) v *= s;
            }
        }
        sgd_momentum_step(model, velocity, grads, cfg.learning_rate, cfg.momentum);

        HistoryRow row{it, loss * inv, std::nullopt};
        if (cfg.eval_every > 0 && (it % cfg.eval_every == 0 || it == cfg.iterations))
            row.accuracy = accuracy(Model(model), ds.train);
        history.push_back(row);
    }
}

}  // namespace detail

/// Trains one model with seeded mini-batch SGD. Batches are drawn with
/// replacement; gradients are averaged in draw order, so a run is a pure
/// function of (seed, data, configs).
inline FitResult fit(const ModelConfig& model_cfg, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    detail::check_dataset(ds);
    Rng rng(cfg.seed);
    FitResult out{make_model(model_cfg, ds.train.front().dim(), ds.classes, rng), {}};
    std::visit([&](auto& m) { detail::train_loop(m, ds, cfg, rng, out.history); }, out.model);
    return out;
}

// ---------------------------------------------------------------------------
// One-vs-all

/// C binary models; member c scores "is class c" as its class-1 probability.
struct OneVsAll {
    std::vector<Model> members;

    int predict(const Matrix& x) const {
        Vector scores(Eigen::Index(members.size()));
        for (size_t c = 0; c < members.size(); ++c) scores[Eigen::Index(c)] = predict_probs(members[c], x)[1];
        return argmax(scores);
    }
};

inline Dataset binary_relabel(const Dataset& ds, int positive) {
    Dataset out = ds;
    out.classes = 2;
    for (auto* split : {&out.train, &out.test})
        for (auto& s : *split) s.label = s.label == positive ? 1 : 0;
    return out;
}

struct OneVsAllResult {
    OneVsAll ensemble;
    std::vector<History> histories;
};

/// Every member trains with the same seed and config.
inline OneVsAllResult fit_one_vs_all(const ModelConfig& model_cfg, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    detail::check_dataset(ds);
    for (int c = 0; c < ds.classes; ++c) {
        const bool has_positive = std::any_of(ds.train.begin(), ds.train.end(),
                                              [&](const FeatureSequence& s) { return s.label == c; });
        require(has_positive, "class " + std::to_string(c) + " has no training examples");
    }
    OneVsAllResult out;
    for (int c = 0; c < ds.classes; ++c) {
        FitResult r = fit(model_cfg, binary_relabel(ds, c), cfg);
        out.ensemble.members.push_back(std::move(r.model));
        out.histories.push_back(std::move(r.history));
    }
    return out;
}

inline double accuracy(const OneVsAll& ensemble, const std::vector<FeatureSequence>& samples) {
    require(!samples.empty(), "accuracy: empty split");
    size_t correct = 0;
    for (const auto& s : samples) correct += ensemble.predict(s.data) == s.label;
    return double(correct) / double(samples.size());
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradCheckGroup {
    std::string name;
    double max_rel_error = 0.0;
    size_t count = 0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double tolerance = 0.0;
    bool pass = true;
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

namespace detail {

inline GradCheckGroup& group(GradCheckReport& r, std::string_view name) {
    for (auto& g : r.groups)
        if (g.name == name) return g;
    r.groups.push_back({std::string(name), 0.0, 0});
    return r.groups.back();
}

}  // namespace detail

/// Hook applied to the analytic gradient before comparison; used to confirm
/// the check catches wrong gradients.
using GradientMutation = std::function<void(Model& grad_params, Matrix& grad_input)>;

/// Compares the analytic gradient of the cross-entropy loss against central
/// differences on every scalar parameter and every input entry.
inline GradCheckReport check_gradients(const Model& model, const FeatureSequence& x, double h, double tol,
                                       const GradientMutation& mutate = {}) {
    GradCheckReport report;
    report.tolerance = tol;
    std::visit(
        [&](const auto& typed) {
            using M = std::decay_t<decltype(typed)>;
            const auto fwd = forward(typed, x.data);
            const Loss loss = cross_entropy(fwd.probs(), x.label);
            auto g = backward(typed, x.data, fwd, loss.dlogits, true);
            Model grad_variant = g.params;
            Matrix grad_input = g.input;
            if (mutate) mutate(grad_variant, grad_input);
            M& analytic = std::get<M>(grad_variant);

            auto loss_of = [&](const M& m, const Matrix& data) {
                return cross_entropy(forward(m, data).probs(), x.label).value;
            };
            M probe = typed;
            auto pv = param_views(probe);
            auto av = param_views(analytic);
            for (size_t k = 0; k < pv.size(); ++k) {
                auto& grp = detail::group(report, pv[k].group);
                for (size_t j = 0; j < pv[k].values.size(); ++j) {
                    double& slot = pv[k].values[j];
                    const double saved = slot;
                    slot = saved + h;
                    const double up = loss_of(probe, x.data);
                    slot = saved - h;
                    const double down = loss_of(probe, x.data);
                    slot = saved;
                    const double numeric = (up - down) / (2.0 * h);
                    grp.max_rel_error = std::max(grp.max_rel_error, relative_error(av[k].values[j], numeric));
                    ++grp.count;
                }
            }
            auto& grp = detail::group(report, "input");
            Matrix data = x.data;
            for (Eigen::Index i = 0; i < data.size(); ++i) {
                const double saved = data.data()[i];
                data.data()[i] = saved + h;
                const double up = loss_of(typed, data);
                data.data()[i] = saved - h;
                const double down = loss_of(typed, data);
                data.data()[i] = saved;
                const double numeric = (up - down) / (2.0 * h);
                grp.max_rel_error = std::max(grp.max_rel_error, relative_error(grad_input.data()[i], numeric));
                ++grp.count;
            }
        },
        model);
    for (const auto& g : report.groups) report.pass = report.pass && g.max_rel_error <= tol;
    return report;
}

/// Tiny dimensions for gradient checks.
struct GradCheckDims {
    int length = 9;
    int dim = 3;
    int filters = 2;
    int taps = 2;
    int hidden = 5;
    int classes = 3;
    int lstm_hidden = 4;
    int steps = 2;
    int pyramid_level = 2;
};

inline GradCheckDims default_grad_check_dims(ModelKind kind) {
    GradCheckDims d;
    if (kind == ModelKind::Lstm) {
        d.length = 8;
        d.dim = 2;
        d.filters = 1;
        d.taps = 3;
        d.lstm_hidden = 4;
        d.steps = 2;
        d.classes = 2;
    }
    return d;
}

/// A seeded model with every parameter perturbed away from its initial
/// value, plus a seeded sample, for gradient checking.
inline std::pair<Model, FeatureSequence> grad_check_case(ModelKind kind, const GradCheckDims& dims,
                                                         std::uint64_t seed) {
    Rng rng(seed);
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.filters = dims.filters;
    cfg.taps = dims.taps;
    cfg.hidden = dims.hidden;
    cfg.lstm_hidden = dims.lstm_hidden;
    cfg.steps = dims.steps;
    cfg.pyramid_level = dims.pyramid_level;
    Model model = make_model(cfg, dims.dim, dims.classes, rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::visit(
        [&](auto& m) {
            using M = std::decay_t<decltype(m)>;
            m.head.b1 = gaussian_vector(m.head.b1.size(), 0.5, rng);
            m.head.b2 = gaussian_vector(m.head.b2.size(), 0.5, rng);
            if constexpr (std::is_same_v<M, StaticModel>) {
                for (auto& p : m.filters) {
                    p.log_stride = -0.7 * unit(rng);
                    p.log_variance = 0.5 + 1.5 * unit(rng);
                }
            }
            if constexpr (std::is_same_v<M, LstmModel>) {
                for (int f = 0; f < m.filters; ++f) {
                    m.map_bias[3 * f] = 0.4 * (unit(rng) - 0.5);
                    m.map_bias[3 * f + 1] = -0.5 * unit(rng);
                    m.map_bias[3 * f + 2] = 0.5 + 1.5 * unit(rng);
                }
                m.map_weight = gaussian_matrix(m.map_weight.rows(), m.map_weight.cols(), 0.3, rng);
                m.cell.bias = gaussian_vector(m.cell.bias.size(), 0.5, rng);
            }
        },
        model);

    FeatureSequence x;
    x.data = gaussian_matrix(dims.length, dims.dim, 1.0, rng);
    x.label = std::uniform_int_distribution<int>(0, dims.classes - 1)(rng);
    x.id = "grad-check";
    return {std::move(model), std::move(x)};
}

inline GradCheckReport grad_check(ModelKind kind, const GradCheckDims& dims, std::uint64_t seed, double h,
                                  double tol, const GradientMutation& mutate = {}) {
    auto [model, x] = grad_check_case(kind, dims, seed);
    return check_gradients(model, x, h, tol, mutate);
}

}  // namespace taf
