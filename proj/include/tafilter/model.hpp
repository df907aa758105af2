#pragma once

// Classifiers over temporal summaries of a feature sequence. Every variant
// ends in the same MLP head; they differ in how the sequence is summarized:
//
//   PoolingModel  global max/sum/mean over time
//   PyramidModel  fixed temporal pyramid of attention filters
//   StaticModel   M learned attention filters shared by all sequences
//   LstmModel     filters re-placed per sequence by an LSTM over S steps
//
// Filter outputs are concatenated in (filter, tap, dimension) order.

#include "tafilter/filterbank.hpp"
#include "tafilter/lstm.hpp"
#include "tafilter/mlp.hpp"
#include "tafilter/pooling.hpp"

#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace taf {

enum class ModelKind { Max, Sum, Mean, Pyramid, Static, Lstm };

inline std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Max: return "max";
        case ModelKind::Sum: return "sum";
        case ModelKind::Mean: return "mean";
        case ModelKind::Pyramid: return "pyramid";
        case ModelKind::Static: return "static";
        case ModelKind::Lstm: return "lstm";
    }
    return "?";
}

inline ModelKind parse_model_kind(std::string_view name) {
    for (auto k : {ModelKind::Max, ModelKind::Sum, ModelKind::Mean, ModelKind::Pyramid,
                   ModelKind::Static, ModelKind::Lstm})
        if (to_string(k) == name) return k;
    throw UsageError("unknown model kind '" + std::string(name) + "'");
}

struct ModelConfig {
    ModelKind kind = ModelKind::Static;
    int filters = 15;
    int taps = 1;
    int pyramid_level = 4;
    int hidden = 256;
    int lstm_hidden = 128;
    int steps = 4;
    double center_init_std = 0.4;

    void validate() const {
        require_arg(filters >= 1, "filters must be >= 1");
        require_arg(taps >= 1, "taps must be >= 1");
        require_arg(pyramid_level >= 1 && pyramid_level <= 12, "pyramid level must be in [1, 12]");
        require_arg(hidden >= 1, "hidden width must be >= 1");
        require_arg(lstm_hidden >= 1, "lstm hidden width must be >= 1");
        require_arg(steps >= 1, "steps must be >= 1");
    }
};

struct PoolingModel {
    PoolMode mode = PoolMode::Mean;
    MlpHead head;

    template <typename F>
    void for_each_param(F&& f) {
        head.for_each_param(f);
    }
};

struct PyramidModel {
    std::vector<PyramidFilter> filters;
    int taps = 1;
    MlpHead head;

    template <typename F>
    void for_each_param(F&& f) {
        head.for_each_param(f);
    }
};

struct StaticModel {
    std::vector<FilterParams> filters;
    int taps = 1;
    MlpHead head;

    template <typename F>
    void for_each_param(F&& f) {
        for (auto& p : filters) {
            f("filters", &p.center, 1);
            f("filters", &p.log_stride, 1);
            f("filters", &p.log_variance, 1);
        }
        head.for_each_param(f);
    }
};

struct LstmModel {
    LstmCell cell;
    Matrix map_weight;  ///< 3M x H_lstm, hidden state -> filter triples
    Vector map_bias;    ///< 3M
    int filters = 1;
    int taps = 1;
    int steps = 4;
    MlpHead head;

    /// Filter placements produced from a hidden state.
    std::vector<FilterParams> placements(const Vector& hidden) const {
        const Vector raw = map_weight * hidden + map_bias;
        std::vector<FilterParams> out(static_cast<size_t>(filters));
        for (int m = 0; m < filters; ++m) out[m] = {raw[3 * m], raw[3 * m + 1], raw[3 * m + 2]};
        return out;
    }

    template <typename F>
    void for_each_param(F&& f) {
        cell.for_each_param(f);
        f("head_map", map_weight.data(), map_weight.size());
        f("head_map", map_bias.data(), map_bias.size());
        head.for_each_param(f);
    }
};

using Model = std::variant<PoolingModel, PyramidModel, StaticModel, LstmModel>;

inline ModelKind kind_of(const Model& model) {
    return std::visit(
        [](const auto& m) -> ModelKind {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, PoolingModel>) {
                switch (m.mode) {
                    case PoolMode::Max: return ModelKind::Max;
                    case PoolMode::Sum: return ModelKind::Sum;
                    case PoolMode::Mean: break;
                }
                return ModelKind::Mean;
            } else if constexpr (std::is_same_v<M, PyramidModel>) {
                return ModelKind::Pyramid;
            } else if constexpr (std::is_same_v<M, StaticModel>) {
                return ModelKind::Static;
            } else {
                return ModelKind::Lstm;
            }
        },
        model);
}

inline const MlpHead& head_of(const Model& model) {
    return std::visit([](const auto& m) -> const MlpHead& { return m.head; }, model);
}

/// Named views over every trainable array, in a fixed order.
struct ParamView {
    std::string_view group;
    std::span<double> values;
};

template <typename M>
std::vector<ParamView> param_views(M& model) {
    std::vector<ParamView> out;
    model.for_each_param([&](std::string_view group, double* data, Eigen::Index n) {
        out.push_back({group, std::span<double>(data, static_cast<size_t>(n))});
    });
    return out;
}

template <typename M>
size_t param_count(const M& model) {
    size_t n = 0;
    const_cast<M&>(model).for_each_param(
        [&](std::string_view, double*, Eigen::Index k) { n += static_cast<size_t>(k); });
    return n;
}

/// Same structure as `model` with every trainable value set to zero.
template <typename M>
M zeros_like(const M& model) {
    M z = model;
    z.for_each_param([](std::string_view, double* data, Eigen::Index n) {
        std::fill(data, data + n, 0.0);
    });
    return z;
}

/// Parameter gradients shaped like the model, plus the input gradient.
template <typename M>
struct Gradient {
    M params;
    Matrix input;
};

// ---------------------------------------------------------------------------
// Construction

inline Model make_model(const ModelConfig& cfg, Eigen::Index dim, Eigen::Index classes, Rng& rng) {
    cfg.validate();
    require_arg(dim >= 1, "feature dimension must be >= 1");
    require_arg(classes >= 2, "need at least two classes");
    const Eigen::Index filter_width = Eigen::Index(cfg.taps) * dim;
    switch (cfg.kind) {
        case ModelKind::Max:
        case ModelKind::Sum:
        case ModelKind::Mean: {
            PoolingModel m;
            m.mode = cfg.kind == ModelKind::Max   ? PoolMode::Max
                     : cfg.kind == ModelKind::Sum ? PoolMode::Sum
                                                  : PoolMode::Mean;
            m.head = MlpHead::random(dim, cfg.hidden, classes, rng);
            return m;
        }
        case ModelKind::Pyramid: {
            PyramidModel m;
            m.filters = pyramid_params(cfg.pyramid_level, cfg.taps);
            m.taps = cfg.taps;
            m.head = MlpHead::random(Eigen::Index(m.filters.size()) * filter_width, cfg.hidden,
                                     classes, rng);
            return m;
        }
        case ModelKind::Static: {
            StaticModel m;
            m.taps = cfg.taps;
            std::normal_distribution<double> center(0.0, cfg.center_init_std);
            for (int i = 0; i < cfg.filters; ++i) m.filters.push_back({center(rng), 0.0, 0.0});
            m.head = MlpHead::random(cfg.filters * filter_width, cfg.hidden, classes, rng);
            return m;
        }
        case ModelKind::Lstm: {
            LstmModel m;
            m.filters = cfg.filters;
            m.taps = cfg.taps;
            m.steps = cfg.steps;
            const Eigen::Index width = cfg.filters * filter_width;
            m.cell = LstmCell::random(width, cfg.lstm_hidden, rng);
            // Zero map: the first step places every filter centered and spanning
            // the whole sequence.
            m.map_weight = Matrix::Zero(3 * cfg.filters, cfg.lstm_hidden);
            m.map_bias = Vector::Zero(3 * cfg.filters);
            m.head = MlpHead::random(width, cfg.hidden, classes, rng);
            return m;
        }
    }
    throw UsageError("unknown model kind");
}

// ---------------------------------------------------------------------------
// Shared filter read / scatter

inline Vector read_concat(const std::vector<FilterBank>& banks, const Matrix& x) {
    if (banks.empty()) return {};
    const Eigen::Index block = banks.front().taps() * x.cols();
    Vector v(Eigen::Index(banks.size()) * block);
    for (size_t m = 0; m < banks.size(); ++m) {
        const Matrix f = read(banks[m], x);
        v.segment(Eigen::Index(m) * block, block) = Eigen::Map<const Vector>(f.data(), block);
    }
    return v;
}

inline Matrix block_of(const Vector& dv, size_t m, Eigen::Index taps, Eigen::Index dim) {
    return Eigen::Map<const Matrix>(dv.data() + Eigen::Index(m) * taps * dim, taps, dim);
}

inline std::vector<FilterBank> materialize_all(const std::vector<FilterParams>& filters,
                                               Eigen::Index length, Eigen::Index taps) {
    std::vector<FilterBank> banks;
    banks.reserve(filters.size());
    for (const auto& p : filters) banks.push_back(materialize(p, length, taps));
    return banks;
}

inline void check_input(const Matrix& x, Eigen::Index expected_dim) {
    require(x.rows() >= 1, "empty feature sequence");
    require(x.cols() == expected_dim, "feature dimension " + std::to_string(x.cols()) +
                                          " does not match model dimension " +
                                          std::to_string(expected_dim));
}

// ---------------------------------------------------------------------------
// Pooling baselines

struct PoolingForward {
    MlpCache head;
    const Vector& probs() const { return head.probs; }
};

inline PoolingForward forward(const PoolingModel& model, const Matrix& x) {
    check_input(x, model.head.input_width());
    return {mlp_forward(model.head, global_pool(x, model.mode))};
}

inline Gradient<PoolingModel> backward(const PoolingModel& model, const Matrix& x,
                                       const PoolingForward& fwd, const Vector& dlogits,
                                       bool want_input = true) {
    Gradient<PoolingModel> g{zeros_like(model), {}};
    const Vector dpooled = mlp_backward(model.head, fwd.head, dlogits, g.params.head);
    if (want_input) g.input = global_pool_backward(x, model.mode, dpooled);
    return g;
}

// ---------------------------------------------------------------------------
// Filter-bank classifiers (fixed pyramid and learned static filters)

struct FilterForward {
    std::vector<FilterBank> banks;
    MlpCache head;
    const Vector& probs() const { return head.probs; }
};

inline std::vector<FilterBank> materialize_all(const std::vector<PyramidFilter>& filters,
                                               Eigen::Index length, Eigen::Index taps) {
    std::vector<FilterBank> banks;
    banks.reserve(filters.size());
    for (const auto& p : filters) banks.push_back(materialize(p.at_length(length), length, taps));
    return banks;
}

inline FilterForward forward(const PyramidModel& model, const Matrix& x) {
    check_input(x, model.head.input_width() / (Eigen::Index(model.filters.size()) * model.taps));
    FilterForward out;
    out.banks = materialize_all(model.filters, x.rows(), model.taps);
    out.head = mlp_forward(model.head, read_concat(out.banks, x));
    return out;
}

inline Gradient<PyramidModel> backward(const PyramidModel& model, const Matrix& x,
                                       const FilterForward& fwd, const Vector& dlogits,
                                       bool want_input = true) {
    Gradient<PyramidModel> g{zeros_like(model), {}};
    const Vector dv = mlp_backward(model.head, fwd.head, dlogits, g.params.head);
    if (want_input) {
        g.input = Matrix::Zero(x.rows(), x.cols());
        for (size_t m = 0; m < fwd.banks.size(); ++m)
            g.input.noalias() +=
                fwd.banks[m].weights.transpose() * block_of(dv, m, model.taps, x.cols());
    }
    return g;
}

inline FilterForward forward(const StaticModel& model, const Matrix& x) {
    require(!model.filters.empty(), "static model has no filters");
    check_input(x, model.head.input_width() / (Eigen::Index(model.filters.size()) * model.taps));
    FilterForward out;
    out.banks = materialize_all(model.filters, x.rows(), model.taps);
    out.head = mlp_forward(model.head, read_concat(out.banks, x));
    return out;
}

inline Gradient<StaticModel> backward(const StaticModel& model, const Matrix& x,
                                      const FilterForward& fwd, const Vector& dlogits,
                                      bool want_input = true) {
    Gradient<StaticModel> g{zeros_like(model), {}};
    const Vector dv = mlp_backward(model.head, fwd.head, dlogits, g.params.head);
    if (want_input) g.input = Matrix::Zero(x.rows(), x.cols());
    for (size_t m = 0; m < fwd.banks.size(); ++m) {
        const auto fg =
            read_backward(fwd.banks[m], x, block_of(dv, m, model.taps, x.cols()), want_input);
        g.params.filters[m] = fg.params;
        if (want_input) g.input += fg.input;
    }
    return g;
}

// ---------------------------------------------------------------------------
// LSTM-adaptive filters

struct LstmForward {
    std::vector<std::vector<FilterParams>> trace;  ///< S entries of M placements
    std::vector<std::vector<FilterBank>> banks;    ///< per step
    std::vector<LstmStep> cells;                   ///< S - 1 cell steps
    MlpCache head;
    const Vector& probs() const { return head.probs; }
};

/// Step s reads with placements from h_{s-1} (h_0 = 0); the reads feed the
/// cell, and the last step's reads feed the classifier. The cell is not run
/// after the last read since its state would be unused.
inline LstmForward forward(const LstmModel& model, const Matrix& x) {
    check_input(x, model.cell.input_width() / (Eigen::Index(model.filters) * model.taps));
    require(model.steps >= 1, "lstm model needs at least one step");
    const Eigen::Index hidden = model.cell.hidden_width();
    LstmForward out;
    Vector h = Vector::Zero(hidden);
    Vector c = Vector::Zero(hidden);
    for (int s = 0; s < model.steps; ++s) {
        out.trace.push_back(model.placements(h));
        out.banks.push_back(materialize_all(out.trace.back(), x.rows(), model.taps));
        Vector v = read_concat(out.banks.back(), x);
        if (s + 1 == model.steps) {
            out.head = mlp_forward(model.head, std::move(v));
        } else {
            out.cells.push_back(lstm_step(model.cell, std::move(v), h, c));
            h = out.cells.back().hidden;
            c = out.cells.back().cell;
        }
    }
    return out;
}

inline Gradient<LstmModel> backward(const LstmModel& model, const Matrix& x,
                                    const LstmForward& fwd, const Vector& dlogits,
                                    bool want_input = true) {
    Gradient<LstmModel> g{zeros_like(model), {}};
    if (want_input) g.input = Matrix::Zero(x.rows(), x.cols());
    const Eigen::Index hidden = model.cell.hidden_width();

    Vector dv = mlp_backward(model.head, fwd.head, dlogits, g.params.head);
    Vector dh = Vector::Zero(hidden);  // dL/dh_s for the state entering step s + 1
    Vector dc = Vector::Zero(hidden);
    for (int s = model.steps - 1; s >= 0; --s) {
        if (s + 1 < model.steps) {
            const auto sg = lstm_step_backward(model.cell, fwd.cells[s], dh, dc, g.params.cell);
            dv = sg.input;
            dh = sg.hidden_prev;
            dc = sg.cell_prev;
        } else {
            dh.setZero();
            dc.setZero();
        }
        // Placements at step s came from h_{s-1}.
        Vector dplace(3 * model.filters);
        for (int m = 0; m < model.filters; ++m) {
            const auto fg = read_backward(fwd.banks[s][m], x,
                                          block_of(dv, size_t(m), model.taps, x.cols()), want_input);
            dplace[3 * m] = fg.params.center;
            dplace[3 * m + 1] = fg.params.log_stride;
            dplace[3 * m + 2] = fg.params.log_variance;
            if (want_input) g.input += fg.input;
        }
        g.params.map_bias += dplace;
        if (s > 0) {
            g.params.map_weight.noalias() += dplace * fwd.cells[s - 1].hidden.transpose();
            dh.noalias() += model.map_weight.transpose() * dplace;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Variant dispatch

inline Vector predict_probs(const Model& model, const Matrix& x) {
    return std::visit([&](const auto& m) { return Vector(forward(m, x).probs()); }, model);
}

inline int predict(const Model& model, const Matrix& x) { return argmax(predict_probs(model, x)); }

inline Eigen::Index input_dim(const Model& model) {
    return std::visit(
        [](const auto& m) -> Eigen::Index {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, PoolingModel>) {
                return m.head.input_width();
            } else if constexpr (std::is_same_v<M, LstmModel>) {
                return m.cell.input_width() / (Eigen::Index(m.filters) * m.taps);
            } else {
                return m.head.input_width() / (Eigen::Index(m.filters.size()) * m.taps);
            }
        },
        model);
}

}  // namespace taf
