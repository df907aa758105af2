#pragma once

// JSON checkpoints. Doubles are written in shortest round-trip form, so
// every stored value reloads bit-exactly.

#include "tafilter/train.hpp"

#include <json.hpp>

namespace taf {

inline constexpr const char* kCheckpointFormat = "tafilter-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

using nlohmann::json;

inline json matrix_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()},
            {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix matrix_from(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    require(rows >= 0 && cols >= 0 && Eigen::Index(data.size()) == rows * cols,
            "checkpoint: matrix size does not match its data");
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    require(m.allFinite(), "checkpoint: non-finite parameter");
    return m;
}

inline json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from(const json& j) {
    const auto data = j.get<std::vector<double>>();
    Vector v(Eigen::Index(data.size()));
    std::copy(data.begin(), data.end(), v.data());
    require(v.allFinite(), "checkpoint: non-finite parameter");
    return v;
}

inline json head_json(const MlpHead& h) {
    return {{"w1", matrix_json(h.w1)}, {"b1", vector_json(h.b1)},
            {"w2", matrix_json(h.w2)}, {"b2", vector_json(h.b2)}};
}

inline MlpHead head_from(const json& j) {
    MlpHead h{matrix_from(j.at("w1")), vector_from(j.at("b1")), matrix_from(j.at("w2")),
              vector_from(j.at("b2"))};
    require(h.b1.size() == h.w1.rows() && h.w2.cols() == h.w1.rows() && h.b2.size() == h.w2.rows(),
            "checkpoint: inconsistent classifier dimensions");
    return h;
}

inline json filter_json(const FilterParams& p) {
    return {{"center", p.center}, {"log_stride", p.log_stride}, {"log_variance", p.log_variance}};
}

inline FilterParams filter_from(const json& j) {
    FilterParams p{j.at("center").get<double>(), j.at("log_stride").get<double>(),
                   j.at("log_variance").get<double>()};
    require(p.finite(), "checkpoint: non-finite filter parameter");
    return p;
}

inline json model_json(const Model& model) {
    json j;
    j["kind"] = std::string(to_string(kind_of(model)));
    j["dim"] = input_dim(model);
    j["classes"] = head_of(model).classes();
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            j["head"] = head_json(m.head);
            if constexpr (std::is_same_v<M, PyramidModel>) {
                j["taps"] = m.taps;
                json fs = json::array();
                for (const auto& f : m.filters)
                    fs.push_back({{"center", f.placement.center},
                                  {"log_stride", f.placement.log_stride},
                                  {"relative_sigma", f.relative_sigma},
                                  {"depth", f.depth},
                                  {"segment", f.segment}});
                j["filters"] = fs;
            } else if constexpr (std::is_same_v<M, StaticModel>) {
                j["taps"] = m.taps;
                json fs = json::array();
                for (const auto& f : m.filters) fs.push_back(filter_json(f));
                j["filters"] = fs;
            } else if constexpr (std::is_same_v<M, LstmModel>) {
                j["taps"] = m.taps;
                j["filters"] = m.filters;
                j["steps"] = m.steps;
                j["cell"] = {{"w_input", matrix_json(m.cell.w_input)},
                             {"w_hidden", matrix_json(m.cell.w_hidden)},
                             {"bias", vector_json(m.cell.bias)}};
                j["map_weight"] = matrix_json(m.map_weight);
                j["map_bias"] = vector_json(m.map_bias);
            }
        },
        model);
    return j;
}

inline Model model_from(const json& j) {
    ModelKind kind;
    try {
        kind = parse_model_kind(j.at("kind").get<std::string>());
    } catch (const UsageError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    const auto dim = j.at("dim").get<Eigen::Index>();
    MlpHead head = head_from(j.at("head"));
    require(head.classes() == j.at("classes").get<Eigen::Index>(), "checkpoint: class count mismatch");
    switch (kind) {
        case ModelKind::Max:
        case ModelKind::Sum:
        case ModelKind::Mean: {
            PoolingModel m;
            m.mode = kind == ModelKind::Max ? PoolMode::Max : kind == ModelKind::Sum ? PoolMode::Sum : PoolMode::Mean;
            m.head = std::move(head);
            require(m.head.input_width() == dim, "checkpoint: classifier width mismatch");
            return m;
        }
        case ModelKind::Pyramid: {
            PyramidModel m;
            m.taps = j.at("taps").get<int>();
            for (const auto& f : j.at("filters")) {
                PyramidFilter p;
                p.placement.center = f.at("center").get<double>();
                p.placement.log_stride = f.at("log_stride").get<double>();
                p.relative_sigma = f.at("relative_sigma").get<double>();
                p.depth = f.at("depth").get<int>();
                p.segment = f.at("segment").get<int>();
                m.filters.push_back(p);
            }
            m.head = std::move(head);
            require(m.head.input_width() == Eigen::Index(m.filters.size()) * m.taps * dim,
                    "checkpoint: classifier width mismatch");
            return m;
        }
        case ModelKind::Static: {
            StaticModel m;
            m.taps = j.at("taps").get<int>();
            for (const auto& f : j.at("filters")) m.filters.push_back(filter_from(f));
            m.head = std::move(head);
            require(!m.filters.empty() && m.taps >= 1 &&
                        m.head.input_width() == Eigen::Index(m.filters.size()) * m.taps * dim,
                    "checkpoint: classifier width mismatch");
            return m;
        }
        case ModelKind::Lstm: {
            LstmModel m;
            m.taps = j.at("taps").get<int>();
            m.filters = j.at("filters").get<int>();
            m.steps = j.at("steps").get<int>();
            const auto& c = j.at("cell");
            m.cell = {matrix_from(c.at("w_input")), matrix_from(c.at("w_hidden")), vector_from(c.at("bias"))};
            m.map_weight = matrix_from(j.at("map_weight"));
            m.map_bias = vector_from(j.at("map_bias"));
            m.head = std::move(head);
            const Eigen::Index width = Eigen::Index(m.filters) * m.taps * dim;
            const Eigen::Index h = m.cell.hidden_width();
            require(m.steps >= 1 && m.cell.input_width() == width && m.cell.w_input.rows() == 4 * h &&
                        m.cell.bias.size() == 4 * h && m.map_weight.rows() == 3 * m.filters &&
                        m.map_weight.cols() == h && m.map_bias.size() == 3 * m.filters &&
                        m.head.input_width() == width,
                    "checkpoint: inconsistent lstm dimensions");
            return m;
        }
    }
    throw DataError("checkpoint: unknown model kind");
}

}  // namespace detail

/// A trained artifact: a single model, or a one-vs-all ensemble.
struct Checkpoint {
    std::vector<Model> models;
    bool one_vs_all = false;

    Eigen::Index dim() const { return input_dim(models.front()); }
    int classes() const {
        return one_vs_all ? int(models.size()) : int(head_of(models.front()).classes());
    }
    ModelKind kind() const { return kind_of(models.front()); }

    int predict(const Matrix& x) const {
        if (!one_vs_all) return taf::predict(models.front(), x);
        return OneVsAll{models}.predict(x);
    }
};

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
    require(!ckpt.models.empty(), "checkpoint: no models");
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["one_vs_all"] = ckpt.one_vs_all;
    j["models"] = nlohmann::json::array();
    for (const auto& m : ckpt.models) j["models"].push_back(detail::model_json(m));
    return j.dump(1) + "\n";
}

inline Checkpoint parse_checkpoint(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    try {
        require(j.value("format", "") == kCheckpointFormat, "checkpoint: unrecognized format");
        require(j.at("version").get<int>() == kCheckpointVersion,
                "checkpoint: unsupported version " + j.at("version").dump());
        Checkpoint ckpt;
        ckpt.one_vs_all = j.at("one_vs_all").get<bool>();
        for (const auto& m : j.at("models")) ckpt.models.push_back(detail::model_from(m));
        require(!ckpt.models.empty(), "checkpoint: no models");
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
    detail::write_file_atomic(path, serialize_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const fs::path& path) { return parse_checkpoint(detail::read_file(path)); }

}  // namespace taf
