#pragma once

// Feature files, manifests, and the synthetic planted-motif benchmark.
//
// TAF1 binary layout (little endian):
//   bytes 0..3   "TAF1"
//   u32          T (frames)
//   u32          D (feature dimension)
//   f32[T * D]   row-major payload

#include "tafilter/filterbank.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace taf {

namespace fs = std::filesystem;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes through a temporary sibling and renames into place.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(bool(out), "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(bool(out), "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline bool is_csv(const fs::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv";
}

}  // namespace detail

inline constexpr std::array<char, 4> kFeatureMagic = {'T', 'A', 'F', '1'};

inline std::string encode_features(const Matrix& x) {
    require(x.rows() >= 1 && x.cols() >= 1, "feature sequence must have T >= 1 and D >= 1");
    require(x.allFinite(), "feature sequence contains non-finite values");
    std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
    detail::put_u32(out, static_cast<std::uint32_t>(x.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(x.cols()));
    out.reserve(out.size() + 4 * size_t(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
        detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x.data()[i])));
    return out;
}

inline Matrix decode_features(const std::string& bytes) {
    require(bytes.size() >= 12, "feature file shorter than its header");
    require(std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin()),
            "bad magic: not a TAF1 feature file");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint64_t rows = detail::get_u32(p + 4);
    const std::uint64_t cols = detail::get_u32(p + 8);
    require(rows >= 1 && cols >= 1, "feature file declares an empty sequence");
    const std::uint64_t expected = 12 + 4 * rows * cols;
    require(bytes.size() >= expected, "truncated feature payload: expected " +
                                          std::to_string(rows * cols) + " floats, found " +
                                          std::to_string((bytes.size() - 12) / 4));
    require(bytes.size() == expected, "trailing bytes after feature payload");
    Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const float v = std::bit_cast<float>(detail::get_u32(p + 12 + 4 * i));
        require(std::isfinite(v), "feature file contains NaN or Inf");
        x.data()[i] = v;
    }
    return x;
}

inline Matrix parse_csv_features(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            size_t used = 0;
            double v = 0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                throw DataError("csv: cannot parse '" + cell + "'");
            }
            require(cell.find_first_not_of(" \t", used) == std::string::npos,
                    "csv: cannot parse '" + cell + "'");
            require(std::isfinite(v), "csv: non-finite value");
            row.push_back(v);
        }
        require(rows.empty() || row.size() == rows.front().size(), "csv: ragged rows");
        rows.push_back(std::move(row));
    }
    require(!rows.empty() && !rows.front().empty(), "csv: empty feature sequence");
    Matrix x(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (size_t t = 0; t < rows.size(); ++t)
        for (size_t d = 0; d < rows[t].size(); ++d) x(Eigen::Index(t), Eigen::Index(d)) = rows[t][d];
    return x;
}

/// Loads a TAF1 file, or CSV (one frame per line) when the extension is .csv.
inline FeatureSequence load_features(const fs::path& path) {
    const std::string bytes = detail::read_file(path);
    FeatureSequence seq;
    seq.data = detail::is_csv(path) ? parse_csv_features(bytes) : decode_features(bytes);
    seq.id = path.string();
    return seq;
}

inline void write_features(const fs::path& path, const FeatureSequence& x) {
    if (detail::is_csv(path)) {
        require(x.length() >= 1 && x.dim() >= 1, "feature sequence must have T >= 1 and D >= 1");
        std::ostringstream out;
        out << std::setprecision(17);
        for (Eigen::Index t = 0; t < x.length(); ++t) {
            for (Eigen::Index d = 0; d < x.dim(); ++d) out << (d ? "," : "") << x.data(t, d);
            out << '\n';
        }
        detail::write_file_atomic(path, out.str());
        return;
    }
    detail::write_file_atomic(path, encode_features(x.data));
}

// ---------------------------------------------------------------------------
// Manifests

enum class Split { Train, Test };

struct ManifestEntry {
    fs::path path;  ///< as written in the manifest
    int label = 0;
    Split split = Split::Train;
};

struct Manifest {
    fs::path base;  ///< directory relative paths resolve against
    std::vector<ManifestEntry> entries;
    int classes = 0;

    fs::path resolve(const ManifestEntry& e) const { return e.path.is_absolute() ? e.path : base / e.path; }
};

inline std::string format_manifest(const Manifest& m) {
    std::ostringstream out;
    out << "# classes=" << m.classes << '\n';
    for (const auto& e : m.entries)
        out << e.path.generic_string() << '\t' << e.label << '\t'
            << (e.split == Split::Train ? "train" : "test") << '\n';
    return out.str();
}

/// Parses `path<TAB>label<TAB>split` lines. Lines starting with '#' are
/// comments; `# classes=C` fixes the class count (otherwise max label + 1).
inline Manifest parse_manifest(const std::string& text, const fs::path& base) {
    Manifest m;
    m.base = base;
    int declared = 0;
    int max_label = -1;
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto pos = line.find("classes=");
            if (pos != std::string::npos) declared = std::atoi(line.c_str() + pos + 8);
            continue;
        }
        std::vector<std::string> fields;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, '\t')) fields.push_back(cell);
        const std::string where = "manifest line " + std::to_string(lineno);
        require(fields.size() == 3, where + ": expected path<TAB>label<TAB>split");
        ManifestEntry e;
        e.path = fields[0];
        try {
            size_t used = 0;
            e.label = std::stoi(fields[1], &used);
            require(used == fields[1].size(), where + ": bad label");
        } catch (const std::logic_error&) {
            throw DataError(where + ": bad label '" + fields[1] + "'");
        }
        require(e.label >= 0, where + ": negative label");
        if (fields[2] == "train") e.split = Split::Train;
        else if (fields[2] == "test") e.split = Split::Test;
        else throw DataError(where + ": split must be train or test");
        max_label = std::max(max_label, e.label);
        m.entries.push_back(std::move(e));
    }
    m.classes = declared > 0 ? declared : max_label + 1;
    require(max_label < m.classes, "manifest label out of range for declared class count");
    require(std::any_of(m.entries.begin(), m.entries.end(),
                        [](const ManifestEntry& e) { return e.split == Split::Train; }),
            "manifest has no train entries");
    return m;
}

inline Manifest load_manifest(const fs::path& path) {
    Manifest m = parse_manifest(detail::read_file(path), path.parent_path());
    for (const auto& e : m.entries)
        require(fs::exists(m.resolve(e)), "manifest entry not found: " + m.resolve(e).string());
    return m;
}

struct Dataset {
    std::vector<FeatureSequence> train;
    std::vector<FeatureSequence> test;
    int classes = 0;
    Eigen::Index dim = 0;
};

inline Dataset load_dataset(const Manifest& m) {
    Dataset ds;
    ds.classes = m.classes;
    for (const auto& e : m.entries) {
        FeatureSequence seq = load_features(m.resolve(e));
        seq.label = e.label;
        seq.id = e.path.generic_string();
        if (ds.dim == 0) ds.dim = seq.dim();
        require(seq.dim() == ds.dim, "inconsistent feature dimension in " + seq.id);
        (e.split == Split::Train ? ds.train : ds.test).push_back(std::move(seq));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
//
// Each class owns a sustained motif (one feature vector held for motif_len
// frames) placed at a class-specific relative position on top of white
// noise. Motifs are centered across classes, and each sequence has the
// motif's temporal mean subtracted from every frame, so the temporal average
// of a sequence carries no class signal; only a read localized on the motif
// does.

struct SynthSpec {
    int classes = 5;
    int dim = 16;
    int motif_len = 6;
    std::vector<double> positions;  ///< per class; empty means (c + 0.5) / C
    double jitter = 0.02;
    int min_length = 40;
    int max_length = 80;
    double noise_std = 1.0;
    double motif_scale = 0.5;
    int train_count = 200;
    int test_count = 100;
    std::uint64_t seed = 42;

    double position(int c) const {
        return positions.empty() ? (c + 0.5) / classes : positions[size_t(c)];
    }

    void validate() const {
        require_arg(classes >= 2, "synth: need at least 2 classes");
        require_arg(dim >= 1, "synth: dim must be >= 1");
        require_arg(motif_len >= 1, "synth: motif length must be >= 1");
        require_arg(min_length >= 1 && max_length >= min_length, "synth: bad length range");
        require_arg(motif_len < min_length, "synth: motif must be shorter than the shortest sequence");
        require_arg(positions.empty() || positions.size() == size_t(classes),
                    "synth: need one position per class");
        for (int c = 0; c < classes; ++c)
            require_arg(position(c) > 0.0 && position(c) < 1.0, "synth: positions must lie in (0, 1)");
        require_arg(jitter >= 0.0 && noise_std >= 0.0 && motif_scale >= 0.0,
                    "synth: jitter, noise and scale must be non-negative");
        require_arg(train_count >= 1 && test_count >= 0, "synth: need at least one train sample");
    }
};

struct PlantedSample {
    std::string id;
    int label = 0;
    Split split = Split::Train;
    int length = 0;
    int start = 0;            ///< first motif frame
    double position = 0.0;    ///< motif center / T
};

struct SynthData {
    Dataset dataset;
    std::vector<Matrix> motifs;  ///< per class, motif_len x D
    std::vector<PlantedSample> planted;  ///< train then test, aligned with dataset order
};

inline std::vector<Matrix> synth_motifs(const SynthSpec& spec, Rng& rng) {
    std::vector<Matrix> motifs;
    Matrix mean = Matrix::Zero(spec.motif_len, spec.dim);
    for (int c = 0; c < spec.classes; ++c) {
        const Vector level = gaussian_vector(spec.dim, spec.motif_scale, rng);
        Matrix m = level.transpose().replicate(spec.motif_len, 1);
        mean += m;
        motifs.push_back(std::move(m));
    }
    mean /= spec.classes;
    for (auto& m : motifs) m -= mean;
    return motifs;
}

/// Generates the benchmark in memory; nothing touches disk.
inline SynthData synth_sample(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SynthData out;
    out.motifs = synth_motifs(spec, rng);
    out.dataset.classes = spec.classes;
    out.dataset.dim = spec.dim;

    std::uniform_int_distribution<int> length_dist(spec.min_length, spec.max_length);
    std::normal_distribution<double> jitter(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Split split : {Split::Train, Split::Test}) {
        const int count = split == Split::Train ? spec.train_count : spec.test_count;
        const char* name = split == Split::Train ? "train" : "test";
        for (int i = 0; i < count; ++i) {
            const int label = i % spec.classes;
            const int length = length_dist(rng);
            FeatureSequence seq;
            seq.label = label;
            std::ostringstream id;
            id << name << '/' << std::setw(5) << std::setfill('0') << i << ".taf";
            seq.id = id.str();
            seq.data.resize(length, spec.dim);
            for (Eigen::Index k = 0; k < seq.data.size(); ++k)
                seq.data.data()[k] = spec.noise_std * noise(rng);
            const double rel = std::clamp(spec.position(label) + spec.jitter * jitter(rng), 0.0, 1.0);
            const double half = 0.5 * (spec.motif_len - 1);
            const int start = std::clamp(static_cast<int>(std::lround(rel * length - half)), 0,
                                         length - spec.motif_len);
            const Matrix& motif = out.motifs[size_t(label)];
            seq.data.middleRows(start, spec.motif_len) += motif;
            seq.data.rowwise() -= motif.colwise().sum() / double(length);
            // Match what a reload from the f32 file yields.
            seq.data = seq.data.cast<float>().cast<double>();

            out.planted.push_back({seq.id, label, split, length, start, (start + half) / length});
            (split == Split::Train ? out.dataset.train : out.dataset.test).push_back(std::move(seq));
        }
    }
    return out;
}

inline std::string format_planted(const std::vector<PlantedSample>& planted) {
    std::ostringstream out;
    out << "# path\tlabel\tsplit\tlength\tstart\tposition\n" << std::setprecision(17);
    for (const auto& p : planted)
        out << p.id << '\t' << p.label << '\t' << (p.split == Split::Train ? "train" : "test") << '\t'
            << p.length << '\t' << p.start << '\t' << p.position << '\n';
    return out.str();
}

inline std::vector<PlantedSample> parse_planted(const std::string& text) {
    std::vector<PlantedSample> out;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty() || line.front() == '#') continue;
        std::istringstream cells(line);
        PlantedSample p;
        std::string split;
        require(bool(cells >> p.id >> p.label >> split >> p.length >> p.start >> p.position),
                "malformed planted-position line: " + line);
        p.split = split == "train" ? Split::Train : Split::Test;
        out.push_back(std::move(p));
    }
    return out;
}

/// Generates the benchmark and writes features, `manifest.tsv` and
/// `planted.tsv` under `dir`. Returns the manifest path.
inline fs::path synth_generate(const SynthSpec& spec, const fs::path& dir, SynthData* keep = nullptr) {
    SynthData data = synth_sample(spec);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), "cannot create output directory " + dir.string());

    Manifest manifest;
    manifest.base = dir;
    manifest.classes = spec.classes;
    auto emit = [&](const std::vector<FeatureSequence>& seqs, Split split) {
        for (const auto& s : seqs) {
            write_features(dir / s.id, s);
            manifest.entries.push_back({s.id, s.label, split});
        }
    };
    emit(data.dataset.train, Split::Train);
    emit(data.dataset.test, Split::Test);
    detail::write_file_atomic(dir / "manifest.tsv", format_manifest(manifest));
    detail::write_file_atomic(dir / "planted.tsv", format_planted(data.planted));
    if (keep) *keep = std::move(data);
    return dir / "manifest.tsv";
}

}  // namespace taf
