#pragma once

// Learned filter placements as table rows and as an SVG picture.

#include "tafilter/model.hpp"

#include <array>
#include <optional>
#include <sstream>

namespace taf {

struct PlacementRow {
    int filter = 0;
    int iteration = 1;
    double center = 0;      ///< g in frames
    double stride = 0;      ///< delta in frames
    double sigma = 0;
    double center_rel = 0;  ///< g / T
    double span_rel = 0;    ///< (N - 1) * delta / T
};

struct Placements {
    Eigen::Index length = 0;
    int taps = 1;
    std::vector<PlacementRow> rows;
    bool fallback = false;  ///< adaptive model inspected without features
};

namespace detail {

inline PlacementRow placement_row(int filter, int iteration, const FilterParams& p, Eigen::Index length,
                                  int taps) {
    PlacementRow r;
    r.filter = filter;
    r.iteration = iteration;
    r.center = center_frames(p, length);
    r.stride = stride_frames(p, length, taps);
    r.sigma = std::sqrt(p.variance());
    r.center_rel = r.center / double(length);
    r.span_rel = r.stride * (taps - 1) / double(length);
    return r;
}

}  // namespace detail

/// Placements for a sequence of `length` frames. Adaptive models need the
/// sequence itself; without it only the first-step placement is reported.
inline Placements inspect_placements(const Model& model, Eigen::Index length,
                                     const Matrix* features = nullptr) {
    require_arg(length >= 1, "inspect: length must be >= 1");
    Placements out;
    out.length = features ? features->rows() : length;
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, PoolingModel>) {
                throw DataError("inspect: " + std::string(to_string(m.mode)) + "-pooling models have no filters");
            } else if constexpr (std::is_same_v<M, PyramidModel>) {
                out.taps = m.taps;
                for (size_t f = 0; f < m.filters.size(); ++f)
                    out.rows.push_back(detail::placement_row(int(f), 1, m.filters[f].at_length(out.length),
                                                             out.length, m.taps));
            } else if constexpr (std::is_same_v<M, StaticModel>) {
                out.taps = m.taps;
                for (size_t f = 0; f < m.filters.size(); ++f)
                    out.rows.push_back(detail::placement_row(int(f), 1, m.filters[f], out.length, m.taps));
            } else {
                out.taps = m.taps;
                std::vector<std::vector<FilterParams>> trace;
                if (features) {
                    trace = forward(m, *features).trace;
                } else {
                    trace.push_back(m.placements(Vector::Zero(m.cell.hidden_width())));
                    out.fallback = true;
                }
                for (size_t s = 0; s < trace.size(); ++s)
                    for (size_t f = 0; f < trace[s].size(); ++f)
                        out.rows.push_back(
                            detail::placement_row(int(f), int(s + 1), trace[s][f], out.length, m.taps));
            }
        },
        model);
    return out;
}

inline std::string placements_tsv(const Placements& p) {
    std::ostringstream out;
    out.precision(10);
    out << "m\titeration\tg\tdelta\tsigma\tg_rel\tdelta_rel\n";
    for (const auto& r : p.rows)
        out << r.filter << '\t' << r.iteration << '\t' << r.center << '\t' << r.stride << '\t' << r.sigma << '\t'
            << r.center_rel << '\t' << r.span_rel << '\n';
    return out.str();
}

struct TsvPlacement {
    int filter = 0;
    int iteration = 0;
    double center_rel = 0;
    double span_rel = 0;
};

inline std::vector<TsvPlacement> parse_placements_tsv(const std::string& text) {
    std::vector<TsvPlacement> out;
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        std::istringstream cells(line);
        TsvPlacement r;
        double g = 0, delta = 0, sigma = 0;
        require(bool(cells >> r.filter >> r.iteration >> g >> delta >> sigma >> r.center_rel >> r.span_rel),
                "malformed placement row: " + line);
        out.push_back(r);
    }
    return out;
}

/// One lane per filter, one color per iteration; each tap drawn as its
/// Gaussian envelope over the time axis.
inline std::string placements_svg(const Placements& p) {
    constexpr int kWidth = 800;
    constexpr int kLaneHeight = 80;
    constexpr int kSamples = 256;
    constexpr double kLeft = 60.0;
    constexpr double kRight = 20.0;
    constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    int lanes = 0;
    for (const auto& r : p.rows) lanes = std::max(lanes, r.filter + 1);
    lanes = std::max(lanes, 1);
    const int height = kLaneHeight * lanes;
    const double length = double(p.length);
    const double plot_width = kWidth - kLeft - kRight;
    auto x_of = [&](double t) { return kLeft + plot_width * t / length; };

    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (int lane = 0; lane < lanes; ++lane) {
        const double base = (lane + 1) * kLaneHeight - 12.0;
        svg << "<line x1=\"" << kLeft << "\" y1=\"" << base << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << base
            << "\" stroke=\"#888\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"6\" y=\"" << base - 20 << "\" font-family=\"sans-serif\" font-size=\"12\">filter "
            << lane << "</text>\n";
    }
    for (const auto& r : p.rows) {
        const double base = (r.filter + 1) * kLaneHeight - 12.0;
        const double amplitude = kLaneHeight - 24.0;
        const char* color = kColors[size_t(r.iteration - 1) % kColors.size()];
        for (int i = 0; i < p.taps; ++i) {
            const double mu = r.center + tap_offset(i, p.taps) * r.stride;
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (int k = 0; k < kSamples; ++k) {
                const double t = length * k / (kSamples - 1);
                const double d = (t - mu) / r.sigma;
                svg << x_of(t) << ',' << base - amplitude * std::exp(-0.5 * d * d) << (k + 1 < kSamples ? " " : "");
            }
            svg << "\"/>\n";
        }
    }
    svg << "<text x=\"" << kLeft << "\" y=\"" << height - 1 << "\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n";
    svg << "<text x=\"" << kWidth - kRight - 30 << "\" y=\"" << height - 1
        << "\" font-family=\"sans-serif\" font-size=\"10\">T=" << p.length << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace taf
