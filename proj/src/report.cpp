#include "famlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "famlab/error.hpp"
#include "famlab/fileio.hpp"

namespace famlab::report {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";  // also folds -0
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, result.ptr);
}

Csv::Csv(std::vector<std::string> header) : header_(std::move(header)) {}

Csv& Csv::row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw ValidationError("csv: row width does not match header");
    rows_.push_back(std::move(cells));
    return *this;
}

std::string Csv::str() const {
    std::string out;
    const auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) out += ',';
            const bool quote = cells[c].find_first_of(",\"\n") != std::string::npos;
            if (!quote) {
                out += cells[c];
                continue;
            }
            out += '"';
            for (char ch : cells[c]) {
                if (ch == '"') out += '"';
                out += ch;
            }
            out += '"';
        }
        out += '\n';
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out;
}

void write_csv(const std::filesystem::path& path, const Csv& csv, const nlohmann::json& config) {
    write_file_atomic(path, csv.str());
    nlohmann::json sidecar = {{"file", path.filename().string()}, {"rows", csv.rows()}, {"config", config}};
    auto sidecar_path = path;
    sidecar_path += ".json";
    write_json(sidecar_path, sidecar);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value) {
    write_file_atomic(path, value.dump(2) + "\n");
}

namespace {

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(lo <= hi)) lo = 0.0, hi = 1.0;
        if (lo == hi) lo -= 0.5, hi += 0.5;
        const double pad = 0.04 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

}  // namespace

std::string render_svg(const Plot& plot) {
    const double left = 70, right = plot.y2_label.empty() ? 30 : 70, top = 40, bottom = 55;
    const double w = plot.width - left - right;
    const double h = plot.height - top - bottom;

    Range xr, yr, y2r;
    for (const auto& s : plot.series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) (s.right_axis ? y2r : yr).add(v);
    }
    xr.finish();
    yr.finish();
    y2r.finish();
    const auto px = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * w; };
    const auto py = [&](double v, bool second) {
        const Range& r = second ? y2r : yr;
        return top + h - (v - r.lo) / (r.hi - r.lo) * h;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << plot.width << "\" height=\"" << plot.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(plot.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(plot.title) << "</text>\n";
    svg << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int t = 0; t <= 5; ++t) {
        const double xv = xr.lo + (xr.hi - xr.lo) * t / 5.0;
        svg << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + h + 16) << "\" text-anchor=\"middle\">"
            << tick_label(xv) << "</text>\n";
        const double yv = yr.lo + (yr.hi - yr.lo) * t / 5.0;
        svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv, false) + 4) << "\" text-anchor=\"end\">"
            << tick_label(yv) << "</text>\n";
        if (!plot.y2_label.empty()) {
            const double y2v = y2r.lo + (y2r.hi - y2r.lo) * t / 5.0;
            svg << "<text x=\"" << num(left + w + 6) << "\" y=\"" << num(py(y2v, true) + 4) << "\">"
                << tick_label(y2v) << "</text>\n";
        }
    }
    svg << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(plot.height - 12) << "\" text-anchor=\"middle\">"
        << escape(plot.x_label) << "</text>\n";
    svg << "<text transform=\"translate(18," << num(top + h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(plot.y_label) << "</text>\n";
    if (!plot.y2_label.empty())
        svg << "<text transform=\"translate(" << num(plot.width - 14) << "," << num(top + h / 2)
            << ") rotate(90)\" text-anchor=\"middle\">" << escape(plot.y2_label) << "</text>\n";

    for (const auto& s : plot.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.line) {
            svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < n; ++i) svg << (i ? " " : "") << num(px(s.x[i])) << "," << num(py(s.y[i], s.right_axis));
            svg << "\"/>\n";
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(s.y[i])) continue;
                const std::string& color = i < s.point_colors.size() ? s.point_colors[i] : s.color;
                svg << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i], s.right_axis)) << "\" r=\""
                    << num(s.radius) << "\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
            }
        }
    }

    double ly = top + 14;
    for (const auto& s : plot.series) {
        if (s.label.empty()) continue;
        svg << "<rect x=\"" << num(left + 10) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
            << s.color << "\"/>\n";
        svg << "<text x=\"" << num(left + 26) << "\" y=\"" << num(ly) << "\">" << escape(s.label) << "</text>\n";
        ly += 16;
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_svg(const std::filesystem::path& path, const Plot& plot) { write_file_atomic(path, render_svg(plot)); }

}  // namespace famlab::report
