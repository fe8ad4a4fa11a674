#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace famlab::report {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

class Csv {
public:
    explicit Csv(std::vector<std::string> header);

    Csv& row(std::vector<std::string> cells);
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes `csv` to path and its audit sidecar `<path>.json` holding `config`.
void write_csv(const std::filesystem::path& path, const Csv& csv, const nlohmann::json& config);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x;
    std::vector<double> y;
    bool line = false;
    bool right_axis = false;
    double radius = 2.0;
    std::vector<std::string> point_colors;  // optional per-point override
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::string y2_label;
    std::vector<Series> series;
    int width = 720;
    int height = 440;
};

std::string render_svg(const Plot& plot);
void write_svg(const std::filesystem::path& path, const Plot& plot);

}  // namespace famlab::report
