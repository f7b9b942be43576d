#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace repralign::cli {

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Polyline chart. Non-finite points are skipped; with log_x, points at
// x <= 0 are skipped too.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<SvgSeries>& series, bool log_x);

// Scatter plot, one optional text tag per point.
std::string scatter_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<std::string>& tags);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace repralign::cli
