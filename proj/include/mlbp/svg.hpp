#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mlbp/types.hpp"

namespace mlbp {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal hand-emitted SVG line chart: axes, optional log scaling, legend.
/// Non-finite points (and non-positive ones on log axes) are skipped.
void write_svg_line_chart(const std::filesystem::path& path,
                          const std::vector<Series>& series, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          bool logx = false, bool logy = false);

/// Plot columns of a headered CSV: x_col against each of y_cols (all names
/// from the header row). The SVG is a pure function of the CSV contents.
void plot_csv(const std::filesystem::path& csv_path, const std::filesystem::path& svg_path,
              const std::string& x_col, const std::vector<std::string>& y_cols,
              bool logx = false, bool logy = false);

}  // namespace mlbp
