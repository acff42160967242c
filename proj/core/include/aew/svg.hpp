#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aew/report.hpp"

namespace aew {

struct LogLogPlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<double> y;
  std::optional<PowerFit> fit;
  std::optional<double> reference_slope;  ///< drawn through the first point
};

/// Self-contained SVG: points, fitted line and the reference slope.
void write_svg(std::ostream& os, const LogLogPlot& plot);

/// Plot of a report's plot series; nullopt when it has fewer than two positive points.
std::optional<LogLogPlot> plot_for(const EstimateReport& report, const std::string& x_label,
                                   const std::string& y_label);

}  // namespace aew
