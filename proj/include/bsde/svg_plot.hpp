#pragma once

#include <string>
#include <vector>

namespace bsde {

/// One line series with an optional shaded band (mean +- SD presentation).
struct PlotSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;  // same length as x, or empty
  std::vector<double> band_hi;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// Minimal self-contained SVG line chart; a pure function of its inputs.
void write_line_chart_svg(const std::string& file, const PlotSpec& spec, const PlotSeries& series);

/// Charts rebuilt from the report CSVs in `dir`: loss and relative error
/// against the step (log-scale y, band = mean +- SD) from
/// training_aggregate.csv, and relative error against h from
/// convergence.csv. Returns the files written.
std::vector<std::string> emit_plots(const std::string& dir);

}  // namespace bsde
