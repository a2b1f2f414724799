#pragma once

#include <string>
#include <vector>

// Minimal self-contained SVG charts for reports.
namespace rwacert::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  double y_min = 0.0;
  double y_max = 1.0;
  std::vector<Series> series;
};

std::string line_chart(const LineChart& chart);

// Cell (r, c) shaded by value / max; row and column labels as given.
std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::vector<std::vector<double>>& values,
                    const std::string& row_axis, const std::string& col_axis);

// Bars for `values` with an optional shaded [lower, upper] band per bin.
struct BinPlot {
  std::string title;
  std::vector<double> values;  // may be empty
  std::vector<double> lower;   // may be empty
  std::vector<double> upper;   // may be empty
  std::vector<double> edges;   // M+1, used for tick labels when present
};

std::string bin_plot(const BinPlot& plot);

std::string escape(const std::string& text);

}  // namespace rwacert::svg
