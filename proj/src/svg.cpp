#include "rwacert/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rwacert::svg {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

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

std::string line_chart(const LineChart& chart) {
  const int W = 640, H = 400, L = 60, R = 150, T = 36, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  double xmin = INFINITY, xmax = -INFINITY;
  for (const auto& s : chart.series) {
    for (double x : s.x) {
      double v = chart.log_x ? std::log10(x) : x;
      if (!std::isfinite(v)) continue;
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
  }
  if (!(xmax > xmin)) {
    xmin = std::isfinite(xmin) ? xmin - 1 : 0;
    xmax = xmin + 2;
  }
  const double ymin = chart.y_min, ymax = chart.y_max > chart.y_min ? chart.y_max : chart.y_min + 1;
  auto px = [&](double x) { return L + ((chart.log_x ? std::log10(x) : x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return T + (1.0 - (std::clamp(y, ymin, ymax) - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream o;
  o << header(W, H);
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(chart.title)
    << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double y = ymin + (ymax - ymin) * i / 4.0;
    o << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << num(py(y)) << "\" y2=\"" << num(py(y))
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << tick(y) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    double v = xmin + (xmax - xmin) * i / 4.0;
    double x = chart.log_x ? std::pow(10.0, v) : v;
    o << "<text x=\"" << num(L + pw * i / 4.0) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << tick(x)
      << "</text>\n";
  }
  o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << escape(chart.x_label)
    << "</text>\n";
  o << "<text transform=\"translate(16," << T + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(chart.y_label) << "</text>\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& ser = chart.series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      pts += num(px(ser.x[i])) + "," + num(py(ser.y[i])) + " ";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      o << "<circle cx=\"" << num(px(ser.x[i])) << "\" cy=\"" << num(py(ser.y[i])) << "\" r=\"2.5\" fill=\"" << color
        << "\"/>\n";
    }
    double ly = T + 12 + 16.0 * static_cast<double>(s);
    o << "<line x1=\"" << L + pw + 12 << "\" x2=\"" << L + pw + 32 << "\" y1=\"" << num(ly) << "\" y2=\"" << num(ly)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << L + pw + 38 << "\" y=\"" << num(ly + 4) << "\">" << escape(ser.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string heatmap(const std::string& title, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::vector<std::vector<double>>& values,
                    const std::string& row_axis, const std::string& col_axis) {
  const int cell = 34, L = 70, T = 60;
  const int W = L + cell * static_cast<int>(col_labels.size()) + 20;
  const int H = T + cell * static_cast<int>(row_labels.size()) + 20;
  double vmax = 0.0;
  for (const auto& r : values)
    for (double v : r) vmax = std::max(vmax, v);
  std::ostringstream o;
  o << header(W, H);
  o << "<text x=\"" << W / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  o << "<text x=\"" << L + cell * col_labels.size() / 2 << "\" y=\"34\" text-anchor=\"middle\">" << escape(col_axis)
    << "</text>\n";
  o << "<text transform=\"translate(14," << T + cell * row_labels.size() / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(row_axis) << "</text>\n";
  for (std::size_t c = 0; c < col_labels.size(); ++c) {
    o << "<text x=\"" << L + cell * c + cell / 2 << "\" y=\"" << T - 6 << "\" text-anchor=\"middle\">"
      << escape(col_labels[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < row_labels.size(); ++r) {
    o << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * r + cell / 2 + 4 << "\" text-anchor=\"end\">"
      << escape(row_labels[r]) << "</text>\n";
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
      double v = r < values.size() && c < values[r].size() ? values[r][c] : 0.0;
      double t = vmax > 0 ? v / vmax : 0.0;
      int shade = static_cast<int>(std::lround(255 - 200 * std::sqrt(t)));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
      o << "<rect x=\"" << L + cell * c << "\" y=\"" << T + cell * r << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << fill << "\" stroke=\"#999\"/>\n";
      if (v != 0.0) {
        o << "<text x=\"" << L + cell * c + cell / 2 << "\" y=\"" << T + cell * r + cell / 2 + 4
          << "\" text-anchor=\"middle\" font-size=\"10\">" << tick(v) << "</text>\n";
      }
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string bin_plot(const BinPlot& plot) {
  const int W = 640, H = 320, L = 50, R = 20, T = 36, B = 50;
  const std::size_t M = std::max({plot.values.size(), plot.lower.size(), plot.upper.size()});
  const double pw = W - L - R, ph = H - T - B;
  double vmax = 0.0;
  for (const auto* v : {&plot.values, &plot.lower, &plot.upper})
    for (double x : *v) vmax = std::max(vmax, x);
  if (vmax <= 0) vmax = 1.0;
  const double bw = M ? pw / static_cast<double>(M) : pw;
  auto py = [&](double y) { return T + (1.0 - y / vmax) * ph; };
  std::ostringstream o;
  o << header(W, H);
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(plot.title)
    << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (std::size_t i = 0; i < M; ++i) {
    double x = L + bw * static_cast<double>(i);
    if (i < plot.upper.size()) {
      double lo = i < plot.lower.size() ? plot.lower[i] : 0.0;
      o << "<rect x=\"" << num(x + 1) << "\" y=\"" << num(py(plot.upper[i])) << "\" width=\"" << num(bw - 2)
        << "\" height=\"" << num(py(lo) - py(plot.upper[i])) << "\" fill=\"#f4a582\" fill-opacity=\"0.6\"/>\n";
    }
    if (i < plot.values.size()) {
      o << "<rect x=\"" << num(x + bw * 0.3) << "\" y=\"" << num(py(plot.values[i])) << "\" width=\"" << num(bw * 0.4)
        << "\" height=\"" << num(py(0) - py(plot.values[i])) << "\" fill=\"#2166ac\"/>\n";
    }
    if (plot.edges.size() == M + 1 && (i % 4 == 0)) {
      o << "<text x=\"" << num(x) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << tick(plot.edges[i])
        << "</text>\n";
    }
  }
  for (int i = 0; i <= 4; ++i) {
    double y = vmax * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << tick(y) << "</text>\n";
  }
  o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">bin</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace rwacert::svg
