#include "aew/svg.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace aew {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;  // log10 bounds

  [[nodiscard]] double px(double lx) const {
    return kLeft + (lx - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
  }
  [[nodiscard]] double py(double ly) const {
    return kHeight - kBottom - (ly - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
  }
};

void line(std::ostream& os, const Frame& f, double lx0, double ly0, double lx1, double ly1,
          const char* style) {
  os << "<line x1=\"" << format_number(f.px(lx0)) << "\" y1=\"" << format_number(f.py(ly0))
     << "\" x2=\"" << format_number(f.px(lx1)) << "\" y2=\"" << format_number(f.py(ly1))
     << "\" " << style << "/>\n";
}

}  // namespace

void write_svg(std::ostream& os, const LogLogPlot& plot) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < plot.x.size() && i < plot.y.size(); ++i)
    if (plot.x[i] > 0.0 && plot.y[i] > 0.0) {
      lx.push_back(std::log10(plot.x[i]));
      ly.push_back(std::log10(plot.y[i]));
    }
  Frame f{0.0, 1.0, 0.0, 1.0};
  if (!lx.empty()) {
    f.x0 = *std::min_element(lx.begin(), lx.end());
    f.x1 = *std::max_element(lx.begin(), lx.end());
    f.y0 = *std::min_element(ly.begin(), ly.end());
    f.y1 = *std::max_element(ly.begin(), ly.end());
  }
  const double padx = std::max(0.05 * (f.x1 - f.x0), 0.05);
  const double pady = std::max(0.05 * (f.y1 - f.y0), 0.05);
  f.x0 -= padx;
  f.x1 += padx;
  f.y0 -= pady;
  f.y1 += pady;

  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\">"
     << escape(plot.title) << "</text>\n";
  line(os, f, f.x0, f.y0, f.x1, f.y0, "stroke=\"black\"");
  line(os, f, f.x0, f.y0, f.x0, f.y1, "stroke=\"black\"");

  // decade ticks
  for (int k = static_cast<int>(std::ceil(f.x0)); k <= static_cast<int>(std::floor(f.x1)); ++k) {
    line(os, f, k, f.y0, k, f.y0 + 0.02 * (f.y1 - f.y0), "stroke=\"black\"");
    os << "<text x=\"" << format_number(f.px(k)) << "\" y=\"" << kHeight - kBottom + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">1e" << k
       << "</text>\n";
  }
  for (int k = static_cast<int>(std::ceil(f.y0)); k <= static_cast<int>(std::floor(f.y1)); ++k) {
    line(os, f, f.x0, k, f.x0 + 0.02 * (f.x1 - f.x0), k, "stroke=\"black\"");
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << format_number(f.py(k) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << k
       << "</text>\n";
  }
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << escape(plot.x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
     << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
     << escape(plot.y_label) << "</text>\n";

  if (plot.fit && !lx.empty()) {
    const double a = plot.fit->intercept / std::log(10.0);
    const double lo = f.x0 + padx, hi = f.x1 - padx;
    line(os, f, lo, a + plot.fit->slope * lo, hi, a + plot.fit->slope * hi,
         "stroke=\"#1f5fbf\" stroke-width=\"1.5\"");
  }
  if (plot.reference_slope && !lx.empty()) {
    const double lo = f.x0 + padx, hi = f.x1 - padx;
    const double y = ly.front() + *plot.reference_slope * (lo - lx.front());
    line(os, f, lo, y, hi, y + *plot.reference_slope * (hi - lo),
         "stroke=\"#bf3f1f\" stroke-dasharray=\"6 4\"");
  }
  for (std::size_t i = 0; i < lx.size(); ++i)
    os << "<circle cx=\"" << format_number(f.px(lx[i])) << "\" cy=\"" << format_number(f.py(ly[i]))
       << "\" r=\"3.5\" fill=\"black\"/>\n";

  double ly_legend = kTop + 8;
  if (plot.fit) {
    os << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << ly_legend
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f5fbf\">fit slope "
       << format_number(std::round(plot.fit->slope * 1e4) / 1e4) << ", R2 "
       << format_number(std::round(plot.fit->r_squared * 1e4) / 1e4) << "</text>\n";
    ly_legend += 14;
  }
  if (plot.reference_slope)
    os << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << ly_legend
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#bf3f1f\">predicted slope "
       << format_number(*plot.reference_slope) << "</text>\n";
  os << "</svg>\n";
}

std::optional<LogLogPlot> plot_for(const EstimateReport& report, const std::string& x_label,
                                   const std::string& y_label) {
  int positive = 0;
  for (std::size_t i = 0; i < report.plot_x.size() && i < report.plot_y.size(); ++i)
    if (report.plot_x[i] > 0.0 && report.plot_y[i] > 0.0) ++positive;
  if (positive < 2) return std::nullopt;
  LogLogPlot p;
  p.title = report.experiment;
  p.x_label = x_label;
  p.y_label = y_label;
  p.x = report.plot_x;
  p.y = report.plot_y;
  p.fit = report.fit;
  if (report.fit) p.reference_slope = report.prediction;
  return p;
}

}  // namespace aew
