#include "gradorder/svg_plot.hpp"

#include "gradorder/errors.hpp"
#include "gradorder/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace gradorder {

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Series {
  std::string name;
  std::vector<double> lo, mid, hi;
};

}  // namespace

std::string render_band_chart(const Json& summary, const std::string& metric) {
  if (!summary.contains("orderers") || !summary["orderers"].is_object())
    throw InvalidArgumentError("render_band_chart: summary has no orderers section");

  std::vector<Series> series;
  std::vector<std::string> available;
  for (const auto& [name, entry] : summary["orderers"].items()) {
    if (!entry.contains("metrics") || entry["metrics"].is_null()) continue;
    const Json& metrics = entry["metrics"];
    if (available.empty())
      for (const auto& m : metrics.items()) available.push_back(m.key());
    if (!metrics.contains(metric)) continue;
    Series s;
    s.name = name;
    s.lo = metrics[metric]["min"].get<std::vector<double>>();
    s.mid = metrics[metric]["median"].get<std::vector<double>>();
    s.hi = metrics[metric]["max"].get<std::vector<double>>();
    if (!s.mid.empty()) series.push_back(std::move(s));
  }
  if (series.empty()) {
    std::string msg = "render_band_chart: metric '" + metric + "' not found; available:";
    for (const auto& m : available) msg += " " + m;
    throw InvalidArgumentError(msg);
  }

  // Log scale: clamp non-positive values to the smallest positive one seen.
  double pos_min = std::numeric_limits<double>::infinity(), v_max = 0;
  std::size_t epochs = 0;
  for (const auto& s : series) {
    epochs = std::max(epochs, s.mid.size());
    for (const auto* col : {&s.lo, &s.mid, &s.hi})
      for (double v : *col) {
        if (v > 0) pos_min = std::min(pos_min, v);
        v_max = std::max(v_max, v);
      }
  }
  if (!(pos_min < std::numeric_limits<double>::infinity()))
    throw InvalidArgumentError("render_band_chart: metric '" + metric +
                               "' has no positive values to place on a log scale");
  const double ly_min = std::floor(std::log10(pos_min));
  const double ly_max = std::ceil(std::log10(std::max(v_max, pos_min)));
  const double ly_span = std::max(ly_max - ly_min, 1.0);

  const double width = 860, height = 520;
  const double left = 70, right = width - 170, top = 40, bottom = height - 50;
  const double x_span = epochs > 1 ? double(epochs - 1) : 1.0;
  const auto sx = [&](std::size_t q) { return left + (right - left) * double(q) / x_span; };
  const auto sy = [&](double v) {
    const double lv = std::log10(std::max(v, pos_min));
    return bottom - (bottom - top) * (lv - ly_min) / ly_span;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << px((left + right) / 2) << "\" y=\"24\" font-family=\"sans-serif\" "
      << "font-size=\"16\" text-anchor=\"middle\">" << metric << "</text>\n";

  // Decade grid and y tick labels, thinned when the range is very wide.
  const int decades = static_cast<int>(ly_max - ly_min);
  const int step = std::max(1, (decades + 11) / 12);
  for (int k = 0; k <= decades; k += step) {
    const double v = std::pow(10.0, ly_min + k);
    const double y = sy(v);
    svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(y) << "\" x2=\"" << px(right)
        << "\" y2=\"" << px(y) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    char lab[24];
    std::snprintf(lab, sizeof(lab), "1e%+03d", static_cast<int>(ly_min) + k);
    svg << "<text x=\"" << px(left - 8) << "\" y=\"" << px(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << lab
        << "</text>\n";
  }
  // x ticks: about eight round positions.
  const std::size_t x_step = std::max<std::size_t>(1, (epochs - 1 + 7) / 8);
  for (std::size_t q = 0; q < epochs; q += x_step) {
    svg << "<text x=\"" << px(sx(q)) << "\" y=\"" << px(bottom + 18)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << q
        << "</text>\n";
  }
  svg << "<text x=\"" << px((left + right) / 2) << "\" y=\"" << px(bottom + 36)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(top) << "\" x2=\"" << px(left) << "\" y2=\""
      << px(bottom) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << px(left) << "\" y1=\"" << px(bottom) << "\" x2=\"" << px(right)
      << "\" y2=\"" << px(bottom) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
    for (std::size_t q = 0; q < s.hi.size(); ++q)
      svg << px(sx(q)) << ',' << px(sy(s.hi[q])) << ' ';
    for (std::size_t q = s.lo.size(); q-- > 0;)
      svg << px(sx(q)) << ',' << px(sy(s.lo[q])) << (q == 0 ? "" : " ");
    svg << "\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t q = 0; q < s.mid.size(); ++q)
      svg << px(sx(q)) << ',' << px(sy(s.mid[q])) << (q + 1 == s.mid.size() ? "" : " ");
    svg << "\"/>\n";
    const double ly = top + 16 + 18 * double(i);
    svg << "<line x1=\"" << px(right + 12) << "\" y1=\"" << px(ly) << "\" x2=\"" << px(right + 34)
        << "\" y2=\"" << px(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2.5\"/>\n";
    svg << "<text x=\"" << px(right + 40) << "\" y=\"" << px(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::string& summary_path, const std::string& metric,
               const std::string& out_path) {
  write_text_file(out_path, render_band_chart(load_json_file(summary_path), metric));
}

}  // namespace gradorder
