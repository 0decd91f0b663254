// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "remixsep/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "remixsep/common.hpp"

namespace remixsep {

namespace {
constexpr int kWidth = 720;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 45;
constexpr int kMarginBottom = 55;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-9) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

}  // namespace

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<CurveSeries>& series) {
  Range xr, yr;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xr.include(s.x[i]);
      yr.include(s.y[i]);
    }
  xr.pad();
  yr.pad();

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (yr.hi - y) / (yr.hi - yr.lo) * plot_h; };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_line_chart_svg: cannot open " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        "font-family=\"sans-serif\">" << title << "</text>\n";

  // Axes and gridlines.
  os << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    os << "<line x1=\"" << kMarginLeft << "\" y1=\"" << py(fy) << "\" x2=\""
       << kMarginLeft + plot_w << "\" y2=\"" << py(fy)
       << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n"
       << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py(fy) + 4
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", fy);
    os << buf << "</text>\n";
    os << "<text x=\"" << px(fx) << "\" y=\"" << kMarginTop + plot_h + 18
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">";
    std::snprintf(buf, sizeof(buf), "%.3g", fx);
    os << buf << "</text>\n";
  }
  os << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 14
     << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
     << "</text>\n";
  os << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" transform=\"rotate(-90 18 "
     << kMarginTop + plot_h / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (s.x.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << kColors[si % 4]
       << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << kMarginLeft + plot_w - 6 << "\" y=\"" << kMarginTop + 16 + 16 * si
       << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\""
       << kColors[si % 4] << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
}

void plot_metrics(const std::filesystem::path& metrics_jsonl,
                  const std::filesystem::path& out_dir) {
  std::ifstream is(metrics_jsonl);
  if (!is) throw std::runtime_error("plot_metrics: cannot open " + metrics_jsonl.string());
  CurveSeries loss{"train loss [dB]", {}, {}};
  CurveSeries sisdr{"valid SI-SDR [dB]", {}, {}};
  CurveSeries collapse{"collapse metric", {}, {}};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const double e = j.at("epoch").get<double>();
    loss.x.push_back(e);
    loss.y.push_back(j.at("train_loss_db").get<double>());
    sisdr.x.push_back(e);
    sisdr.y.push_back(j.at("valid_sisdr_db").get<double>());
    collapse.x.push_back(e);
    collapse.y.push_back(j.at("collapse_metric").get<double>());
  }
  RS_REQUIRE(!loss.x.empty(), "plot_metrics: empty metrics log");
  std::filesystem::create_directories(out_dir);
  write_line_chart_svg(out_dir / "loss.svg", "Training loss", "epoch", "loss [dB]", {loss});
  write_line_chart_svg(out_dir / "sisdr.svg", "Validation SI-SDR", "epoch", "SI-SDR [dB]",
                       {sisdr});
  write_line_chart_svg(out_dir / "collapse.svg", "Collapse metric", "epoch", "top power ratio",
                       {collapse});
}

}  // namespace remixsep
