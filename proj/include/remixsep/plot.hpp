// Copyright 2026 remixsep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef REMIXSEP_PLOT_HPP_
#define REMIXSEP_PLOT_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace remixsep {

struct CurveSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<CurveSeries>& series);

// Renders loss.svg, sisdr.svg and collapse.svg from a metrics log.
void plot_metrics(const std::filesystem::path& metrics_jsonl,
                  const std::filesystem::path& out_dir);

}  // namespace remixsep

#endif  // REMIXSEP_PLOT_HPP_
