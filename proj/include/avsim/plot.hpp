#pragma once

// Self-contained SVG grouped bar chart of a pooled report: one panel per
// metric, one group per scenario, one bar per IoU threshold.

#include <algorithm>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "avsim/error.hpp"
#include "avsim/eval.hpp"

namespace avsim {

inline std::string render_report_svg(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw ValidationError("report has no rows to plot");
  std::vector<std::string> scenarios;
  std::vector<double> taus;
  for (const ReportRow& r : rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) scenarios.push_back(r.scenario);
    if (std::find(taus.begin(), taus.end(), r.row.tau) == taus.end()) taus.push_back(r.row.tau);
  }
  std::sort(taus.begin(), taus.end());

  static constexpr const char* kPalette[] = {"#1b6ca8", "#48a9a6", "#d4a373", "#c1666b", "#6b705c", "#8e7dbe"};
  constexpr double kBar = 18.0;
  constexpr double kGroupGap = 30.0;
  constexpr double kPanelH = 220.0;
  constexpr double kLeft = 60.0;
  constexpr double kTop = 40.0;
  const double group_w = kBar * static_cast<double>(taus.size());
  const double panel_w = static_cast<double>(scenarios.size()) * (group_w + kGroupGap) + kGroupGap;
  const double width = kLeft + 2.0 * panel_w + 40.0 + 20.0;
  const double height = kTop + kPanelH + 90.0;

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"11\">\n",
      width, height, width, height);
  svg += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", width, height);

  for (int metric = 0; metric < 2; ++metric) {
    const double x0 = kLeft + metric * (panel_w + 40.0);
    const double y_base = kTop + kPanelH;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
                       x0 + panel_w / 2, kTop - 15.0, metric == 0 ? "Precision" : "Recall");
    for (int k = 0; k <= 4; ++k) {
      const double y = y_base - kPanelH * k / 4.0;
      svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", x0, y,
                         x0 + panel_w, y);
      svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.2f}</text>\n", x0 - 4.0, y + 4.0,
                         k / 4.0);
    }
    svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n", x0,
                       y_base, x0 + panel_w, y_base);
    for (std::size_t g = 0; g < scenarios.size(); ++g) {
      const double gx = x0 + kGroupGap + static_cast<double>(g) * (group_w + kGroupGap);
      for (std::size_t t = 0; t < taus.size(); ++t) {
        const auto it = std::find_if(rows.begin(), rows.end(), [&](const ReportRow& r) {
          return r.scenario == scenarios[g] && r.row.tau == taus[t];
        });
        const std::optional<double> v = it == rows.end() ? std::nullopt : (metric == 0 ? it->row.precision : it->row.recall);
        const double h = v ? kPanelH * *v : 0.0;
        const double x = gx + static_cast<double>(t) * kBar;
        svg += fmt::format(
            "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"><title>{} tau {} {}</title></rect>\n",
            x, y_base - h, kBar - 2.0, h, kPalette[t % 6], scenarios[g], taus[t], v ? fmt::format("{:.3f}", *v) : "n/a");
      }
      svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", gx + group_w / 2,
                         y_base + 16.0, scenarios[g]);
    }
  }
  const double ly = kTop + kPanelH + 45.0;
  for (std::size_t t = 0; t < taus.size(); ++t) {
    const double lx = kLeft + static_cast<double>(t) * 90.0;
    svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", lx, ly - 10.0,
                       kPalette[t % 6]);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">IoU {}</text>\n", lx + 16.0, ly, taus[t]);
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace avsim
