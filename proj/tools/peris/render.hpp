#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace peris::app {

struct Series {
  std::string name;
  std::vector<double> values;
};

// Line chart with a shared categorical x axis and a y axis fixed to [0, 1].
std::string line_chart_svg(const std::string& title, const std::string& x_title,
                           const std::vector<std::string>& x_labels, const std::vector<Series>& series);

struct Analysis {
  std::string markdown;
  std::string cohort_svg;
  std::optional<std::string> shift_svg;
};

// Renders evaluate reports into Markdown tables and SVG charts.
Analysis analyze_reports(const std::vector<nlohmann::json>& reports);

}  // namespace peris::app
