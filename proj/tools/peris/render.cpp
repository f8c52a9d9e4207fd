#include "peris/render.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "peris/types.hpp"

namespace peris::app {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

struct ReportView {
  std::string label;
  std::string part;
  std::size_t runs = 0;
  std::map<std::size_t, double> hr, ndcg;
  double combined = 0.0, combined_std = 0.0;
  std::vector<std::int64_t> thresholds;
  std::vector<double> bucket_score;
  std::vector<std::size_t> bucket_users;
  std::vector<std::pair<int, double>> shift;
};

ReportView view_of(const nlohmann::json& r) {
  ReportView v;
  try {
    v.label = r.at("label").get<std::string>();
    v.part = r.at("part").get<std::string>();
    const auto& agg = r.at("aggregate");
    v.runs = agg.at("runs").get<std::size_t>();
    for (const auto& [k, m] : agg.at("hr").items()) v.hr[std::stoul(k)] = m.at("mean").get<double>();
    for (const auto& [k, m] : agg.at("ndcg").items()) v.ndcg[std::stoul(k)] = m.at("mean").get<double>();
    v.combined = agg.at("combined").at("mean").get<double>();
    v.combined_std = agg.at("combined").at("std").get<double>();
    const auto& cohorts = r.at("cohorts");
    v.thresholds = cohorts.at("thresholds_days").get<std::vector<std::int64_t>>();
    for (const auto& b : cohorts.at("buckets")) {
      v.bucket_score.push_back(b.at("score").get<double>());
      v.bucket_users.push_back(b.at("users").get<std::size_t>());
    }
    if (r.contains("shift")) {
      for (const auto& p : r["shift"]) {
        v.shift.emplace_back(p.at("offset_months").get<int>(), p.at("overlap").get<double>());
      }
    }
  } catch (const std::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
  return v;
}

std::string num(double x) { return fmt::format("{:.4f}", x); }

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_title,
                           const std::vector<std::string>& x_labels, const std::vector<Series>& series) {
  constexpr double kW = 720, kH = 400, kLeft = 60, kRight = 180, kTop = 40, kBottom = 60;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const std::size_t n = x_labels.size();
  auto x_at = [&](std::size_t i) { return kLeft + (n > 1 ? pw * static_cast<double>(i) / static_cast<double>(n - 1) : pw / 2); };
  auto y_at = [&](double v) { return kTop + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kW, kH, kW, kH);
  svg += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                     kLeft + pw / 2, escape(title));
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    svg += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", kLeft, y_at(v),
                       kLeft + pw, y_at(v));
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", kLeft - 6, y_at(v) + 4, v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x_at(i), kTop + ph + 18,
                       escape(x_labels[i]));
  }
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2, kH - 14,
                     escape(x_title));
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", kLeft,
                     kTop, pw, ph);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < std::min(n, series[s].values.size()); ++i) {
      points += fmt::format("{:.1f},{:.1f} ", x_at(i), y_at(series[s].values[i]));
    }
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, points);
    for (std::size_t i = 0; i < std::min(n, series[s].values.size()); ++i) {
      svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"{}\"/>\n", x_at(i),
                         y_at(series[s].values[i]), color);
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       kLeft + pw + 16, ly, kLeft + pw + 36, ly, color);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kLeft + pw + 42, ly + 4, escape(series[s].name));
  }
  svg += "</svg>\n";
  return svg;
}

Analysis analyze_reports(const std::vector<nlohmann::json>& reports) {
  std::vector<ReportView> views;
  for (const auto& r : reports) views.push_back(view_of(r));
  const ReportView& first = views.front();

  std::string md = "# Evaluation summary\n\n## Accuracy\n\n";
  md += "| Model | Part | Runs |";
  std::string rule = "|---|---|---:|";
  for (const auto& [k, _] : first.hr) {
    md += fmt::format(" HR@{} |", k);
    rule += "---:|";
  }
  for (const auto& [k, _] : first.ndcg) {
    md += fmt::format(" nDCG@{} |", k);
    rule += "---:|";
  }
  md += " (HR@10+nDCG@10)/2 | vs " + first.label + " |\n" + rule + "---:|---:|\n";
  for (const auto& v : views) {
    md += fmt::format("| {} | {} | {} |", v.label, v.part, v.runs);
    for (const auto& [k, _] : first.hr) md += " " + (v.hr.contains(k) ? num(v.hr.at(k)) : "-") + " |";
    for (const auto& [k, _] : first.ndcg) md += " " + (v.ndcg.contains(k) ? num(v.ndcg.at(k)) : "-") + " |";
    md += fmt::format(" {} ± {} | {:+.4f} |\n", num(v.combined), num(v.combined_std), v.combined - first.combined);
  }

  const auto find = [&](const std::string& label) -> const ReportView* {
    for (const auto& v : views) {
      if (v.label == label) return &v;
    }
    return nullptr;
  };
  const auto* full = find("PERIS");
  const auto* plain = find("plain-PIS");
  const auto* pref = find("pref-only");
  if (full && plain && pref) {
    md += "\n## Supplementation schemes\n\n";
    md += "| Setting | (HR@10+nDCG@10)/2 | vs PERIS |\n|---|---:|---:|\n";
    for (const auto* v : {full, plain, pref}) {
      md += fmt::format("| {} | {} | {:+.4f} |\n", v->label, num(v->combined), v->combined - full->combined);
    }
    md += fmt::format("\nplain-PIS {} the full model.\n",
                      plain->combined <= full->combined ? "does not exceed" : "exceeds");
  }

  md += "\n## Elapsed-time cohorts\n\n";
  md += "Mean (HR@10+nDCG@10)/2 per bucket of days between a user's last training consumption and first "
        "evaluated consumption.\n\n";
  md += "| Model | p25 / p50 / p75 (days) | bucket 1 | bucket 2 | bucket 3 | bucket 4 |\n";
  md += "|---|---|---:|---:|---:|---:|\n";
  std::vector<Series> cohort_series;
  for (const auto& v : views) {
    md += fmt::format("| {} | {} / {} / {} |", v.label, v.thresholds.at(0), v.thresholds.at(1), v.thresholds.at(2));
    for (std::size_t b = 0; b < v.bucket_score.size(); ++b) {
      md += fmt::format(" {} (n={}) |", num(v.bucket_score[b]), v.bucket_users[b]);
    }
    md += "\n";
    cohort_series.push_back({v.label, v.bucket_score});
  }
  const auto& t = first.thresholds;
  Analysis out;
  out.cohort_svg = line_chart_svg(
      "Accuracy by elapsed time", "days since last training consumption",
      {fmt::format("<= {}", t[0]), fmt::format("{}-{}", t[0], t[1]), fmt::format("{}-{}", t[1], t[2]),
       fmt::format("> {}", t[2])},
      cohort_series);

  std::vector<const ReportView*> shifted;
  for (const auto& v : views) {
    if (!v.shift.empty()) shifted.push_back(&v);
  }
  if (!shifted.empty()) {
    md += "\n## Shift sensitivity\n\nOverlap of top-10 lists after moving every history by whole 30-day months.\n\n";
    md += "| Offset (months) |";
    std::string shift_rule = "|---:|";
    for (const auto* v : shifted) {
      md += " " + v->label + " |";
      shift_rule += "---:|";
    }
    md += "\n" + shift_rule + "\n";
    std::vector<std::string> x_labels;
    for (const auto& [offset, _] : shifted.front()->shift) x_labels.push_back(fmt::format("{:+d}", offset));
    for (std::size_t i = 0; i < shifted.front()->shift.size(); ++i) {
      md += fmt::format("| {:+d} |", shifted.front()->shift[i].first);
      for (const auto* v : shifted) md += " " + (i < v->shift.size() ? num(v->shift[i].second) : "-") + " |";
      md += "\n";
    }
    std::vector<Series> shift_series;
    for (const auto* v : shifted) {
      Series s{v->label, {}};
      for (const auto& [_, overlap] : v->shift) s.values.push_back(overlap);
      shift_series.push_back(s);
    }
    out.shift_svg = line_chart_svg("Top-10 overlap under history shifts", "shift (months)", x_labels, shift_series);
  }
  out.markdown = md;
  return out;
}

}  // namespace peris::app
