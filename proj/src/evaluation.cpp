#include "mmenc/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <sstream>

namespace mmenc {

namespace {

double median_or_zero(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Hemisphere parse_hemisphere(const std::string& s) {
  if (s == "LH") return Hemisphere::Left;
  if (s == "RH") return Hemisphere::Right;
  throw FormatError("unknown hemisphere '" + s + "'");
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (true) {
    const auto next = line.find(sep, at);
    out.emplace_back(line.substr(at, next - at));
    if (next == std::string_view::npos) break;
    at = next + 1;
  }
  return out;
}

template <typename Row>
const Row& find_row(const std::vector<Row>& rows, std::string_view roi) {
  for (const auto& r : rows) {
    if (r.roi == roi) return r;
  }
  throw UsageError("report has no ROI '" + std::string(roi) + "'");
}

}  // namespace

const RoiRow& EvaluationReport::row(std::string_view roi) const { return find_row(rows, roi); }
const ComparisonRow& ComparisonReport::row(std::string_view roi) const { return find_row(rows, roi); }

EvaluationReport median_r_per_roi(std::span<const double> r, const std::vector<std::string>& labels) {
  if (r.size() != labels.size()) {
    throw ShapeError("median_r_per_roi: " + std::to_string(r.size()) + " correlations but the atlas labels " +
                     std::to_string(labels.size()) + " voxels");
  }
  EvaluationReport rep;
  for (const char* stream : kStreams) {
    std::vector<double> in;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (labels[i] == stream) in.push_back(r[i]);
    }
    rep.rows.push_back({stream, median_or_zero(in), static_cast<Index>(in.size())});
  }
  rep.rows.push_back({kAllVertices, median_or_zero({r.begin(), r.end()}), static_cast<Index>(r.size())});
  return rep;
}

std::vector<EvaluationReport> hemisphere_reports(const Eigen::VectorXd& r, const Dataset& d, Index fold,
                                                 const std::string& run_id, const std::string& fingerprint) {
  if (r.size() != d.total_voxels()) {
    throw ShapeError("hemisphere_reports: " + std::to_string(r.size()) + " correlations for " +
                     std::to_string(d.total_voxels()) + " voxels");
  }
  std::vector<EvaluationReport> out;
  Index offset = 0;
  for (Hemisphere h : {Hemisphere::Left, Hemisphere::Right}) {
    const Index n = d.voxels(h);
    auto rep = median_r_per_roi(std::span<const double>(r.data() + offset, static_cast<std::size_t>(n)), d.atlas.streams(h));
    rep.subject = d.subjects.empty() ? "" : d.subjects.front();
    rep.hemisphere = h;
    rep.fold = fold;
    rep.run_id = run_id;
    rep.fingerprint = fingerprint;
    out.push_back(std::move(rep));
    offset += n;
  }
  return out;
}

ComparisonReport compare_runs(const EvaluationReport& base, const EvaluationReport& cand) {
  if (base.subject != cand.subject || base.hemisphere != cand.hemisphere) {
    throw UsageError("compare_runs: reports cover different subjects or hemispheres (" + base.subject + " " +
                     hemisphere_name(base.hemisphere) + " vs " + cand.subject + " " + hemisphere_name(cand.hemisphere) +
                     ")");
  }
  if (base.rows.size() != cand.rows.size()) throw UsageError("compare_runs: reports have different ROI sets");
  ComparisonReport c;
  c.subject = base.subject;
  c.hemisphere = base.hemisphere;
  c.fold = cand.fold;
  c.base_run = base.run_id;
  c.candidate_run = cand.run_id;
  for (std::size_t i = 0; i < base.rows.size(); ++i) {
    const auto& b = base.rows[i];
    const auto& k = cand.rows[i];
    if (b.roi != k.roi) throw UsageError("compare_runs: ROI '" + b.roi + "' against '" + k.roi + "'");
    ComparisonRow row{b.roi, b.median_r, k.median_r, k.n_voxels, k.median_r - b.median_r, std::nullopt};
    if (std::abs(b.median_r) >= kPercentGuard) row.pct_improvement = row.delta / std::abs(b.median_r) * 100.0;
    c.rows.push_back(row);
  }
  return c;
}

std::string report_csv(std::span<const EvaluationReport> reports) {
  std::string out = "subject,hemisphere,roi,median_r,n_voxels,fold,run_id\n";
  for (const auto& rep : reports) {
    for (const auto& row : rep.rows) {
      out += fmt::format("{},{},{},{},{},{},{}\n", rep.subject, hemisphere_name(rep.hemisphere), row.roi, row.median_r,
                         row.n_voxels, rep.fold, rep.run_id);
    }
  }
  return out;
}

std::vector<EvaluationReport> parse_report_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "subject,hemisphere,roi,median_r,n_voxels,fold,run_id") {
    throw FormatError("report CSV has an unexpected header");
  }
  std::vector<EvaluationReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw FormatError("report CSV row has " + std::to_string(f.size()) + " fields: " + line);
    const Hemisphere h = parse_hemisphere(f[1]);
    const Index fold = std::stoll(f[5]);
    if (out.empty() || out.back().subject != f[0] || out.back().hemisphere != h || out.back().fold != fold ||
        out.back().run_id != f[6] || out.back().rows.back().roi == kAllVertices) {
      EvaluationReport rep;
      rep.subject = f[0];
      rep.hemisphere = h;
      rep.fold = fold;
      rep.run_id = f[6];
      out.push_back(std::move(rep));
    }
    out.back().rows.push_back({f[2], std::stod(f[3]), static_cast<Index>(std::stoll(f[4]))});
  }
  return out;
}

std::string comparison_csv(std::span<const ComparisonReport> reports) {
  std::string out = "subject,hemisphere,roi,median_r,n_voxels,fold,run_id,delta,pct_improvement\n";
  for (const auto& rep : reports) {
    for (const auto& row : rep.rows) {
      out += fmt::format("{},{},{},{},{},{},{},{},{}\n", rep.subject, hemisphere_name(rep.hemisphere), row.roi,
                         row.candidate, row.n_voxels, rep.fold, rep.candidate_run, row.delta,
                         row.pct_improvement ? fmt::format("{}", *row.pct_improvement) : std::string("undefined"));
    }
  }
  return out;
}

std::string report_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["subject"] = r.subject;
  j["hemisphere"] = hemisphere_name(r.hemisphere);
  j["fold"] = r.fold;
  j["run_id"] = r.run_id;
  j["fingerprint"] = r.fingerprint;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    j["rows"].push_back({{"roi", row.roi}, {"median_r", row.median_r}, {"n_voxels", row.n_voxels}});
  }
  return j.dump(2) + "\n";
}

EvaluationReport parse_report_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvaluationReport r;
    r.subject = j.at("subject").get<std::string>();
    r.hemisphere = parse_hemisphere(j.at("hemisphere").get<std::string>());
    r.fold = j.at("fold").get<Index>();
    r.run_id = j.at("run_id").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("roi").get<std::string>(), row.at("median_r").get<double>(), row.at("n_voxels").get<Index>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report JSON: ") + e.what());
  }
}

std::string report_svg(const EvaluationReport& r) {
  constexpr int kBar = 48, kGap = 16, kLeft = 60, kPlot = 240, kTop = 40, kLabels = 90;
  double scale = 0.1;
  for (const auto& row : r.rows) scale = std::max(scale, std::abs(row.median_r));
  const bool negative = std::any_of(r.rows.begin(), r.rows.end(), [](const RoiRow& x) { return x.median_r < 0; });
  const int zero_y = kTop + (negative ? kPlot / 2 : kPlot);
  const double px_per_unit = (negative ? kPlot / 2.0 : kPlot) / scale;
  const int width = kLeft + static_cast<int>(r.rows.size()) * (kBar + kGap) + kGap;
  const int height = kTop + kPlot + kLabels;

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n",
      width, height);
  s += fmt::format("<text x=\"{}\" y=\"20\" font-size=\"14\">{} {} fold {} ({})</text>\n", kLeft, r.subject,
                   hemisphere_name(r.hemisphere), r.fold, r.run_id);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", kLeft, zero_y, width - kGap, zero_y);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">0</text>\n", kLeft - 6, zero_y + 4);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3f}</text>\n", kLeft - 6, kTop + 4, scale);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& row = r.rows[i];
    const int x = kLeft + kGap + static_cast<int>(i) * (kBar + kGap);
    const int h = static_cast<int>(std::lround(std::abs(row.median_r) * px_per_unit));
    const int y = row.median_r >= 0 ? zero_y - h : zero_y;
    const char* fill = row.roi == kAllVertices ? "#555555" : "#4a7fb5";
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{}: {}</title></rect>\n", x, y,
                     kBar, h, fill, row.roi, row.median_r);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.3f}</text>\n", x + kBar / 2,
                     row.median_r >= 0 ? y - 4 : y + h + 12, row.median_r);
    s += fmt::format("<text transform=\"translate({},{}) rotate(45)\">{}</text>\n", x + 8, kTop + kPlot + 12, row.roi);
  }
  s += "</svg>\n";
  return s;
}

}  // namespace mmenc
