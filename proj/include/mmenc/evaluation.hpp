#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmenc/dataset.hpp"

namespace mmenc {

inline constexpr const char* kAllVertices = "All vertices";

struct RoiRow {
  std::string roi;
  double median_r = 0.0;  // 0 when the ROI holds no voxels
  Index n_voxels = 0;

  bool operator==(const RoiRow&) const = default;
};

// One hemisphere of one run: the seven streams in order, then "All vertices".
struct EvaluationReport {
  std::string subject;
  Hemisphere hemisphere = Hemisphere::Left;
  Index fold = 0;
  std::string run_id;
  std::string fingerprint;
  std::vector<RoiRow> rows;

  const RoiRow& row(std::string_view roi) const;
  double all_vertices() const { return row(kAllVertices).median_r; }

  bool operator==(const EvaluationReport&) const = default;
};

// Median of the correlations inside each stream and over every voxel. `labels`
// gives the stream of each entry of `r`.
EvaluationReport median_r_per_roi(std::span<const double> r, const std::vector<std::string>& labels);

// Both hemisphere reports from a per-voxel vector ordered left then right.
std::vector<EvaluationReport> hemisphere_reports(const Eigen::VectorXd& r, const Dataset& d, Index fold,
                                                 const std::string& run_id, const std::string& fingerprint);

struct ComparisonRow {
  std::string roi;
  double base = 0.0;
  double candidate = 0.0;
  Index n_voxels = 0;
  double delta = 0.0;
  std::optional<double> pct_improvement;  // empty when |base| < 1e-6

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonReport {
  std::string subject;
  Hemisphere hemisphere = Hemisphere::Left;
  Index fold = 0;
  std::string base_run;
  std::string candidate_run;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(std::string_view roi) const;
  // Percent improvement on "All vertices".
  std::optional<double> aggregate() const { return row(kAllVertices).pct_improvement; }

  bool operator==(const ComparisonReport&) const = default;
};

inline constexpr double kPercentGuard = 1e-6;

// (cand − base)/|base|·100 per ROI. Subject, hemisphere and ROI list must agree.
ComparisonReport compare_runs(const EvaluationReport& base, const EvaluationReport& cand);

// CSV: subject,hemisphere,roi,median_r,n_voxels,fold,run_id (one row per ROI;
// several reports concatenate under one header).
std::string report_csv(std::span<const EvaluationReport> reports);
std::vector<EvaluationReport> parse_report_csv(std::string_view csv);

// The report columns for the candidate run, plus delta,pct_improvement.
// Undefined percentages are written as "undefined".
std::string comparison_csv(std::span<const ComparisonReport> reports);

std::string report_json(const EvaluationReport& r);
EvaluationReport parse_report_json(std::string_view text);

// Bar chart, one bar per ROI row.
std::string report_svg(const EvaluationReport& r);

}  // namespace mmenc
