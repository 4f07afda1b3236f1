#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fast3d/config.hpp"
#include "fast3d/flops.hpp"
#include "fast3d/grid.hpp"

namespace fast3d {

struct ReportRow {
  int step = 0;
  double t = 0.0;
  Phase phase = Phase::FullSampling;
  bool guided = false;
  std::int64_t quota = 0;    // requested cache budget, summed over the batch
  std::int64_t active = 0;   // recomputed tokens, summed over the batch
  std::int64_t cached = 0;   // reused tokens, summed over the batch
  bool forced_refresh = false;
  Flops flops = 0;
  std::int64_t delta_s = 0;  // dynamic voxels of this step's decode vs the previous one

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct RunReport {
  std::string source;  // "synthetic:<shape>" or "trace"
  std::string policy;
  std::uint64_t seed = 0;
  SamplerConfig config;
  GridDims dims;
  BlockDims model;
  double cfg_flops_factor = 2.0;

  std::vector<ReportRow> rows;

  Flops total_flops = 0;
  Flops baseline_flops = 0;
  double flops_reduction = 0.0;  // 1 - total / baseline
  double relative_l2 = 0.0;      // final latent vs the full-sampling oracle
  double occupancy_iou = 1.0;    // final decode vs the oracle's final decode
  std::int64_t evaluated_tokens = 0;
  std::int64_t occupancy_comparisons = 0;
  std::vector<double> sigma;  // PCSC calibration per batch element

  bool operator==(const RunReport& other) const;
};

/// Fixed header of the per-step CSV.
inline constexpr std::string_view kReportCsvHeader = "step,t,phase,quota,active,flops,delta_s";

std::string report_csv(const RunReport& report);
std::string report_json(const RunReport& report);
/// Inverse of report_json. Throws InvalidArgument on missing keys or bad types.
RunReport parse_report_json(std::string_view json);

/// Writes steps.csv and summary.json into `dir`. The bundle is assembled in a
/// temporary sibling directory and renamed into place, replacing any previous
/// bundle.
void write_report_bundle(const RunReport& report, const std::filesystem::path& dir);

Phase parse_phase(std::string_view name);
BudgetPolicy parse_policy(std::string_view text, double* fixed_active_ratio);

}  // namespace fast3d
