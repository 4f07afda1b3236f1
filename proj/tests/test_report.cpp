#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "fast3d/error.hpp"
#include "fast3d/report.hpp"
#include "fast3d/simulate.hpp"

using namespace fast3d;
namespace fs = std::filesystem;

namespace {

RunReport small_report(BudgetPolicy policy = BudgetPolicy::Pcsc) {
  SimulationSpec spec;
  spec.config.gamma_up = 8.0;
  spec.config.policy = policy;
  spec.dims = {1, 4, 8, 8, 8};
  spec.seed = 2;
  return simulate(spec).report;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("report aggregates are consistent") {
  const auto r = small_report();
  CHECK(r.rows.size() == 25);
  Flops sum = 0;
  std::int64_t active = 0;
  for (const auto& row : r.rows) {
    sum += row.flops;
    active += row.active;
    CHECK(row.active + row.cached == 512);
  }
  CHECK(sum == r.total_flops);
  CHECK(active == r.evaluated_tokens);
  CHECK(r.flops_reduction >= 0.0);
  CHECK(r.flops_reduction <= 1.0);
  CHECK(r.occupancy_iou >= 0.0);
  CHECK(r.occupancy_iou <= 1.0);
  CHECK(r.occupancy_comparisons == 1);
  CHECK(r.sigma.size() == 1);
}

TEST_CASE("disabled policy report matches its baseline") {
  const auto r = small_report(BudgetPolicy::Disabled);
  CHECK(r.total_flops == r.baseline_flops);
  CHECK(r.flops_reduction == 0.0);
  CHECK(r.relative_l2 == 0.0);
  CHECK(r.occupancy_iou == 1.0);
  CHECK(r.policy == "none");
}

TEST_CASE("JSON round trips through its schema") {
  const auto r = small_report();
  const auto text = report_json(r);
  const auto back = parse_report_json(text);
  CHECK(back == r);
  CHECK(report_json(back) == text);
  CHECK_THROWS_AS(parse_report_json("{}"), InvalidArgument);
  CHECK_THROWS_AS(parse_report_json("not json"), InvalidArgument);
}

TEST_CASE("CSV has one row per step") {
  const auto r = small_report();
  const auto csv = report_csv(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == kReportCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 25);
}

TEST_CASE("identical runs give byte-identical bundles") {
  const auto dir = fs::temp_directory_path() / ("fast3d_report_" + std::to_string(::getpid()));
  write_report_bundle(small_report(), dir / "a");
  write_report_bundle(small_report(), dir / "b");
  CHECK(slurp(dir / "a" / "steps.csv") == slurp(dir / "b" / "steps.csv"));
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  CHECK_FALSE(fs::exists(dir / "a.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("policy parsing") {
  double r = 0.0;
  CHECK(parse_policy("pcsc", &r) == BudgetPolicy::Pcsc);
  CHECK(parse_policy("none", &r) == BudgetPolicy::Disabled);
  CHECK(parse_policy("fixed:0.25", &r) == BudgetPolicy::Fixed);
  CHECK(r == 0.25);
  CHECK_THROWS_AS(parse_policy("fixed:", &r), InvalidArgument);
  CHECK_THROWS_AS(parse_policy("fixed:2", &r), InvalidArgument);
  CHECK_THROWS_AS(parse_policy("fixed:0.3x", &r), InvalidArgument);
  CHECK_THROWS_AS(parse_policy("greedy", &r), InvalidArgument);
}
