#include "fast3d/report.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>
#include <system_error>

#include "fast3d/error.hpp"

namespace fast3d {

namespace {

using nlohmann::ordered_json;

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

ordered_json config_to_json(const SamplerConfig& c) {
  return {
      {"total_steps", c.total_steps},
      {"rho_a", c.rho_a},
      {"rho_cfg_off", c.rho_cfg_off},
      {"mu", c.mu},
      {"omega", c.omega},
      {"tau", c.tau},
      {"xi", c.xi},
      {"f_corr", c.f_corr},
      {"eta", c.eta},
      {"cfg_interval", {c.cfg_interval.lo, c.cfg_interval.hi}},
      {"cfg_scale", c.cfg_scale},
      {"gamma_up", c.gamma_up},
      {"policy", policy_name(c.policy, c.fixed_active_ratio)},
      {"fixed_active_ratio", c.fixed_active_ratio},
  };
}

SamplerConfig config_from_json(const ordered_json& j) {
  SamplerConfig c;
  c.total_steps = j.at("total_steps").get<int>();
  c.rho_a = j.at("rho_a").get<double>();
  c.rho_cfg_off = j.at("rho_cfg_off").get<double>();
  c.mu = j.at("mu").get<double>();
  c.omega = j.at("omega").get<double>();
  c.tau = j.at("tau").get<int>();
  c.xi = j.at("xi").get<double>();
  c.f_corr = j.at("f_corr").get<int>();
  c.eta = j.at("eta").get<double>();
  c.cfg_interval = {j.at("cfg_interval").at(0).get<double>(), j.at("cfg_interval").at(1).get<double>()};
  c.cfg_scale = j.at("cfg_scale").get<double>();
  c.gamma_up = j.at("gamma_up").get<double>();
  c.fixed_active_ratio = j.at("fixed_active_ratio").get<double>();
  double ratio = 0.0;
  c.policy = parse_policy(j.at("policy").get<std::string>(), &ratio);
  return c;
}

bool same_config(const SamplerConfig& a, const SamplerConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace

Phase parse_phase(std::string_view name) {
  for (auto p : {Phase::FullSampling, Phase::DynamicCaching, Phase::CfgFreeRefinement}) {
    if (phase_name(p) == name) return p;
  }
  throw InvalidArgument("unknown phase '" + std::string(name) + "'");
}

BudgetPolicy parse_policy(std::string_view text, double* fixed_active_ratio) {
  if (text == "pcsc") return BudgetPolicy::Pcsc;
  if (text == "none") return BudgetPolicy::Disabled;
  if (text.starts_with("fixed:")) {
    const std::string value(text.substr(6));
    std::size_t used = 0;
    double r = 0.0;
    try {
      r = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size() || !(r > 0.0 && r <= 1.0)) {
      throw InvalidArgument("fixed policy ratio must be a number in (0, 1], got '" + value + "'");
    }
    if (fixed_active_ratio != nullptr) *fixed_active_ratio = r;
    return BudgetPolicy::Fixed;
  }
  throw InvalidArgument("unknown policy '" + std::string(text) + "' (pcsc, fixed:R, none)");
}

bool RunReport::operator==(const RunReport& o) const {
  return source == o.source && policy == o.policy && seed == o.seed && same_config(config, o.config) &&
         dims == o.dims && model.batch == o.model.batch && model.tokens == o.model.tokens &&
         model.d_model == o.model.d_model && model.heads == o.model.heads &&
         model.n_cond == o.model.n_cond && model.d_cond == o.model.d_cond &&
         model.mlp_ratio == o.model.mlp_ratio && model.blocks == o.model.blocks &&
         cfg_flops_factor == o.cfg_flops_factor && rows == o.rows && total_flops == o.total_flops &&
         baseline_flops == o.baseline_flops && flops_reduction == o.flops_reduction &&
         relative_l2 == o.relative_l2 && occupancy_iou == o.occupancy_iou &&
         evaluated_tokens == o.evaluated_tokens &&
         occupancy_comparisons == o.occupancy_comparisons && sigma == o.sigma;
}

std::string report_csv(const RunReport& r) {
  std::string out(kReportCsvHeader);
  out += '\n';
  for (const auto& row : r.rows) {
    out += std::to_string(row.step) + ',' + format_real(row.t) + ',' +
           std::string(phase_name(row.phase)) + ',' + std::to_string(row.quota) + ',' +
           std::to_string(row.active) + ',' + std::to_string(row.flops) + ',' +
           std::to_string(row.delta_s) + '\n';
  }
  return out;
}

std::string report_json(const RunReport& r) {
  ordered_json steps = ordered_json::array();
  for (const auto& row : r.rows) {
    steps.push_back({
        {"step", row.step},
        {"t", row.t},
        {"phase", phase_name(row.phase)},
        {"guided", row.guided},
        {"quota", row.quota},
        {"active", row.active},
        {"cached", row.cached},
        {"forced_refresh", row.forced_refresh},
        {"flops", row.flops},
        {"delta_s", row.delta_s},
    });
  }
  const ordered_json j = {
      {"source", r.source},
      {"policy", r.policy},
      {"seed", r.seed},
      {"config", config_to_json(r.config)},
      {"dims",
       {{"batch", r.dims.batch},
        {"channels", r.dims.channels},
        {"depth", r.dims.depth},
        {"height", r.dims.height},
        {"width", r.dims.width}}},
      {"model",
       {{"d_model", r.model.d_model},
        {"heads", r.model.heads},
        {"n_cond", r.model.n_cond},
        {"d_cond", r.model.d_cond},
        {"mlp_ratio", r.model.mlp_ratio},
        {"blocks", r.model.blocks},
        {"cfg_flops_factor", r.cfg_flops_factor}}},
      {"totals",
       {{"flops", r.total_flops},
        {"baseline_flops", r.baseline_flops},
        {"flops_reduction", r.flops_reduction},
        {"relative_l2", r.relative_l2},
        {"occupancy_iou", r.occupancy_iou},
        {"evaluated_tokens", r.evaluated_tokens},
        {"occupancy_comparisons", r.occupancy_comparisons},
        {"sigma", r.sigma}}},
      {"steps", steps},
  };
  return j.dump(2) + "\n";
}

RunReport parse_report_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    RunReport r;
    r.source = j.at("source").get<std::string>();
    r.policy = j.at("policy").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = config_from_json(j.at("config"));
    const auto& d = j.at("dims");
    r.dims = GridDims{d.at("batch").get<std::int64_t>(), d.at("channels").get<std::int64_t>(),
                      d.at("depth").get<std::int64_t>(), d.at("height").get<std::int64_t>(),
                      d.at("width").get<std::int64_t>()};
    const auto& m = j.at("model");
    r.model.d_model = m.at("d_model").get<std::int64_t>();
    r.model.heads = m.at("heads").get<std::int64_t>();
    r.model.n_cond = m.at("n_cond").get<std::int64_t>();
    r.model.d_cond = m.at("d_cond").get<std::int64_t>();
    r.model.mlp_ratio = m.at("mlp_ratio").get<std::int64_t>();
    r.model.blocks = m.at("blocks").get<std::int64_t>();
    r.cfg_flops_factor = m.at("cfg_flops_factor").get<double>();
    const auto& t = j.at("totals");
    r.total_flops = t.at("flops").get<Flops>();
    r.baseline_flops = t.at("baseline_flops").get<Flops>();
    r.flops_reduction = t.at("flops_reduction").get<double>();
    r.relative_l2 = t.at("relative_l2").get<double>();
    r.occupancy_iou = t.at("occupancy_iou").get<double>();
    r.evaluated_tokens = t.at("evaluated_tokens").get<std::int64_t>();
    r.occupancy_comparisons = t.at("occupancy_comparisons").get<std::int64_t>();
    r.sigma = t.at("sigma").get<std::vector<double>>();
    for (const auto& s : j.at("steps")) {
      ReportRow row;
      row.step = s.at("step").get<int>();
      row.t = s.at("t").get<double>();
      row.phase = parse_phase(s.at("phase").get<std::string>());
      row.guided = s.at("guided").get<bool>();
      row.quota = s.at("quota").get<std::int64_t>();
      row.active = s.at("active").get<std::int64_t>();
      row.cached = s.at("cached").get<std::int64_t>();
      row.forced_refresh = s.at("forced_refresh").get<bool>();
      row.flops = s.at("flops").get<Flops>();
      row.delta_s = s.at("delta_s").get<std::int64_t>();
      r.rows.push_back(row);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed report JSON: ") + e.what());
  }
}

void write_report_bundle(const RunReport& report, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  auto tmp = dir;
  tmp += ".tmp";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  if (!fs::create_directories(tmp, ec) && ec) {
    throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  }
  auto write = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string());
    out << text;
    if (!out) throw IoError("failed writing " + p.string());
  };
  write(tmp / "steps.csv", report_csv(report));
  write(tmp / "summary.json", report_json(report));
  fs::remove_all(dir, ec);
  fs::rename(tmp, dir, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + dir.string() + ": " + ec.message());
}

}  // namespace fast3d
