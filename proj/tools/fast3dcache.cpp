#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fast3d/error.hpp"
#include "fast3d/flops.hpp"
#include "fast3d/pcsc.hpp"
#include "fast3d/report.hpp"
#include "fast3d/schedule.hpp"
#include "fast3d/simulate.hpp"
#include "fast3d/synthetic.hpp"
#include "fast3d/trace.hpp"

namespace fs = std::filesystem;
using namespace fast3d;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kTrace = 3, kIo = 4 };

struct CommonFlags {
  SamplerConfig config;
  std::string policy = "pcsc";
  std::uint64_t seed = 0;
  std::int64_t batch = 1;
  std::int64_t channels = 8;
  std::int64_t grid_d = 16, grid_h = 16, grid_w = 16;
  std::string shape = "sphere";
  BlockDims model{};
  double cfg_flops_factor = 2.0;
  std::string out_dir;
  bool print_json = false;

  CommonFlags() { config.gamma_up = 64.0; }

  SimulationSpec spec() const {
    SimulationSpec s;
    s.config = config;
    s.config.policy = parse_policy(policy, &s.config.fixed_active_ratio);
    s.dims = GridDims{batch, channels, grid_d, grid_h, grid_w};
    s.seed = seed;
    s.shape = parse_shape(shape);
    s.model = model;
    s.cfg_flops_factor = cfg_flops_factor;
    return s;
  }
};

void add_sampler_flags(CLI::App* app, SamplerConfig& c) {
  app->add_option("--steps", c.total_steps, "Sampling steps N")->capture_default_str();
  app->add_option("--rho-a", c.rho_a, "Full-sampling fraction; anchor = ceil(N * rho_a)")
      ->capture_default_str();
  app->add_option("--rho-cfg-off", c.rho_cfg_off, "Refinement start fraction")->capture_default_str();
  app->add_option("--mu", c.mu, "PCSC log-slope per step")->capture_default_str();
  app->add_option("--omega", c.omega, "SSC acceleration weight")->capture_default_str();
  app->add_option("--tau", c.tau, "Max consecutive cached steps; 0 disables")->capture_default_str();
  app->add_option("--xi", c.xi, "Phase 3 cache ratio")->capture_default_str();
  app->add_option("--f-corr", c.f_corr, "Phase 3 correction period; 0 disables")->capture_default_str();
  app->add_option("--eta", c.eta, "Time shift factor")->capture_default_str();
  app->add_option("--cfg-lo", c.cfg_interval.lo, "CFG interval lower bound")->capture_default_str();
  app->add_option("--cfg-hi", c.cfg_interval.hi, "CFG interval upper bound")->capture_default_str();
  app->add_option("--cfg-scale", c.cfg_scale, "Guidance scale")->capture_default_str();
  app->add_option("--gamma-up", c.gamma_up, "Decoded cells per latent token (a perfect cube)")
      ->capture_default_str();
}

void add_model_flags(CLI::App* app, BlockDims& m) {
  app->add_option("--d-model", m.d_model, "Transformer width")->capture_default_str();
  app->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
  app->add_option("--n-cond", m.n_cond, "Condition tokens")->capture_default_str();
  app->add_option("--d-cond", m.d_cond, "Condition width")->capture_default_str();
  app->add_option("--mlp-ratio", m.mlp_ratio, "MLP expansion ratio")->capture_default_str();
  app->add_option("--blocks", m.blocks, "Transformer blocks L")->capture_default_str();
}

void add_run_flags(CLI::App* app, CommonFlags& f, bool with_grid) {
  add_sampler_flags(app, f.config);
  add_model_flags(app, f.model);
  app->add_option("--policy", f.policy, "Cache budget policy: pcsc | fixed:R | none")
      ->capture_default_str();
  app->add_option("--seed", f.seed, "Seed for noise and field")->capture_default_str();
  app->add_option("--cfg-flops-factor", f.cfg_flops_factor, "Cost multiplier on guided steps")
      ->capture_default_str();
  if (with_grid) {
    app->add_option("--batch", f.batch, "Batch size B")->capture_default_str();
    app->add_option("--channels", f.channels, "Latent channels C")->capture_default_str();
    app->add_option("--grid-d", f.grid_d, "Latent depth D")->capture_default_str();
    app->add_option("--grid-h", f.grid_h, "Latent height H")->capture_default_str();
    app->add_option("--grid-w", f.grid_w, "Latent width W")->capture_default_str();
    app->add_option("--shape", f.shape, "Synthetic target: sphere | box | union")
        ->capture_default_str();
  }
}

void emit(const RunReport& report, const CommonFlags& f) {
  if (!f.out_dir.empty()) {
    write_report_bundle(report, f.out_dir);
    spdlog::info("wrote {}", f.out_dir);
  }
  if (f.print_json || f.out_dir.empty()) {
    std::cout << report_json(report);
  } else {
    std::cout << report_csv(report);
  }
}

// --sweep key=v1,v2 sets one SamplerConfig field per value.
void apply_override(SamplerConfig& c, std::string& policy, const std::string& key,
                    const std::string& value) {
  auto real = [&] { return std::stod(value); };
  auto integer = [&] { return std::stoi(value); };
  static const std::map<std::string, int> keys = {
      {"steps", 0}, {"rho-a", 1}, {"rho-cfg-off", 2}, {"mu", 3},        {"omega", 4},
      {"tau", 5},   {"xi", 6},    {"f-corr", 7},      {"eta", 8},       {"cfg-scale", 9},
      {"gamma-up", 10}, {"policy", 11}};
  const auto it = keys.find(key);
  if (it == keys.end()) throw InvalidArgument("unknown sweep key '" + key + "'");
  try {
    switch (it->second) {
      case 0: c.total_steps = integer(); break;
      case 1: c.rho_a = real(); break;
      case 2: c.rho_cfg_off = real(); break;
      case 3: c.mu = real(); break;
      case 4: c.omega = real(); break;
      case 5: c.tau = integer(); break;
      case 6: c.xi = real(); break;
      case 7: c.f_corr = integer(); break;
      case 8: c.eta = real(); break;
      case 9: c.cfg_scale = real(); break;
      case 10: c.gamma_up = real(); break;
      case 11: policy = value; break;
    }
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad value '" + value + "' for sweep key '" + key + "'");
  }
}

struct SweepPoint {
  std::string name;
  std::vector<std::pair<std::string, std::string>> assignments;
};

std::vector<SweepPoint> expand_sweep(const std::vector<std::string>& axes) {
  std::vector<SweepPoint> points{{}};
  for (const auto& axis : axes) {
    const auto eq = axis.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == axis.size()) {
      throw InvalidArgument("sweep axis must look like key=v1,v2: '" + axis + "'");
    }
    const std::string key = axis.substr(0, eq);
    std::vector<std::string> values;
    std::string rest = axis.substr(eq + 1);
    for (std::size_t pos = 0;;) {
      const auto comma = rest.find(',', pos);
      values.push_back(rest.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    std::vector<SweepPoint> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        SweepPoint q = p;
        q.assignments.emplace_back(key, v);
        q.name += (q.name.empty() ? "" : "_") + key + "=" + v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  for (auto& p : points) {
    for (auto& ch : p.name) {
      if (ch == ':' || ch == '/') ch = '-';
    }
  }
  return points;
}

int run_sweep(const CommonFlags& base, const std::vector<std::string>& axes, unsigned jobs) {
  if (base.out_dir.empty()) throw InvalidArgument("--sweep needs --out");
  const auto points = expand_sweep(axes);
  std::vector<RunReport> reports(points.size());
  std::vector<std::string> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        CommonFlags f = base;
        for (const auto& [k, v] : points[i].assignments) apply_override(f.config, f.policy, k, v);
        reports[i] = simulate(f.spec()).report;
        write_report_bundle(reports[i], fs::path(base.out_dir) / points[i].name);
      } catch (const Error& e) {
        errors[i] = std::string(e.kind()) + ": " + e.what();
      }
    }
  };
  const unsigned n = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int failures = 0;
  std::cout << "run,policy,flops_reduction,relative_l2,occupancy_iou,status\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (errors[i].empty()) {
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f,%.6f,ok\n", points[i].name.c_str(),
                    reports[i].policy.c_str(), reports[i].flops_reduction, reports[i].relative_l2,
                    reports[i].occupancy_iou);
      std::cout << line;
    } else {
      ++failures;
      std::cout << points[i].name << ",,,,," << errors[i] << "\n";
    }
  }
  return failures == 0 ? kOk : kFailure;
}

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void print_schedule(const SamplerConfig& c, double sigma, std::int64_t tokens) {
  const TimeSchedule schedule(c.total_steps, c.eta);
  std::optional<PcscCalibration> cal;
  const int anchor = c.anchor_step();
  if (c.policy == BudgetPolicy::Pcsc) {
    cal = PcscCalibration{sigma, c.mu, anchor, c.gamma_up, tokens};
  }
  std::cout << "step,t,phase,guided,predicted_delta_s,pcsc_quota,budget\n";
  for (int k = 1; k <= c.total_steps; ++k) {
    std::string predicted, quota;
    if (cal && k >= anchor) {
      predicted = format_real(predict_dynamic_voxels(*cal, k));
      quota = std::to_string(cache_quota(*cal, k));
    }
    const auto budget = budget_for_step(k, c, cal ? &*cal : nullptr, tokens);
    std::cout << k << ',' << format_real(schedule.t(k)) << ',' << phase_name(phase_of(k, c)) << ','
              << (step_is_guided(schedule, k, c.cfg_interval) ? 1 : 0) << ',' << predicted << ','
              << quota << ',' << budget << '\n';
  }
}

nlohmann::ordered_json flops_json(const BlockDims& d, int steps) {
  using nlohmann::ordered_json;
  const auto mod = modulation_terms(d);
  const auto sa = self_attention_terms(d);
  const auto ca = cross_attention_terms(d);
  const auto mlp = mlp_terms(d);
  const Flops ln = flops_layernorm(d);
  const Flops block = flops_block(d);
  return {
      {"dims",
       {{"batch", d.batch},
        {"tokens", d.tokens},
        {"d_model", d.d_model},
        {"heads", d.heads},
        {"n_cond", d.n_cond},
        {"d_cond", d.d_cond},
        {"mlp_ratio", d.mlp_ratio},
        {"blocks", d.blocks},
        {"steps", steps}}},
      {"modulation",
       {{"terms", {{"silu", mod.silu}, {"linear", mod.linear}}},
        {"term_sum", mod.sum()},
        {"closed_form", flops_modulation(d)}}},
      {"layernorm", {{"each", ln}, {"count", kLayerNormsPerBlock}, {"total", kLayerNormsPerBlock * ln}}},
      {"self_attention",
       {{"terms",
         {{"qkv", sa.qkv}, {"qk", sa.qk}, {"softmax", sa.softmax}, {"attn_v", sa.attn_v},
          {"out_proj", sa.out_proj}}},
        {"term_sum", sa.sum()},
        {"closed_form", flops_self_attention(d)}}},
      {"cross_attention",
       {{"terms",
         {{"q", ca.q}, {"kv", ca.kv}, {"qk", ca.qk}, {"softmax", ca.softmax},
          {"attn_v", ca.attn_v}, {"out_proj", ca.out_proj}}},
        {"term_sum", ca.sum()},
        {"closed_form", flops_cross_attention(d)}}},
      {"mlp",
       {{"terms", {{"fc1", mlp.fc1}, {"activation", mlp.activation}, {"fc2", mlp.fc2}}},
        {"term_sum", mlp.sum()},
        {"closed_form", flops_mlp(d)}}},
      {"block", block},
      {"per_step", d.blocks * block},
      {"run_total", static_cast<Flops>(steps) * d.blocks * block},
  };
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("fast3dcache");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FAST3D_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("ignoring unknown FAST3D_LOG level '{}'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const TraceError*>(&e) != nullptr) return kTrace;
  if (dynamic_cast<const IoError*>(&e) != nullptr) return kIo;
  if (dynamic_cast<const InvalidArgument*>(&e) != nullptr ||
      dynamic_cast<const CalibrationError*>(&e) != nullptr) {
    return kUsage;
  }
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Cache-scheduling simulator for flow-matching 3D latent samplers"};
  app.require_subcommand(1);

  CommonFlags sim;
  std::vector<std::string> sweep;
  unsigned jobs = std::max(1U, std::thread::hardware_concurrency());
  auto* cmd_sim = app.add_subcommand("simulate", "Run cached and full sampling on a synthetic field");
  add_run_flags(cmd_sim, sim, true);
  cmd_sim->add_option("--out", sim.out_dir, "Directory for steps.csv and summary.json");
  cmd_sim->add_flag("--json", sim.print_json, "Print the summary JSON instead of the CSV");
  cmd_sim->add_option("--sweep", sweep, "Sweep axis key=v1,v2 (repeatable); runs go under --out");
  cmd_sim->add_option("--jobs", jobs, "Concurrent sweep runs")->capture_default_str();

  CommonFlags rep;
  std::string trace_in;
  auto* cmd_replay = app.add_subcommand("replay", "Evaluate a policy on a recorded trace");
  add_run_flags(cmd_replay, rep, false);
  cmd_replay->add_option("trace", trace_in, "Trace file")->required();
  cmd_replay->add_option("--out", rep.out_dir, "Directory for steps.csv and summary.json");
  cmd_replay->add_flag("--json", rep.print_json, "Print the summary JSON instead of the CSV");

  CommonFlags rec;
  std::string trace_out;
  auto* cmd_record = app.add_subcommand("record", "Record a full-sampling trace of a synthetic field");
  add_run_flags(cmd_record, rec, true);
  cmd_record->add_option("--out", trace_out, "Trace file to write")->required();

  SamplerConfig sched;
  sched.gamma_up = 64.0;
  std::string sched_policy = "pcsc";
  double sigma = 1000.0;
  std::int64_t sched_tokens = 4096;
  auto* cmd_schedule = app.add_subcommand("schedule", "Print the step schedule and PCSC curve");
  add_sampler_flags(cmd_schedule, sched);
  cmd_schedule->add_option("--policy", sched_policy, "pcsc | fixed:R | none")->capture_default_str();
  cmd_schedule->add_option("--sigma", sigma, "Dynamic voxels assumed at the anchor")
      ->capture_default_str();
  cmd_schedule->add_option("--tokens", sched_tokens, "Latent tokens D*H*W")->capture_default_str();

  BlockDims fd{};
  int flop_steps = 25;
  auto* cmd_flops = app.add_subcommand("flops", "Print per-component FLOPs of one block");
  add_model_flags(cmd_flops, fd);
  cmd_flops->add_option("--tokens", fd.tokens, "Active tokens")->capture_default_str();
  cmd_flops->add_option("--batch", fd.batch, "Batch size")->capture_default_str();
  cmd_flops->add_option("--steps", flop_steps, "Steps in the run total")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*cmd_sim) {
      if (!sweep.empty()) return run_sweep(sim, sweep, jobs);
      const auto spec = sim.spec();
      spdlog::info("simulating {} steps on a {}x{}x{} grid", spec.config.total_steps,
                   spec.dims.depth, spec.dims.height, spec.dims.width);
      emit(simulate(spec).report, sim);
    } else if (*cmd_replay) {
      emit(replay(rep.spec(), trace_in).report, rep);
    } else if (*cmd_record) {
      const auto spec = rec.spec();
      const SamplerConfig config = spec.resolved_config();
      auto field_spec = SyntheticFieldSpec::for_config(config, spec.dims, spec.seed);
      field_spec.shape = spec.shape;
      const SyntheticField field(field_spec);
      const auto header = record_trace(config, field, field.initial_noise(), trace_out);
      std::cout << "wrote " << trace_out << " (" << header.file_bytes() << " bytes, "
                << header.steps << " steps" << (header.has_cfg_pairs ? ", cfg pairs" : "")
                << ")\n";
    } else if (*cmd_schedule) {
      sched.policy = parse_policy(sched_policy, &sched.fixed_active_ratio);
      sched.validate();
      if (sched_tokens < 1) throw InvalidArgument("--tokens must be >= 1");
      print_schedule(sched, sigma, sched_tokens);
    } else if (*cmd_flops) {
      fd.validate();
      if (flop_steps < 1) throw InvalidArgument("--steps must be >= 1");
      std::cout << flops_json(fd, flop_steps).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: Error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
