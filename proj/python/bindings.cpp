#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <string>

#include "fast3d/error.hpp"
#include "fast3d/flops.hpp"
#include "fast3d/grid.hpp"
#include "fast3d/pcsc.hpp"
#include "fast3d/report.hpp"
#include "fast3d/schedule.hpp"
#include "fast3d/simulate.hpp"
#include "fast3d/ssc.hpp"
#include "fast3d/synthetic.hpp"
#include "fast3d/trace.hpp"

namespace py = pybind11;
using namespace fast3d;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

LatentGrid grid_from_array(const FloatArray& a) {
  if (a.ndim() != 5) throw InvalidArgument("latent array must be 5-D (B, C, D, H, W)");
  const GridDims dims{a.shape(0), a.shape(1), a.shape(2), a.shape(3), a.shape(4)};
  dims.validate();
  return LatentGrid(dims, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray grid_to_array(const LatentGrid& g) {
  const auto& d = g.dims();
  FloatArray out({d.batch, d.channels, d.depth, d.height, d.width});
  std::memcpy(out.mutable_data(), g.data().data(), g.data().size_bytes());
  return out;
}

OccupancyGrid occupancy_from_array(const BoolArray& a) {
  if (a.ndim() != 3) throw InvalidArgument("occupancy array must be 3-D");
  OccupancyGrid g(a.shape(0), a.shape(1), a.shape(2));
  const bool* p = a.data();
  for (std::int64_t i = 0; i < g.cell_count(); ++i) g.assign(i, p[i]);
  return g;
}

BoolArray occupancy_to_array(const OccupancyGrid& g) {
  BoolArray out({g.depth(), g.height(), g.width()});
  bool* p = out.mutable_data();
  for (std::int64_t i = 0; i < g.cell_count(); ++i) p[i] = g.test(i);
  return out;
}

SimulationSpec make_spec(const SamplerConfig& config, const std::optional<std::string>& policy,
                         std::uint64_t seed, const GridDims& dims, const std::string& shape,
                         const BlockDims& model) {
  SimulationSpec s;
  s.config = config;
  if (policy) s.config.policy = parse_policy(*policy, &s.config.fixed_active_ratio);
  s.seed = seed;
  s.dims = dims;
  s.shape = parse_shape(shape);
  s.model = model;
  return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cache-scheduling engine for flow-matching samplers over 3D latent grids";

  static py::exception<Error> base_error(m, "Error");
  static py::exception<InvalidArgument> invalid_argument(m, "InvalidArgument", base_error.ptr());
  static py::exception<ShapeMismatch> shape_mismatch(m, "ShapeMismatch", base_error.ptr());
  static py::exception<CalibrationError> calibration_error(m, "CalibrationError", base_error.ptr());
  static py::exception<OracleError> oracle_error(m, "OracleError", base_error.ptr());
  static py::exception<IoError> io_error(m, "IoError", base_error.ptr());
  static py::exception<TraceError> trace_error(m, "TraceError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const TraceError& e) {
      py::set_error(trace_error, (std::string(e.kind()) + ": " + e.what()).c_str());
    } catch (const InvalidArgument& e) {
      py::set_error(invalid_argument, e.what());
    } catch (const ShapeMismatch& e) {
      py::set_error(shape_mismatch, e.what());
    } catch (const CalibrationError& e) {
      py::set_error(calibration_error, e.what());
    } catch (const OracleError& e) {
      py::set_error(oracle_error, e.what());
    } catch (const IoError& e) {
      py::set_error(io_error, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<GridDims>(m, "GridDims")
      .def(py::init<std::int64_t, std::int64_t, std::int64_t, std::int64_t, std::int64_t>(),
           py::arg("batch") = 1, py::arg("channels") = 8, py::arg("depth") = 16,
           py::arg("height") = 16, py::arg("width") = 16)
      .def_readwrite("batch", &GridDims::batch)
      .def_readwrite("channels", &GridDims::channels)
      .def_readwrite("depth", &GridDims::depth)
      .def_readwrite("height", &GridDims::height)
      .def_readwrite("width", &GridDims::width)
      .def("tokens", &GridDims::tokens);

  py::enum_<Phase>(m, "Phase")
      .value("FullSampling", Phase::FullSampling)
      .value("DynamicCaching", Phase::DynamicCaching)
      .value("CfgFreeRefinement", Phase::CfgFreeRefinement);

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init([](double gamma_up) {
             SamplerConfig c;
             c.gamma_up = gamma_up;
             return c;
           }),
           py::arg("gamma_up") = 64.0)
      .def_readwrite("total_steps", &SamplerConfig::total_steps)
      .def_readwrite("rho_a", &SamplerConfig::rho_a)
      .def_readwrite("rho_cfg_off", &SamplerConfig::rho_cfg_off)
      .def_readwrite("mu", &SamplerConfig::mu)
      .def_readwrite("omega", &SamplerConfig::omega)
      .def_readwrite("tau", &SamplerConfig::tau)
      .def_readwrite("xi", &SamplerConfig::xi)
      .def_readwrite("f_corr", &SamplerConfig::f_corr)
      .def_readwrite("eta", &SamplerConfig::eta)
      .def_readwrite("cfg_scale", &SamplerConfig::cfg_scale)
      .def_readwrite("gamma_up", &SamplerConfig::gamma_up)
      .def_property(
          "cfg_interval",
          [](const SamplerConfig& c) { return std::make_pair(c.cfg_interval.lo, c.cfg_interval.hi); },
          [](SamplerConfig& c, std::pair<double, double> v) { c.cfg_interval = {v.first, v.second}; })
      .def_property(
          "policy",
          [](const SamplerConfig& c) { return policy_name(c.policy, c.fixed_active_ratio); },
          [](SamplerConfig& c, const std::string& p) {
            c.policy = parse_policy(p, &c.fixed_active_ratio);
          })
      .def("validate", &SamplerConfig::validate)
      .def("anchor_step", &SamplerConfig::anchor_step)
      .def("refinement_start_step", &SamplerConfig::refinement_start_step);

  m.def("build_time_schedule",
        [](int n, double eta) { return TimeSchedule(n, eta).boundaries(); }, py::arg("total_steps"),
        py::arg("eta"), "Times t_1..t_N followed by the terminal 0.");
  m.def(
      "cfg_off_step",
      [](int n, double eta, double lo, double hi) {
        return cfg_off_step(TimeSchedule(n, eta), CfgInterval{lo, hi});
      },
      py::arg("total_steps"), py::arg("eta"), py::arg("lo") = 0.5, py::arg("hi") = 1.0);
  m.def("phase_of", &phase_of, py::arg("step"), py::arg("config"));

  py::class_<PcscCalibration>(m, "PcscCalibration")
      .def_readonly("sigma", &PcscCalibration::sigma)
      .def_readonly("mu", &PcscCalibration::mu)
      .def_readonly("anchor_step", &PcscCalibration::anchor_step)
      .def_readonly("gamma_up", &PcscCalibration::gamma_up)
      .def_readonly("total_tokens", &PcscCalibration::total_tokens);
  m.def(
      "calibrate",
      [](std::int64_t delta_s, int total_steps, double rho_a, double mu, double gamma_up,
         std::int64_t total_tokens) {
        return calibrate(delta_s, PcscParams{total_steps, rho_a, mu, gamma_up}, total_tokens);
      },
      py::arg("delta_s"), py::arg("total_steps") = 25, py::arg("rho_a") = 0.2,
      py::arg("mu") = -0.07, py::arg("gamma_up") = 64.0, py::arg("total_tokens") = 4096);
  m.def("predict_dynamic_voxels", &predict_dynamic_voxels, py::arg("calibration"), py::arg("step"));
  m.def("cache_quota", &cache_quota, py::arg("calibration"), py::arg("step"));
  m.def(
      "budget_for_step",
      [](int step, const SamplerConfig& config, std::optional<PcscCalibration> cal,
         std::int64_t tokens) { return budget_for_step(step, config, cal ? &*cal : nullptr, tokens); },
      py::arg("step"), py::arg("config"), py::arg("calibration") = std::nullopt,
      py::arg("total_tokens") = 4096);

  m.def("minmax_normalize", [](std::vector<double> x) { return minmax_normalize(x); });
  m.def(
      "cacheability_score",
      [](std::vector<double> v, std::vector<double> a, double omega) {
        return cacheability_score(v, a, omega);
      },
      py::arg("velocity"), py::arg("accel"), py::arg("omega") = 0.7);
  m.def(
      "select_partition",
      [](std::vector<double> scores, std::int64_t quota, int consecutive, int tau) {
        const auto p = select_partition(scores, quota, consecutive, tau);
        return py::make_tuple(p.active, p.cached, p.forced_refresh);
      },
      py::arg("scores"), py::arg("quota"), py::arg("consecutive_cached") = 0, py::arg("tau") = 3,
      "Returns (active, cached, forced_refresh).");
  m.def(
      "velocity_magnitude",
      [](const FloatArray& v, std::int64_t batch) {
        return velocity_magnitude(grid_from_array(v), batch);
      },
      py::arg("v"), py::arg("batch") = 0);
  m.def(
      "acceleration",
      [](const FloatArray& now, const FloatArray& prev, std::int64_t batch) {
        return acceleration(grid_from_array(now), grid_from_array(prev), batch);
      },
      py::arg("v_now"), py::arg("v_prev"), py::arg("batch") = 0);

  m.def(
      "decode_occupancy",
      [](const FloatArray& latent, double gamma_up, std::int64_t channel, float threshold,
         std::int64_t batch) {
        return occupancy_to_array(
            decode_occupancy(grid_from_array(latent), DecoderSpec{gamma_up, channel, threshold}, batch));
      },
      py::arg("latent"), py::arg("gamma_up") = 64.0, py::arg("channel") = 0,
      py::arg("threshold") = 0.0F, py::arg("batch") = 0);
  m.def(
      "dynamic_voxel_count",
      [](const BoolArray& prev, const BoolArray& next) {
        return dynamic_voxel_count(occupancy_from_array(prev), occupancy_from_array(next));
      },
      py::arg("prev"), py::arg("next"));

  py::class_<BlockDims>(m, "BlockDims")
      .def(py::init<>())
      .def_readwrite("batch", &BlockDims::batch)
      .def_readwrite("tokens", &BlockDims::tokens)
      .def_readwrite("d_model", &BlockDims::d_model)
      .def_readwrite("heads", &BlockDims::heads)
      .def_readwrite("n_cond", &BlockDims::n_cond)
      .def_readwrite("d_cond", &BlockDims::d_cond)
      .def_readwrite("mlp_ratio", &BlockDims::mlp_ratio)
      .def_readwrite("blocks", &BlockDims::blocks);
  m.def("flops_modulation", &flops_modulation);
  m.def("flops_layernorm", &flops_layernorm);
  m.def("flops_self_attention", &flops_self_attention);
  m.def("flops_cross_attention", &flops_cross_attention);
  m.def("flops_mlp", &flops_mlp);
  m.def("flops_block", &flops_block);

  m.def(
      "simulate_json",
      [](const SamplerConfig& config, const std::optional<std::string>& policy,
         std::uint64_t seed, const GridDims& dims, const std::string& shape, const BlockDims& model) {
        const auto spec = make_spec(config, policy, seed, dims, shape, model);
        py::gil_scoped_release release;
        return report_json(simulate(spec).report);
      },
      py::arg("config"), py::arg("policy") = std::nullopt, py::arg("seed") = 0,
      py::arg("dims") = GridDims{1, 8, 16, 16, 16}, py::arg("shape") = "sphere",
      py::arg("model") = BlockDims{});
  m.def(
      "replay_json",
      [](const std::string& path, const SamplerConfig& config,
         const std::optional<std::string>& policy,
         std::uint64_t seed, const BlockDims& model) {
        const auto spec = make_spec(config, policy, seed, GridDims{}, "sphere", model);
        py::gil_scoped_release release;
        return report_json(replay(spec, path).report);
      },
      py::arg("path"), py::arg("config"), py::arg("policy") = std::nullopt, py::arg("seed") = 0,
      py::arg("model") = BlockDims{});
  m.def(
      "record_trace",
      [](const std::string& path, const SamplerConfig& config, std::uint64_t seed,
         const GridDims& dims, const std::string& shape) {
        auto fs = SyntheticFieldSpec::for_config(config, dims, seed);
        fs.shape = parse_shape(shape);
        const SyntheticField field(fs);
        return record_trace(config, field, field.initial_noise(), path).file_bytes();
      },
      py::arg("path"), py::arg("config"), py::arg("seed") = 0,
      py::arg("dims") = GridDims{1, 8, 16, 16, 16}, py::arg("shape") = "sphere",
      "Records a full-sampling trace of the synthetic field; returns the file size.");
  m.def(
      "synthetic_noise",
      [](const GridDims& dims, std::uint64_t seed) { return grid_to_array(seeded_noise(dims, seed)); },
      py::arg("dims"), py::arg("seed") = 0);
}
