#include <doctest.h>

#include <cmath>

#include "fast3d/error.hpp"
#include "fast3d/schedule.hpp"

using namespace fast3d;

namespace {

SamplerConfig defaults() {
  SamplerConfig c;
  c.gamma_up = 64.0;
  return c;
}

}  // namespace

TEST_CASE("default hyperparameters") {
  const SamplerConfig c;
  CHECK(c.total_steps == 25);
  CHECK(c.rho_a == 0.2);
  CHECK(c.rho_cfg_off == 0.75);
  CHECK(c.mu == -0.07);
  CHECK(c.omega == 0.7);
  CHECK(c.tau == 3);
  CHECK(c.xi == 0.7);
  CHECK(c.f_corr == 3);
  CHECK(c.eta == 3.0);
  CHECK(c.cfg_interval.lo == 0.5);
  CHECK(c.cfg_interval.hi == 1.0);
}

TEST_CASE("gamma_up has no default") {
  const SamplerConfig c;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK_NOTHROW(defaults().validate());
}

TEST_CASE("config validation") {
  auto c = defaults();
  c.rho_a = 0.8;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = defaults();
  c.total_steps = 5;
  CHECK_THROWS_AS(c.validate(), CalibrationError);
  c.policy = BudgetPolicy::Disabled;
  CHECK_NOTHROW(c.validate());
  c = defaults();
  c.omega = 1.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = defaults();
  c.eta = 0.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = defaults();
  c.xi = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = defaults();
  c.tau = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("shift map") {
  CHECK(shift_time(1.0 / 3.0, 2.0) == doctest::Approx(0.5));
  CHECK(shift_time(0.25, 3.0) == doctest::Approx(0.5));
  for (double u : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    CHECK(shift_time(u, 1.0) == u);
    CHECK(unshift_time(shift_time(u, 3.0), 3.0) == doctest::Approx(u));
  }
}

TEST_CASE("time schedule") {
  const TimeSchedule s(25, 1.0);
  for (int k = 1; k <= 25; ++k) CHECK(s.t(k) == doctest::Approx(1.0 - (k - 1) / 25.0));
  CHECK(s.t_prev(25) == 0.0);
  CHECK(s.boundaries().size() == 26);
  const TimeSchedule shifted(25, 3.0);
  CHECK(shifted.t(1) == 1.0);
  for (int k = 1; k < 25; ++k) CHECK(shifted.t(k) > shifted.t(k + 1));
  CHECK(shifted.t_prev(25) == 0.0);
  CHECK_THROWS_AS(TimeSchedule(0, 1.0), InvalidArgument);
}

TEST_CASE("CFG turns off at the expected steps") {
  const CfgInterval cfg{0.5, 1.0};
  CHECK(cfg_off_step(TimeSchedule(25, 1.0), cfg) == 13);
  CHECK(cfg_off_step(TimeSchedule(25, 2.0), cfg) == 17);
  CHECK(cfg_off_step(TimeSchedule(25, 3.0), cfg) == 19);
  const TimeSchedule s(25, 3.0);
  for (int k = 1; k <= 25; ++k) CHECK(step_is_guided(s, k, cfg) == (k < 19));
  CHECK_FALSE(cfg_off_step(TimeSchedule(25, 3.0), CfgInterval{0.0, 1.0}).has_value());
}

TEST_CASE("phase boundaries") {
  const auto c = defaults();
  for (int k = 1; k <= 25; ++k) {
    const auto p = phase_of(k, c);
    if (k <= 5) {
      CHECK(p == Phase::FullSampling);
    } else if (k >= 19) {
      CHECK(p == Phase::CfgFreeRefinement);
    } else {
      CHECK(p == Phase::DynamicCaching);
    }
  }
  CHECK_THROWS_AS(phase_of(0, c), InvalidArgument);
  CHECK_THROWS_AS(phase_of(26, c), InvalidArgument);
}

TEST_CASE("phase boundaries follow the ceiling formulas") {
  auto c = defaults();
  c.policy = BudgetPolicy::Disabled;
  for (int n = 1; n <= 60; ++n) {
    for (double ra : {0.05, 0.1, 0.2, 0.33, 0.5}) {
      for (double ro : {0.55, 0.6, 0.75, 0.9, 0.99}) {
        c.total_steps = n;
        c.rho_a = ra;
        c.rho_cfg_off = ro;
        const int a = static_cast<int>(std::ceil(n * ra - 1e-9));
        const int r = static_cast<int>(std::ceil(n * ro - 1e-9));
        for (int k = 1; k <= n; ++k) {
          const auto p = phase_of(k, c);
          const Phase expect = k <= a ? Phase::FullSampling
                               : k >= r ? Phase::CfgFreeRefinement
                                        : Phase::DynamicCaching;
          CHECK(p == expect);
        }
      }
    }
  }
}

TEST_CASE("budgets per phase") {
  const auto c = defaults();
  const PcscCalibration cal{1000.0, -0.07, 5, 64.0, 4096};
  for (int k = 1; k <= 5; ++k) CHECK(budget_for_step(k, c, &cal, 4096) == 0);
  for (int k = 6; k <= 18; ++k) CHECK(budget_for_step(k, c, &cal, 4096) == cache_quota(cal, k));
  CHECK(budget_for_step(19, c, &cal, 4096) == 2867);
  CHECK(budget_for_step(20, c, &cal, 4096) == 2867);
  CHECK(budget_for_step(21, c, &cal, 4096) == 0);
  CHECK(budget_for_step(24, c, &cal, 4096) == 0);
  CHECK(budget_for_step(25, c, &cal, 4096) == 2867);
  CHECK_THROWS_AS(budget_for_step(6, c, nullptr, 4096), CalibrationError);
}

TEST_CASE("correction steps land on k_refine = 2, 5, 8, ...") {
  auto c = defaults();
  c.total_steps = 60;
  const int start = c.refinement_start_step();
  const PcscCalibration cal{0.0, -0.07, c.anchor_step(), 64.0, 100};
  for (int k = start; k <= 60; ++k) {
    const bool full = budget_for_step(k, c, &cal, 100) == 0;
    CHECK(full == ((k - start) % 3 == 2));
  }
  c.f_corr = 0;
  for (int k = start; k <= 60; ++k) CHECK(budget_for_step(k, c, &cal, 100) == 70);
  c.f_corr = 1;
  for (int k = start; k <= 60; ++k) CHECK(budget_for_step(k, c, &cal, 100) == 0);
}

TEST_CASE("fixed and disabled policies") {
  auto c = defaults();
  c.policy = BudgetPolicy::Fixed;
  c.fixed_active_ratio = 0.25;
  CHECK(budget_for_step(1, c, nullptr, 4096) == 0);
  CHECK(budget_for_step(2, c, nullptr, 4096) == 0);
  for (int k = 3; k <= 18; ++k) CHECK(budget_for_step(k, c, nullptr, 4096) == 3072);
  CHECK(budget_for_step(19, c, nullptr, 4096) == 2867);
  CHECK(budget_for_step(21, c, nullptr, 4096) == 0);
  c.policy = BudgetPolicy::Disabled;
  for (int k = 1; k <= 25; ++k) CHECK(budget_for_step(k, c, nullptr, 4096) == 0);
}

TEST_CASE("policy names") {
  CHECK(policy_name(BudgetPolicy::Pcsc, 0.0) == "pcsc");
  CHECK(policy_name(BudgetPolicy::Disabled, 0.0) == "none");
  CHECK(policy_name(BudgetPolicy::Fixed, 0.25) == "fixed:0.25");
  CHECK(policy_name(BudgetPolicy::Fixed, 0.125) == "fixed:0.125");
  CHECK(phase_name(Phase::DynamicCaching) == "dynamic_caching");
}
