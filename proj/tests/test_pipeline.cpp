#include <doctest.h>

#include <random>

#include "fast3d/error.hpp"
#include "fast3d/pipeline.hpp"
#include "fast3d/reference.hpp"
#include "fast3d/synthetic.hpp"
#include "support.hpp"

using namespace fast3d;
using fast3d::testing::ConstantOracle;
using fast3d::testing::CountingDecoder;
using fast3d::testing::LinearOracle;
using fast3d::testing::random_grid;

namespace {

SamplerConfig base_config(int steps = 25) {
  SamplerConfig c;
  c.total_steps = steps;
  c.gamma_up = 8.0;
  return c;
}

const ThresholdDecoder kDecoder(DecoderSpec{8.0, 0, 0.0F});

}  // namespace

TEST_CASE("zero velocity leaves the state unchanged") {
  std::mt19937_64 rng(1);
  const GridDims dims{1, 3, 4, 4, 4};
  const auto noise = random_grid(dims, rng);
  const ConstantOracle zero{LatentGrid(dims)};
  const Fast3DSampler sampler(base_config(), zero, kDecoder);
  CHECK(sampler.run(noise).final_state == noise);
}

TEST_CASE("disabled caching reproduces the plain Euler loop bitwise") {
  std::mt19937_64 rng(2);
  const GridDims dims{2, 3, 4, 3, 5};
  const auto noise = random_grid(dims, rng);
  const LinearOracle oracle(dims, 7);
  auto c = base_config(12);
  c.policy = BudgetPolicy::Disabled;
  const Fast3DSampler sampler(c, oracle, kDecoder);
  const auto r = sampler.run(noise);
  CHECK(r.final_state == run_full_oracle(c, oracle, noise));
  for (const auto& s : r.steps) CHECK(s.cached_tokens == 0);
}

TEST_CASE("single-step run is one Euler step") {
  const GridDims dims{1, 1, 1, 1, 2};
  const LatentGrid noise(dims, {1.0F, -2.0F});
  const ConstantOracle v{LatentGrid(dims, {0.5F, 0.25F})};
  auto c = base_config(1);
  c.policy = BudgetPolicy::Disabled;
  c.cfg_scale = 1.0;
  const auto out = run_full_oracle(c, v, noise);
  CHECK(out.at(0, 0, 0) == 1.0F - 1.0F * 0.5F);
  CHECK(out.at(0, 0, 1) == -2.0F - 1.0F * 0.25F);
  const Fast3DSampler sampler(c, v, kDecoder);
  CHECK(sampler.run(noise).final_state == out);
}

TEST_CASE("constant field makes cached and full runs coincide") {
  std::mt19937_64 rng(3);
  const GridDims dims{1, 4, 6, 6, 6};
  const auto noise = random_grid(dims, rng);
  const ConstantOracle field{random_grid(dims, rng)};
  for (auto policy : {BudgetPolicy::Pcsc, BudgetPolicy::Fixed}) {
    auto c = base_config();
    c.policy = policy;
    const Fast3DSampler sampler(c, field, kDecoder);
    const auto r = sampler.run(noise);
    std::int64_t cached = 0;
    for (const auto& s : r.steps) cached += s.cached_tokens;
    CHECK(cached > 0);
    CHECK(r.final_state == run_full_oracle(c, field, noise));
  }
}

TEST_CASE("oracle sees only active tokens and work is conserved") {
  std::mt19937_64 rng(4);
  const GridDims dims{1, 3, 6, 6, 6};
  const auto noise = random_grid(dims, rng);
  const LinearOracle oracle(dims, 11);
  const auto c = base_config();
  const Fast3DSampler sampler(c, oracle, kDecoder);
  const auto r = sampler.run(noise);
  std::int64_t expected_tokens = 0;
  int expected_calls = 0;
  std::int64_t active_sum = 0;
  for (const auto& s : r.steps) {
    CHECK(s.active_tokens + s.cached_tokens == dims.tokens());
    const int branches = s.guided ? 2 : 1;
    if (s.active_tokens > 0) {
      expected_calls += branches;
      expected_tokens += branches * s.active_tokens;
    }
    CHECK(s.oracle_calls == (s.active_tokens > 0 ? branches : 0));
    active_sum += s.active_tokens;
  }
  CHECK(oracle.calls.load() == expected_calls);
  CHECK(oracle.tokens.load() == expected_tokens);
  CHECK(r.evaluated_tokens == active_sum);
}

TEST_CASE("guided steps evaluate both branches exactly inside the interval") {
  std::mt19937_64 rng(5);
  const GridDims dims{1, 2, 3, 3, 3};
  const LinearOracle oracle(dims, 2);
  for (double eta : {1.0, 2.0, 3.0}) {
    auto c = base_config();
    c.eta = eta;
    c.policy = BudgetPolicy::Disabled;
    const Fast3DSampler sampler(c, oracle, kDecoder);
    const auto r = sampler.run(random_grid(dims, rng));
    const int off = eta == 1.0 ? 13 : (eta == 2.0 ? 17 : 19);
    for (const auto& s : r.steps) {
      CHECK(s.guided == (s.step < off));
      CHECK(s.oracle_calls == (s.step < off ? 2 : 1));
    }
  }
}

TEST_CASE("phase 2 never caches more than tau consecutive steps") {
  const SyntheticField field(SyntheticFieldSpec::for_config(base_config(), {1, 4, 8, 8, 8}, 3));
  for (int tau : {1, 2, 3, 4}) {
    auto c = base_config();
    c.tau = tau;
    const Fast3DSampler sampler(c, field, kDecoder);
    const auto r = sampler.run(field.initial_noise());
    int run = 0;
    for (const auto& s : r.steps) {
      run = s.cached_tokens > 0 ? run + 1 : 0;
      CHECK(run <= tau);
    }
  }
}

TEST_CASE("calibration uses exactly one occupancy comparison") {
  const GridDims dims{1, 4, 8, 8, 8};
  const SyntheticField field(SyntheticFieldSpec::for_config(base_config(), dims, 9));
  const CountingDecoder decoder(DecoderSpec{8.0, 0, 0.0F});
  const Fast3DSampler sampler(base_config(), field, decoder);
  const auto r = sampler.run(field.initial_noise());
  CHECK(r.occupancy_comparisons == 1);
  CHECK(decoder.decodes.load() == 2);
  REQUIRE(r.calibrations.size() == 1);
  CHECK(r.calibrations[0].anchor_step == 5);
  int measured = 0;
  for (const auto& s : r.steps) {
    if (s.delta_s) {
      ++measured;
      CHECK(s.step == 5);
      CHECK(static_cast<double>(*s.delta_s) == r.calibrations[0].sigma);
    }
  }
  CHECK(measured == 1);
}

TEST_CASE("batch elements calibrate and partition independently") {
  const GridDims dims{2, 4, 8, 8, 8};
  const SyntheticField field(SyntheticFieldSpec::for_config(base_config(), dims, 4));
  const Fast3DSampler sampler(base_config(), field, kDecoder);
  const auto r = sampler.run(field.initial_noise());
  CHECK(r.calibrations.size() == 2);
  CHECK(r.occupancy_comparisons == 2);
  for (const auto& s : r.steps) {
    CHECK(s.partitions.size() == 2);
    CHECK(s.quota.size() == 2);
  }
}

TEST_CASE("step advances one step at a time") {
  const GridDims dims{1, 2, 4, 4, 4};
  std::mt19937_64 rng(6);
  const LinearOracle oracle(dims, 3);
  const auto c = base_config(10);
  const Fast3DSampler sampler(c, oracle, kDecoder);
  auto s = sampler.begin(random_grid(dims, rng));
  for (int k = 1; k <= 10; ++k) {
    const auto rec = sampler.step(s);
    CHECK(rec.step == k);
    CHECK(s.v_cache.step_index == k);
    CHECK(s.v_prev_cache.step_index == k - 1);
  }
  CHECK_THROWS_AS(sampler.step(s), InvalidArgument);
}

TEST_CASE("sampler rejects mismatched decoder and invalid configs") {
  const GridDims dims{1, 1, 2, 2, 2};
  const ConstantOracle zero{LatentGrid(dims)};
  auto c = base_config();
  c.gamma_up = 64.0;
  CHECK_THROWS_AS(Fast3DSampler(c, zero, kDecoder), InvalidArgument);
  c = base_config(4);
  CHECK_THROWS_AS(Fast3DSampler(c, zero, kDecoder), CalibrationError);
}

TEST_CASE("cost model bills active tokens per batch element") {
  const GridDims dims{1, 4, 8, 8, 8};
  const SyntheticField field(SyntheticFieldSpec::for_config(base_config(), dims, 1));
  const Fast3DSampler sampler(base_config(), field, kDecoder);
  RunOptions opt;
  opt.cost_model = BlockDims{1, 0, 64, 4, 16, 32, 4, 2};
  const auto r = sampler.run(field.initial_noise(), opt);
  for (const auto& s : r.steps) {
    CHECK(s.flops == step_flops(*opt.cost_model, s.active_tokens, s.guided, 2.0));
  }
}
