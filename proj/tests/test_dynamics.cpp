#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "erbp/dynamics.hpp"

using namespace erbp;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

LoopConfig small_config() {
  LoopConfig c;
  c.n = 20;
  c.m = 5;
  c.steps = 15;
  c.trials = 6;
  c.master_seed = 42;
  return c;
}

}  // namespace

TEST(Reservoir, UniformHasLogN) {
  auto g = Generator::shannon();
  std::deque<Distribution> hist{Distribution::uniform(1000)};
  auto r = reservoir_dist(ReservoirSpec{}, Distribution::uniform(1000), hist, g, std::log(1000.0));
  EXPECT_NEAR(shannon_entropy(r), 6.907755278982137, 1e-12);
}

TEST(Reservoir, TemperedFlattensToUniform) {
  RandomSource rng(1, 0);
  auto g = Generator::shannon();
  auto p = clamp_interior(random_flat_dirichlet(30, rng), 1e-3);
  std::deque<Distribution> hist{p};
  ReservoirSpec spec{TemperedReservoir{1e6}, std::nullopt};
  auto r = reservoir_dist(spec, p, hist, g, 0.0);
  EXPECT_LE(l1_distance(r.probs(), Distribution::uniform(30).probs()), 1e-4);
  ReservoirSpec two{TemperedReservoir{2.0}, std::nullopt};
  auto r2 = reservoir_dist(two, p, hist, g, 0.0);
  double z = 0.0;
  for (double x : p.vec()) z += std::sqrt(x);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(r2[i], std::sqrt(p[i]) / z, 1e-14);
}

TEST(Reservoir, FixedDataSupportViolation) {
  auto g = Generator::shannon();
  ReservoirSpec spec{FixedDataReservoir{new_distribution({0.5, 0.5, 0.0})}, std::nullopt};
  std::deque<Distribution> hist{Distribution::uniform(3)};
  auto p_hat = new_distribution({0.0, 0.5, 0.5});
  try {
    reservoir_dist(spec, p_hat, hist, g, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ReservoirInvalid);
    EXPECT_NE(std::string(e.what()).find("support coverage"), std::string::npos);
  }
}

TEST(Reservoir, EntropyClauseReportsMeasurement) {
  auto g = Generator::shannon();
  ReservoirSpec spec{FixedDataReservoir{new_distribution({0.9, 0.1})}, 0.6};
  std::deque<Distribution> hist{Distribution::uniform(2)};
  try {
    reservoir_dist(spec, Distribution::uniform(2), hist, g, 0.6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ReservoirInvalid);
    EXPECT_NE(std::string(e.what()).find("0.325"), std::string::npos);
  }
}

TEST(Reservoir, SnapshotAveragesWindow) {
  auto g = Generator::shannon();
  std::deque<Distribution> hist{Distribution::point_mass(3, 0), Distribution::point_mass(3, 1),
                                Distribution::point_mass(3, 2)};
  ReservoirSpec spec{SnapshotReservoir{2}, std::nullopt};
  auto r = reservoir_dist(spec, Distribution::point_mass(3, 1), hist, g, 0.0);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 0.5);
  EXPECT_EQ(r[2], 0.5);
  EXPECT_EQ(code_of([&] { reservoir_dist(spec, r, {}, g, 0.0); }), Errc::ReservoirInvalid);
}

TEST(Schedule, HarmonicInfimum) {
  auto s = LambdaSchedule::harmonic(0.1);
  EXPECT_EQ(s.at(0), 1.0);
  EXPECT_DOUBLE_EQ(s.at(1), 0.6);
  EXPECT_NEAR(s.infimum(100), 0.11, 1e-15);
  EXPECT_EQ(s.limit_infimum(), 0.1);
  EXPECT_EQ(code_of([] { LambdaSchedule::constant(1.5); }), Errc::LambdaOutOfRange);
  EXPECT_EQ(code_of([] { LambdaSchedule::explicit_values({0.1, -0.2}); }), Errc::LambdaOutOfRange);
  EXPECT_EQ(LambdaSchedule::explicit_values({0.3, 0.1, 0.2}).infimum(3), 0.1);
}

TEST(RunStep, FullCouplingGivesUniform) {
  auto c = small_config();
  c.schedule = LambdaSchedule::constant(1.0);
  RandomSource rng(1, 0);
  auto p = Distribution::point_mass(c.n, 3);
  std::deque<Distribution> hist{p};
  auto out = run_step(p, c, 0, rng, hist);
  EXPECT_LE(l1_distance(out.next.probs(), Distribution::uniform(c.n).probs()), 1e-15);
}

TEST(RunStep, SingleSampleEcho) {
  auto c = small_config();
  c.m = 1;
  RandomSource rng(2, 0);
  auto p = Distribution::uniform(c.n);
  std::deque<Distribution> hist{p};
  auto out = run_step(p, c, 0, rng, hist);
  EXPECT_EQ(out.record.support_size, 1u);
  EXPECT_EQ(out.record.empirical_support, 1u);
  EXPECT_GT(*std::max_element(out.next.vec().begin(), out.next.vec().end()), 1.0 - 1e-7);
}

TEST(RunStep, DeterministicEchoMixes) {
  auto c = small_config();
  c.n = 4;
  c.schedule = LambdaSchedule::constant(0.2);
  c.deterministic_echo = true;
  RandomSource rng(3, 0);
  auto p = Distribution::point_mass(4, 0);
  std::deque<Distribution> hist{p};
  auto out = run_step(p, c, 0, rng, hist);
  EXPECT_NEAR(out.next[0], 0.85, 1e-15);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(out.next[i], 0.05, 1e-15);
}

TEST(RunLoop, ZeroStepsKeepsInitialStatistics) {
  auto c = small_config();
  c.steps = 0;
  auto traj = run_loop(c);
  ASSERT_EQ(traj.trials.size(), c.trials);
  for (const auto& t : traj.trials) {
    EXPECT_TRUE(t.steps.empty());
    EXPECT_NEAR(t.initial_entropy_shannon, std::log(20.0), 1e-12);
  }
}

TEST(RunLoop, ThreadCountDoesNotChangeResults) {
  auto c = small_config();
  c.inner_resamples = 30;
  c.checkpoint_every = 5;
  c.schedule = LambdaSchedule::constant(0.1);
  auto a = run_loop(c);
  c.threads = 4;
  auto b = run_loop(c);
  for (std::size_t i = 0; i < c.trials; ++i) {
    ASSERT_EQ(a.trials[i].steps.size(), b.trials[i].steps.size());
    for (std::size_t t = 0; t < a.trials[i].steps.size(); ++t) {
      EXPECT_EQ(a.trials[i].steps[t].entropy_raw, b.trials[i].steps[t].entropy_raw);
      EXPECT_EQ(a.trials[i].steps[t].eps, b.trials[i].steps[t].eps);
    }
    ASSERT_EQ(a.trials[i].checkpoints.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(a.trials[i].checkpoints[k].mean_raw, b.trials[i].checkpoints[k].mean_raw);
    EXPECT_EQ(*a.trials[i].final_state, *b.trials[i].final_state);
  }
}

TEST(RunLoop, CheckpointsDoNotPerturbMainStream) {
  auto c = small_config();
  auto plain = run_loop(c);
  c.inner_resamples = 40;
  auto with = run_loop(c);
  EXPECT_EQ(*plain.trials[2].final_state, *with.trials[2].final_state);
}

TEST(RunLoop, TrialErrorIsRecorded) {
  auto c = small_config();
  c.n = 3;
  c.m = 50;
  c.reservoir = ReservoirSpec{FixedDataReservoir{new_distribution({0.5, 0.5, 0.0})}, std::nullopt};
  c.schedule = LambdaSchedule::constant(0.5);
  auto traj = run_loop(c);
  for (const auto& t : traj.trials) {
    ASSERT_TRUE(t.error.has_value());
    EXPECT_NE(t.error->find("ReservoirInvalid"), std::string::npos);
  }
  EXPECT_EQ(traj.completed_trials(), 0u);
}

TEST(RunLoop, ConfigValidation) {
  auto c = small_config();
  c.inner_resamples = 5;
  EXPECT_EQ(code_of([&] { run_loop(c); }), Errc::InvalidArgument);
  c = small_config();
  c.p0 = Distribution::uniform(3);
  EXPECT_EQ(code_of([&] { run_loop(c); }), Errc::DimMismatch);
  c = small_config();
  c.delta = 0.1;
  EXPECT_EQ(code_of([&] { run_loop(c); }), Errc::DeltaOutOfRange);
}

TEST(RunLoop, FloorHeldWithReservoir) {
  auto c = small_config();
  c.n = 50;
  c.schedule = LambdaSchedule::constant(0.3);
  auto traj = run_loop(c);
  const double floor = 0.3 * std::log(50.0);
  for (const auto& t : traj.trials) {
    for (const auto& s : t.steps) EXPECT_GE(s.entropy_raw + 1.0, floor - 1e-9);
  }
}

TEST(ConditionalEstimate, PointMassIsDeterministic) {
  auto c = small_config();
  RandomSource rng(4, 0);
  auto est = conditional_entropy_estimate(Distribution::point_mass(c.n, 0), c, 30, rng);
  EXPECT_EQ(est.stderr_, 0.0);
  auto g = c.generator;
  auto expected = f_entropy(g, clamp_interior(Distribution::point_mass(c.n, 0), c.delta));
  EXPECT_NEAR(est.mean, expected, 1e-15);
  EXPECT_EQ(code_of([&] { conditional_entropy_estimate(Distribution::uniform(c.n), c, 5, rng); }),
            Errc::InvalidArgument);
}

TEST(ConditionalEstimate, MatchesLargeSimulation) {
  LoopConfig c;
  c.n = 100;
  c.m = 10;
  RandomSource rng(5, 0);
  auto est = conditional_entropy_estimate(Distribution::uniform(100), c, 2000, rng);
  // independent oracle: entropy of 10 uniform draws over 100 atoms
  std::mt19937 ref(12345);
  std::uniform_int_distribution<int> pick(0, 99);
  const int reps = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < reps; ++r) {
    int counts[100] = {0};
    for (int k = 0; k < 10; ++k) ++counts[pick(ref)];
    double h = 0.0;
    for (int x : counts) {
      if (x > 0) h -= (x / 10.0) * std::log(x / 10.0);
    }
    sum += h;
    sumsq += h * h;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sumsq / reps - mean * mean) / reps);
  EXPECT_NEAR(est.mean + 1.0, mean, 4.0 * std::hypot(se, est.stderr_) + 1e-5);
}

TEST(Ensemble, SeriesMeans) {
  auto c = small_config();
  auto traj = run_loop(c);
  auto s = shannon_series(traj, c.steps);
  ASSERT_EQ(s.size(), c.steps + 1);
  EXPECT_NEAR(s[0].mean, std::log(20.0), 1e-12);
  EXPECT_EQ(s[0].stderr_, 0.0);
  double direct = 0.0;
  for (const auto& t : traj.trials) direct += t.steps[4].entropy_shannon;
  EXPECT_NEAR(s[5].mean, direct / c.trials, 1e-12);
}
