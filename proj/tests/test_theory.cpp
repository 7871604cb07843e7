#include <gtest/gtest.h>

#include <cmath>

#include "erbp/theory.hpp"

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

LoopConfig shannon_config(std::size_t n, std::size_t m, double lambda) {
  LoopConfig c;
  c.n = n;
  c.m = m;
  c.schedule = LambdaSchedule::constant(lambda);
  return c;
}

const BoundRow* find_row(const BoundReport& r, const std::string& prefix) {
  for (const auto& row : r.rows) {
    if (row.label.rfind(prefix, 0) == 0) return &row;
  }
  return nullptr;
}

}  // namespace

TEST(CollapseStep, RhsAtUniformPaperConvention) {
  auto cfg = shannon_config(1000, 10, 0.0);
  cfg.steps = 1;
  auto ctx = BoundContext::from(cfg, ConstantsPreset::Paper);
  Trajectory traj;
  TrialRecord tr;
  StepRecord s;
  s.step = 1;
  s.entropy_raw = std::log(10.0) - 1.0;
  tr.steps.push_back(s);
  tr.checkpoints.push_back({0, std::log(1000.0) - 1.0, std::log(10.0) - 1.2, 0.01, 200});
  traj.trials.push_back(tr);
  auto rep = check_collapse_step(traj, ctx);
  ASSERT_FALSE(rep.rows.empty());
  EXPECT_NEAR(rep.rows[0].rhs, 6.489103443892311, 1e-12);
  EXPECT_TRUE(rep.pass);
}

TEST(CollapseStep, RequiresCheckpointsAndZeroCoupling) {
  auto cfg = shannon_config(50, 5, 0.0);
  cfg.steps = 5;
  auto traj = run_loop(cfg);
  auto ctx = BoundContext::from(cfg, ConstantsPreset::Paper);
  EXPECT_EQ(code_of([&] { check_collapse_step(traj, ctx); }), Errc::MissingCheckpoints);
  cfg.schedule = LambdaSchedule::constant(0.2);
  auto ctx2 = BoundContext::from(cfg, ConstantsPreset::Paper);
  EXPECT_EQ(code_of([&] { check_collapse_step(traj, ctx2); }), Errc::InvalidArgument);
}

TEST(CollapseStep, SmallRunPasses) {
  auto cfg = shannon_config(200, 8, 0.0);
  cfg.steps = 40;
  cfg.trials = 5;
  cfg.inner_resamples = 60;
  auto traj = run_loop(cfg);
  for (auto preset : {ConstantsPreset::Paper, ConstantsPreset::DeltaInterior}) {
    auto rep = check_collapse_step(traj, BoundContext::from(cfg, preset));
    EXPECT_TRUE(rep.pass) << to_string(preset);
  }
}

TEST(GeometricRate, NeedsThirtyTrials) {
  auto cfg = shannon_config(20, 5, 0.0);
  cfg.steps = 3;
  cfg.trials = 1;
  auto traj = run_loop(cfg);
  EXPECT_EQ(code_of([&] { check_geometric_rate(traj, BoundContext::from(cfg, ConstantsPreset::Paper)); }),
            Errc::InsufficientTrials);
}

TEST(GeometricRate, ConstantEntropyUnderDeterministicEcho) {
  auto cfg = shannon_config(20, 5, 0.0);
  cfg.steps = 30;
  cfg.trials = 30;
  cfg.deterministic_echo = true;
  auto traj = run_loop(cfg);
  auto rep = check_geometric_rate(traj, BoundContext::from(cfg, ConstantsPreset::DeltaInterior));
  EXPECT_TRUE(rep.pass);
  for (const auto& r : rep.rows) {
    if (!r.descriptive) EXPECT_NEAR(r.lhs, r.rhs, 1e-9);
  }
}

TEST(Floor, ReservoirFloorValue) {
  auto cfg = shannon_config(1000, 10, 0.2);
  cfg.steps = 20;
  cfg.trials = 3;
  auto traj = run_loop(cfg);
  auto rep = check_floor(traj, BoundContext::from(cfg, ConstantsPreset::Paper));
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.rows[0].rhs, 1.3815510557964274, 1e-12);
  EXPECT_EQ(rep.rows[0].samples, 3u);
}

TEST(Floor, ZeroCouplingIsVacuous) {
  auto cfg = shannon_config(100, 5, 0.0);
  cfg.steps = 10;
  auto traj = run_loop(cfg);
  auto rep = check_floor(traj, BoundContext::from(cfg, ConstantsPreset::Paper));
  EXPECT_TRUE(rep.pass);
  EXPECT_NE(rep.notes.find("vacuous"), std::string::npos);
}

TEST(Floor, HarmonicScheduleUsesRealizedInfimum) {
  auto cfg = shannon_config(100, 5, 0.0);
  cfg.schedule = LambdaSchedule::harmonic(0.1);
  cfg.steps = 100;
  cfg.trials = 2;
  auto traj = run_loop(cfg);
  auto rep = check_floor(traj, BoundContext::from(cfg, ConstantsPreset::Paper));
  EXPECT_TRUE(rep.pass);
  auto* uniform = find_row(rep, "uniform floor");
  ASSERT_NE(uniform, nullptr);
  EXPECT_NEAR(uniform->rhs, 0.11 * std::log(100.0), 1e-12);
}

TEST(Floor, UnsupportedKinds) {
  auto cfg = shannon_config(10, 5, 0.2);
  cfg.generator = Generator::euclidean();
  cfg.steps = 2;
  auto traj = run_loop(cfg);
  EXPECT_EQ(code_of([&] { check_floor(traj, BoundContext::from(cfg, ConstantsPreset::DeltaInterior)); }),
            Errc::GeneratorUnsupported);
}

TEST(SamplingLemma, HoldsAndAttainsMaximum) {
  auto cfg = shannon_config(1000, 10, 0.0);
  cfg.steps = 10;
  cfg.trials = 5;
  auto traj = run_loop(cfg);
  auto ctx = BoundContext::from(cfg, ConstantsPreset::Paper);
  auto rep = check_sampling_lemma(traj, ctx);
  EXPECT_TRUE(rep.pass);
  // the first draw from the uniform state is almost surely 10 distinct atoms
  EXPECT_NEAR(rep.rows[0].lhs, std::log(10.0), 1e-9);
}

TEST(SamplingLemma, SingleDraw) {
  auto cfg = shannon_config(30, 1, 0.0);
  cfg.steps = 5;
  auto traj = run_loop(cfg);
  auto rep = check_sampling_lemma(traj, BoundContext::from(cfg, ConstantsPreset::Paper));
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.rows[0].lhs, 0.0);
}

TEST(ContinuityLemma, ShannonChainHolds) {
  RandomSource rng(1, 0);
  auto pairs = random_interior_pairs(10000, 1e-3, rng);
  auto rep = check_continuity_lemma(Generator::shannon(1e-3), pairs);
  EXPECT_TRUE(rep.pass);
}

TEST(ContinuityLemma, EqualPairsGiveZero) {
  auto p = new_distribution({0.2, 0.3, 0.5});
  auto rep = check_continuity_lemma(Generator::tsallis(2.0, 1e-3), {{p, p}});
  EXPECT_TRUE(rep.pass);
  for (const auto& r : rep.rows) EXPECT_EQ(r.violations, 0u);
}

TEST(ContinuityLemma, NearBoundaryGridMarginNonNegative) {
  const double delta = 1e-3;
  auto g = Generator::shannon(delta);
  std::vector<DistributionPair> pairs;
  for (int i = 0; i <= 40; ++i) {
    for (int j = 0; j <= 40; ++j) {
      const double a = delta + (0.5 - delta) * i / 40.0;
      const double b = delta + (0.5 - delta) * j / 40.0;
      pairs.push_back({new_distribution({a, 1.0 - a}), new_distribution({b, 1.0 - b})});
    }
  }
  auto rep = check_continuity_lemma(g, pairs);
  EXPECT_TRUE(rep.pass);
  for (const auto& r : rep.rows) {
    if (!r.descriptive) EXPECT_GE(r.margin, -1e-12) << r.label;
  }
}

TEST(ContinuityLemma, QuadraticComposedBoundFails) {
  RandomSource rng(2, 0);
  auto pairs = random_interior_pairs(2000, 1e-3, rng);
  auto rep = check_continuity_lemma(Generator::euclidean(1e-3), pairs);
  EXPECT_FALSE(rep.pass);
  auto* sc = find_row(rep, "strong convexity");
  auto* gl = find_row(rep, "gradient Lipschitz");
  auto* ip = find_row(rep, "inner product");
  auto* comp = find_row(rep, "composed |dS| <= (2L/sigma) B");
  ASSERT_TRUE(sc && gl && ip && comp);
  EXPECT_TRUE(sc->ok);
  EXPECT_TRUE(gl->ok);
  EXPECT_TRUE(ip->ok);
  EXPECT_FALSE(comp->ok);
}

TEST(Generalized, TsallisCollapsePasses) {
  LoopConfig cfg;
  cfg.n = 200;
  cfg.m = 10;
  cfg.steps = 40;
  cfg.trials = 5;
  cfg.inner_resamples = 60;
  cfg.generator = Generator::tsallis(2.0);
  auto traj = run_loop(cfg);
  auto rep = check_generalized_bounds(traj, BoundContext::from(cfg, ConstantsPreset::DeltaInterior));
  EXPECT_TRUE(rep.pass);
  EXPECT_NE(find_row(rep, "decay form"), nullptr);
}

TEST(Generalized, TsallisStabilityPasses) {
  LoopConfig cfg;
  cfg.n = 200;
  cfg.m = 10;
  cfg.steps = 40;
  cfg.trials = 5;
  cfg.generator = Generator::tsallis(2.0);
  cfg.schedule = LambdaSchedule::constant(0.2);
  auto traj = run_loop(cfg);
  auto rep = check_generalized_bounds(traj, BoundContext::from(cfg, ConstantsPreset::DeltaInterior));
  EXPECT_TRUE(rep.pass);
  EXPECT_NE(find_row(rep, "stability step 1"), nullptr);
}

TEST(Generalized, EuclideanIsDescriptive) {
  LoopConfig cfg;
  cfg.n = 20;
  cfg.m = 5;
  cfg.steps = 5;
  cfg.generator = Generator::euclidean();
  cfg.schedule = LambdaSchedule::constant(0.2);
  auto traj = run_loop(cfg);
  auto rep = check_generalized_bounds(traj, BoundContext::from(cfg, ConstantsPreset::DeltaInterior));
  for (const auto& r : rep.rows) EXPECT_TRUE(r.descriptive);
  EXPECT_NE(rep.notes.find("GeneratorUnsupported"), std::string::npos);
}

TEST(FwdRev, FullSimplexAndPlantedSoftmax) {
  RandomSource rng(3, 0);
  std::vector<Distribution> targets;
  for (int k = 0; k < 5; ++k) targets.push_back(sample_realizable(Manifold::full(), 6, rng));
  EXPECT_TRUE(check_fwd_rev_coincidence(Manifold::full(), targets, {}).pass);

  Eigen::MatrixXd phi(10, 3);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) phi(i, j) = rng.normal();
  }
  auto m = Manifold::softmax(phi);
  std::vector<Distribution> planted, noisy;
  for (int k = 0; k < 5; ++k) {
    planted.push_back(sample_realizable(m, 10, rng));
    noisy.push_back(perturb(planted.back(), 0.01, rng));
  }
  EXPECT_NEAR(total_variation(planted[0], noisy[0]), 0.01, 1e-12);
  auto rep = check_fwd_rev_coincidence(m, planted, noisy);
  EXPECT_TRUE(rep.pass);
  for (const auto& r : rep.rows) {
    if (r.descriptive) {
      EXPECT_TRUE(std::isfinite(r.margin));
      EXPECT_GT(r.margin, 0.0);
    }
  }
}

TEST(Trend, DetectsIncrease) {
  std::vector<EnsemblePoint> up{{1.0, 0.0, 2}, {2.0, 0.0, 2}};
  EXPECT_FALSE(check_monotone_trend(up, 0, "trend").pass);
  std::vector<EnsemblePoint> down{{2.0, 0.0, 2}, {1.0, 0.0, 2}};
  EXPECT_TRUE(check_monotone_trend(down, 0, "trend").pass);
}
