#include <gtest/gtest.h>

#include <cmath>

#include "erbp/experiments.hpp"
#include "erbp/theory.hpp"

using namespace erbp;

TEST(Bigram, WorldRowsAreDistributions) {
  auto w = BigramWorld::make(16, 50, 7, 3);
  ASSERT_EQ(w.truth.size(), 16u);
  EXPECT_EQ(w.prompts.size(), 7u);
  std::set<std::size_t> distinct(w.prompts.begin(), w.prompts.end());
  EXPECT_EQ(distinct.size(), 7u);
  for (const auto& r : w.truth) {
    double s = 0.0;
    for (double x : r.vec()) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Bigram, GreedyPicksLowestIndexOnTies) {
  RandomSource rng(1, 0);
  auto row = new_distribution({0.1, 0.4, 0.4, 0.1});
  EXPECT_EQ(Decode::greedy().next(row, rng), 1u);
}

TEST(Bigram, TopOneTemperatureIsGreedy) {
  RandomSource rng(2, 0);
  auto row = new_distribution({0.1, 0.2, 0.6, 0.1});
  auto d = Decode::temperature(0.7, 1);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(d.next(row, rng), 2u);
}

TEST(Bigram, TemperatureFrequencies) {
  RandomSource rng(3, 0);
  auto row = new_distribution({0.2, 0.8});
  auto d = Decode::temperature(0.5);
  // p^(1/tau) normalized: 0.04 / (0.04 + 0.64)
  const double expect = 0.04 / 0.68;
  int hits = 0;
  const int reps = 40000;
  for (int i = 0; i < reps; ++i) hits += d.next(row, rng) == 0 ? 1 : 0;
  const double se = std::sqrt(expect * (1 - expect) / reps);
  EXPECT_NEAR(hits / static_cast<double>(reps), expect, 5 * se);
}

TEST(Bigram, GreedyCollapsesAndReservoirHolds) {
  auto w = BigramWorld::make(16, 50, 7, 11);
  BigramConfig c;
  c.rounds = 10;
  c.trials = 4;
  auto zero = run_bigram_collapse(w, Decode::greedy(), c);
  c.lambda = 0.3;
  auto held = run_bigram_collapse(w, Decode::greedy(), c);
  ASSERT_EQ(zero.size(), 40u);
  double kz = 0.0, kh = 0.0, ez = 0.0, eh = 0.0;
  for (std::size_t i = 0; i < zero.size(); ++i) {
    if (zero[i].round != 10) continue;
    kz += zero[i].kl_to_truth;
    kh += held[i].kl_to_truth;
    ez += zero[i].mean_row_entropy;
    eh += held[i].mean_row_entropy;
  }
  EXPECT_GT(kz, kh);
  EXPECT_LT(ez, eh);
}

TEST(Bigram, ThreadCountInvariant) {
  auto w = BigramWorld::make(8, 20, 3, 5);
  BigramConfig c;
  c.trials = 5;
  c.rounds = 4;
  c.lambda = 0.1;
  auto a = run_bigram_collapse(w, Decode::temperature(0.7, 4), c);
  c.threads = 3;
  auto b = run_bigram_collapse(w, Decode::temperature(0.7, 4), c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].kl_to_truth, b[i].kl_to_truth);
    EXPECT_EQ(a[i].unique_bigram_ratio, b[i].unique_bigram_ratio);
  }
}

TEST(Bigram, RejectsBadParameters) {
  auto w = BigramWorld::make(8, 20, 3, 5);
  BigramConfig c;
  c.delta = 0.5;
  EXPECT_THROW(run_bigram_collapse(w, Decode::greedy(), c), Error);
  EXPECT_THROW(BigramWorld::make(8, 20, 9, 5), Error);
  EXPECT_THROW(Decode::temperature(0.0), Error);
}

TEST(DoubleWell, WorldShape) {
  auto w = DoubleWellWorld::make();
  ASSERT_EQ(w.n(), 201u);
  EXPECT_DOUBLE_EQ(w.grid.front(), -10.0);
  EXPECT_DOUBLE_EQ(w.grid.back(), 10.0);
  const auto best = std::max_element(w.reward.begin(), w.reward.end()) - w.reward.begin();
  EXPECT_NEAR(w.grid[best], 4.0, 1e-12);
  EXPECT_LT(w.global_mass(w.p0), 1e-8);
}

TEST(DoubleWell, FullMixingReachesGlobalMass) {
  auto w = DoubleWellWorld::make();
  DoubleWellConfig c;
  c.lambda = 1.0;
  c.trials = 2;
  c.rounds = 2;
  auto r = run_double_well(w, c);
  // uniform over the grid: points with x > 1 are 90 of 201
  for (double g : r.final_global_mass()) EXPECT_NEAR(g, 90.0 / 201.0, 1e-12);
}

TEST(DoubleWell, FloorCheckRuns) {
  auto w = DoubleWellWorld::make();
  DoubleWellConfig c;
  c.lambda = 0.2;
  c.trials = 5;
  auto r = run_double_well(w, c);
  auto ctx = BoundContext::from(r.loop, ConstantsPreset::Paper);
  auto rep = check_floor(r.trajectory, ctx);
  EXPECT_TRUE(rep.pass);
}

TEST(LabelSmoothing, KnownValue) {
  auto r = label_smoothing_demo(0.1, 10);
  const double big = 0.9 + 0.01;
  const double h = -big * std::log(big) - 9 * 0.01 * std::log(0.01);
  EXPECT_NEAR(r.entropy, h, 1e-12);
  EXPECT_NEAR(r.bound, 0.1 * std::log(10.0), 1e-15);
  EXPECT_TRUE(r.ok);
  EXPECT_EQ(label_smoothing_demo(0.0, 5).entropy, 0.0);
  EXPECT_NEAR(label_smoothing_demo(1.0, 5).entropy, std::log(5.0), 1e-12);
  EXPECT_THROW(label_smoothing_demo(1.1, 5), Error);
}

TEST(LabelSmoothing, GridHasNoViolations) {
  auto g = label_smoothing_grid();
  EXPECT_EQ(g.cases, 99u * 63u);
  EXPECT_EQ(g.violations, 0u);
  EXPECT_GT(g.worst_margin, 0.0);
}

TEST(Bigram, FullCouplingTracksTruth) {
  auto w = BigramWorld::make(16, 50, 7, 9);
  BigramConfig c;
  c.lambda = 1.0;
  c.rounds = 3;
  c.trials = 2;
  for (const auto& r : run_bigram_collapse(w, Decode::temperature(0.7, 20), c)) EXPECT_LT(r.kl_to_truth, 1e-4);
}

TEST(Bigram, RatioBoundsAndGreedyTrend) {
  auto w = BigramWorld::make();
  BigramConfig c;
  c.trials = 10;
  for (const auto& d : {Decode::greedy(), Decode::temperature(0.7, 20)}) {
    const auto rows = run_bigram_collapse(w, d, c);
    for (const auto& r : rows) {
      EXPECT_GE(r.unique_bigram_ratio, 1.0 / (128.0 * 128.0));
      EXPECT_LE(r.unique_bigram_ratio, 1.0);
    }
    if (d.kind != Decode::Kind::Greedy) continue;
    std::vector<EnsemblePoint> series(c.rounds + 1);
    for (std::size_t t = 1; t <= c.rounds; ++t) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.round == t) v.push_back(r.unique_bigram_ratio);
      }
      double m = 0.0, ss = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      for (double x : v) ss += (x - m) * (x - m);
      series[t] = {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())), v.size()};
    }
    EXPECT_TRUE(check_monotone_trend(series, 2, "bigram_greedy_trend").pass);
  }
}
