#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "erbp/generators.hpp"

using namespace erbp;

namespace {

std::vector<Generator> all_kinds() {
  return {Generator::shannon(),    Generator::burg(),       Generator::euclidean(), Generator::tsallis(2.0),
          Generator::tsallis(0.5), Generator::tsallis(3.0), Generator::beta(1.0),   Generator::beta(-0.5),
          Generator::beta(2.0)};
}

Distribution interior_pair_member(std::size_t n, double delta, RandomSource& rng) {
  return clamp_interior(random_flat_dirichlet(n, rng), delta);
}

double dot_diff(const std::vector<double>& a, const std::vector<double>& b, const Distribution& p,
                const Distribution& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) s += (a[i] - b[i]) * (p[i] - q[i]);
  return s;
}

}  // namespace

TEST(Generator, NamesMatchConfigSyntax) {
  EXPECT_EQ(Generator::shannon().name(), "shannon");
  EXPECT_EQ(Generator::tsallis(2).name(), "tsallis(alpha=2)");
  EXPECT_EQ(Generator::beta(0.5).name(), "beta(beta=0.5)");
}

TEST(Generator, RejectsDegenerateParameters) {
  EXPECT_THROW(Generator::tsallis(1.0), Error);
  EXPECT_THROW(Generator::tsallis(0.0), Error);
  EXPECT_THROW(Generator::beta(0.0), Error);
  EXPECT_THROW(Generator::beta(-1.0), Error);
}

TEST(Generator, DerivativesMatchFiniteDifferences) {
  for (const auto& g : all_kinds()) {
    for (double x : {0.01, 0.1, 0.37, 0.8}) {
      const double h = 1e-6 * x;
      EXPECT_NEAR(g.fp(x), (g.f(x + h) - g.f(x - h)) / (2 * h), 1e-5 * std::max(1.0, std::abs(g.fp(x)))) << g.name();
      EXPECT_NEAR(g.fpp(x), (g.fp(x + h) - g.fp(x - h)) / (2 * h), 1e-5 * std::max(1.0, g.fpp(x))) << g.name();
    }
  }
}

TEST(Generator, GradientInverseRoundTrip) {
  for (const auto& g : all_kinds()) {
    for (double x : {1e-4, 0.02, 0.5, 0.99}) {
      EXPECT_NEAR(g.fp_inverse(g.fp(x)), x, 1e-10 * std::max(1.0, x)) << g.name();
    }
  }
}

TEST(Generator, TsallisTwoEqualsEuclidean) {
  auto t = Generator::tsallis(2.0);
  auto e = Generator::euclidean();
  for (double x : {0.0, 0.1, 0.5, 1.0}) {
    EXPECT_DOUBLE_EQ(t.f(x), e.f(x));
    EXPECT_DOUBLE_EQ(t.fp(x), e.fp(x));
  }
}

TEST(BregmanDiv, ShannonEqualsKl) {
  RandomSource rng(1, 0);
  auto g = Generator::shannon();
  for (int k = 0; k < 500; ++k) {
    auto p = interior_pair_member(2 + rng.below(20), 1e-6, rng);
    auto q = interior_pair_member(p.dim(), 1e-6, rng);
    double kl = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) kl += p[i] * std::log(p[i] / q[i]);
    EXPECT_NEAR(bregman_div(g, p, q), kl, 1e-12);
  }
}

TEST(BregmanDiv, NonNegativeAllKinds) {
  RandomSource rng(2, 0);
  for (const auto& g : all_kinds()) {
    for (int k = 0; k < 10000; ++k) {
      const std::size_t n = 2 + rng.below(10);
      auto p = interior_pair_member(n, 1e-3, rng);
      auto q = interior_pair_member(n, 1e-3, rng);
      ASSERT_GE(bregman_div(g, p, q), 0.0) << g.name();
    }
    auto p = Distribution::uniform(5);
    EXPECT_EQ(bregman_div(g, p, p), 0.0);
  }
}

TEST(BregmanDiv, BoundaryTargetRejected) {
  auto g = Generator::shannon(1e-6);
  auto p = Distribution::uniform(3);
  auto q = new_distribution({0.0, 0.5, 0.5});
  EXPECT_THROW(bregman_div(g, p, q), Error);
  try {
    bregman_div(g, p, q);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BoundaryEvaluation);
  }
  EXPECT_NO_THROW(bregman_div(Generator::euclidean(), p, q));
}

TEST(FEntropy, ShannonOffsetIsOne) {
  auto g = Generator::shannon();
  auto u = Distribution::uniform(4);
  EXPECT_NEAR(f_entropy(g, u), 1.3862943611198906 - 1.0, 1e-15);
  EXPECT_NEAR(normalized_entropy(g, u), 1.3862943611198906, 1e-15);
  EXPECT_EQ(g.entropy_offset(), 1.0);
  EXPECT_NEAR(f_entropy(g, Distribution::point_mass(4, 0)), -1.0, 0.0);
}

TEST(FEntropy, TsallisAndBetaClosedForms) {
  auto p = new_distribution({0.1, 0.2, 0.3, 0.4});
  double sq = 0.0;
  for (double x : p.vec()) sq += x * x;
  EXPECT_NEAR(normalized_entropy(Generator::tsallis(2.0), p), 1.0 - sq, 1e-15);
  EXPECT_NEAR(f_entropy(Generator::tsallis(2.0), p), -sq, 1e-15);
  EXPECT_NEAR(normalized_entropy(Generator::beta(1.0), p), 1.0 - sq, 1e-15);
  double cube = 0.0;
  for (double x : p.vec()) cube += x * x * x;
  EXPECT_NEAR(normalized_entropy(Generator::tsallis(3.0), p), (1.0 - cube) / 2.0, 1e-15);
}

TEST(FEntropy, BurgIsConstantDimension) {
  auto p = new_distribution({0.1, 0.2, 0.7});
  EXPECT_NEAR(f_entropy(Generator::burg(), p), 3.0, 1e-12);
  EXPECT_THROW(normalized_entropy(Generator::burg(), p), Error);
  EXPECT_THROW(normalized_entropy(Generator::euclidean(), p), Error);
}

TEST(FEntropy, VerticesVanishInNormalizedConvention) {
  for (const auto& g : all_kinds()) {
    if (!g.has_normalized_entropy()) continue;
    EXPECT_NEAR(normalized_entropy(g, Distribution::point_mass(6, 2)), 0.0, 1e-12) << g.name();
  }
}

TEST(CF, ShannonIsLogM) {
  auto g = Generator::shannon();
  EXPECT_NEAR(c_f(g, 10, 1000).value, 2.302585092994046, 1e-15);
  EXPECT_NEAR(c_f(g, 1, 1000).value, 0.0, 0.0);
  EXPECT_NEAR(c_f(g, 50, 10).value, std::log(10.0), 1e-15);
  EXPECT_FALSE(c_f(g, 10, 1000).heuristic);
  EXPECT_TRUE(c_f(Generator::tsallis(-1.0), 3, 3).heuristic);
}

TEST(CF, RandomSearchNeverExceeds) {
  RandomSource rng(5, 0);
  for (const auto& g : all_kinds()) {
    if (!g.has_normalized_entropy() || !g.entropy_concave()) continue;
    const std::size_t n = 12;
    for (std::size_t m : {1u, 3u, 7u}) {
      const double cap = c_f(g, m, n).value;
      for (int k = 0; k < 500; ++k) {
        std::vector<double> w(n, 0.0);
        for (std::size_t j = 0; j < m; ++j) w[rng.below(n)] += rng.exponential();
        auto p = new_distribution(w);
        EXPECT_LE(theorem_entropy(g, p), cap + 1e-9) << g.name() << " m=" << m;
      }
    }
  }
}

TEST(Constants, EstimatedEndpoints) {
  auto c = estimate_constants(Generator::shannon(), 1e-3, 10);
  EXPECT_DOUBLE_EQ(c.sigma_f, 1.0);
  EXPECT_NEAR(c.l_f, 1000.0, 1e-9);
  auto e = estimate_constants(Generator::euclidean(), 1e-3, 10);
  EXPECT_EQ(e.sigma_f, 1.0);
  EXPECT_EQ(e.l_f, 1.0);
  auto scan = scan_constants(Generator::tsallis(0.5), 1e-3);
  auto ends = estimate_constants(Generator::tsallis(0.5), 1e-3, 10);
  EXPECT_NEAR(scan.sigma_f, ends.sigma_f, 1e-9);
  EXPECT_NEAR(scan.l_f, ends.l_f, 1e-6 * ends.l_f);
  EXPECT_THROW(estimate_constants(Generator::shannon(), 0.2, 10), Error);
}

TEST(Constants, PaperConventionAlpha) {
  auto c = paper_constants(Generator::shannon());
  EXPECT_DOUBLE_EQ(alpha_coeff(c, 10), 1.0 / 11.0);
  EXPECT_THROW(paper_constants(Generator::tsallis(2.0)), Error);
}

TEST(ForwardKl, DualDirection) {
  auto p = new_distribution({0.9, 0.1});
  auto u = Distribution::uniform(2);
  EXPECT_NEAR(forward_kl(p, u), 0.5108256237659907, 1e-15);
  EXPECT_NEAR(kl_divergence(p, u), 0.3680642071684971, 1e-15);
  EXPECT_THROW(kl_divergence(u, Distribution::point_mass(2, 0)), Error);
}

// The continuity links that hold for every separable potential on the delta-interior.
TEST(ContinuityChain, TrueLinksHoldOnRandomPairs) {
  RandomSource rng(7, 0);
  const double delta = 1e-3;
  for (auto g : {Generator::shannon(delta), Generator::euclidean(delta), Generator::tsallis(2.0, delta)}) {
    for (int k = 0; k < 10000; ++k) {
      const std::size_t n = 2 + rng.below(9);
      auto c = estimate_constants(g, delta, n);
      auto p = interior_pair_member(n, delta, rng);
      auto q = interior_pair_member(n, delta, rng);
      const double d2 = l2_distance_squared(p.probs(), q.probs());
      const double b = bregman_div(g, p, q);
      const auto gp = potential_grad(g, p);
      const auto gq = potential_grad(g, q);
      ASSERT_GE(b, 0.5 * c.sigma_f * d2 - 1e-12);
      ASSERT_LE(l2_distance_squared(gp, gq), c.l_f * c.l_f * d2 * (1 + 1e-9) + 1e-15);
      ASSERT_LE(std::abs(dot_diff(gq, gp, p, q)), c.l_f * d2 * (1 + 1e-9) + 1e-15);
    }
  }
}

// |S(p) - S(q)| is not <gradF(q) - gradF(p), p - q> for the quadratic potential.
TEST(ContinuityChain, EntropyDifferenceIdentityFailsForQuadratic) {
  auto g = Generator::euclidean(1e-3);
  auto p = new_distribution({0.6, 0.3, 0.1});
  auto q = new_distribution({0.5, 0.4, 0.1});
  const double ds = std::abs(f_entropy(g, p) - f_entropy(g, q));
  EXPECT_NEAR(ds, 0.04, 1e-15);
  EXPECT_NEAR(l2_distance_squared(p.probs(), q.probs()), 0.02, 1e-15);
  EXPECT_GT(ds, 2.0 * bregman_div(g, p, q) * 1.0);
}

TEST(Concavity, MixtureLowerBound) {
  RandomSource rng(8, 0);
  for (const auto& g : all_kinds()) {
    if (!g.entropy_concave() || g.kind() == GeneratorKind::Burg) continue;
    for (int k = 0; k < 2000; ++k) {
      const std::size_t n = 2 + rng.below(10);
      auto p = interior_pair_member(n, 1e-4, rng);
      auto r = interior_pair_member(n, 1e-4, rng);
      const double lam = rng.uniform();
      auto y = mix(p, r, lam);
      EXPECT_GE(f_entropy(g, y), (1 - lam) * f_entropy(g, p) + lam * f_entropy(g, r) - 1e-12) << g.name();
    }
  }
}

TEST(Concavity, NegativeTsallisFlagged) {
  EXPECT_FALSE(Generator::tsallis(-0.5).entropy_concave());
  EXPECT_FALSE(Generator::tsallis(-0.5).supports_floor());
  EXPECT_FALSE(Generator::euclidean().supports_floor());
  EXPECT_TRUE(Generator::tsallis(2.0).supports_floor());
}
