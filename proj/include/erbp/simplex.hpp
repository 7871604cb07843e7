#pragma once

// Probability vectors on the finite simplex, the seeded random-number
// contract, multinomial sampling, mixing and interior clamping.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "erbp/errors.hpp"

namespace erbp {

inline constexpr double kSumTolerance = 1e-9;
inline constexpr double kRenormalizeTolerance = 1e-6;

namespace detail {

inline std::string fmt_index(std::size_t i, double v) {
  return "index " + std::to_string(i) + " value " + std::to_string(v);
}

}  // namespace detail

/// A dense probability vector of dimension >= 2. Immutable after construction.
class Distribution {
 public:
  /// Validates `probs`: finite, non-negative, summing to 1. A sum within 1e-6
  /// of 1 is renormalized silently; anything further off is an error.
  explicit Distribution(std::vector<double> probs) : p_(std::move(probs)) {
    if (p_.size() < 2) {
      throw Error(Errc::InvalidArgument, "distribution needs dim >= 2, got " + std::to_string(p_.size()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (!std::isfinite(p_[i])) throw Error(Errc::NonFinite, detail::fmt_index(i, p_[i]));
      if (p_[i] < 0.0) throw Error(Errc::NegativeWeight, detail::fmt_index(i, p_[i]));
      sum += p_[i];
    }
    const double gap = std::abs(sum - 1.0);
    if (gap > kRenormalizeTolerance) {
      throw Error(Errc::NotNormalized, "entries sum to " + std::to_string(sum));
    }
    if (gap > kSumTolerance) {
      for (auto& x : p_) x /= sum;
    }
  }

  static Distribution uniform(std::size_t n) {
    return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static Distribution point_mass(std::size_t n, std::size_t index) {
    if (index >= n) throw Error(Errc::InvalidArgument, "point mass index out of range");
    std::vector<double> v(n, 0.0);
    v[index] = 1.0;
    return Distribution(std::move(v));
  }

  std::size_t dim() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> probs() const noexcept { return p_; }
  const std::vector<double>& vec() const noexcept { return p_; }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> p_;
};

/// Normalizes non-negative weights onto the simplex.
inline Distribution new_distribution(std::span<const double> weights) {
  if (weights.size() < 2) {
    throw Error(Errc::InvalidArgument, "need at least 2 weights, got " + std::to_string(weights.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) throw Error(Errc::NonFinite, detail::fmt_index(i, weights[i]));
    if (weights[i] < 0.0) throw Error(Errc::NegativeWeight, detail::fmt_index(i, weights[i]));
    sum += weights[i];
  }
  if (!(sum > 0.0)) throw Error(Errc::ZeroSum, "weights sum to 0");
  std::vector<double> p(weights.begin(), weights.end());
  for (auto& x : p) x /= sum;
  return Distribution(std::move(p));
}

inline Distribution new_distribution(std::initializer_list<double> weights) {
  return new_distribution(std::span<const double>(weights.begin(), weights.size()));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seeded random stream identified by (master_seed, stream_id).
///
/// Frozen draw contract: the engine is std::mt19937_64 seeded with
/// splitmix64(master_seed ^ splitmix64(stream_id)). A uniform draw takes the
/// top 53 bits of one engine output, giving a double in [0, 1). Every other
/// distribution in the library is built from these uniforms, so sequences do
/// not depend on the standard library's distribution implementations.
class RandomSource {
 public:
  RandomSource(std::uint64_t master_seed, std::uint64_t stream_id)
      : seed_(master_seed),
        stream_(stream_id),
        engine_(detail::splitmix64(master_seed ^ detail::splitmix64(stream_id))) {}

  std::uint64_t master_seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform index in [0, n).
  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

  double exponential() { return -std::log1p(-uniform()); }

  /// Standard normal via Box-Muller, two uniforms per draw.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Independent stream derived from this stream's identity (not its state).
  RandomSource child(std::uint64_t tag) const {
    return RandomSource(seed_, detail::splitmix64(stream_ ^ detail::splitmix64(tag + 0x5851F42D4C957F2DULL)));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

/// Dirichlet(1,...,1) draw via normalized exponentials.
inline Distribution random_flat_dirichlet(std::size_t n, RandomSource& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = rng.exponential();
  return new_distribution(w);
}

/// Inverse-CDF categorical sampler. Draw i is the first index whose
/// cumulative mass exceeds u * total, so zero-mass atoms are never chosen.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const Distribution& p) : cum_(p.dim()) {
    std::partial_sum(p.vec().begin(), p.vec().end(), cum_.begin());
  }

  std::size_t draw(RandomSource& rng) const {
    const double u = rng.uniform() * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    if (it == cum_.end()) --it;
    return static_cast<std::size_t>(it - cum_.begin());
  }

 private:
  std::vector<double> cum_;
};

/// Counts of m i.i.d. categorical draws.
struct EmpiricalSample {
  std::vector<std::uint64_t> counts;
  std::uint64_t m = 0;

  Distribution distribution() const {
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      p[i] = static_cast<double>(counts[i]) / static_cast<double>(m);
    }
    return Distribution(std::move(p));
  }

  std::size_t support_size() const {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  }
};

inline EmpiricalSample sample_empirical(const CategoricalSampler& sampler, std::size_t dim, std::uint64_t m,
                                        RandomSource& rng) {
  if (m < 1) throw Error(Errc::InvalidArgument, "sample size m must be >= 1");
  EmpiricalSample s{std::vector<std::uint64_t>(dim, 0), m};
  for (std::uint64_t k = 0; k < m; ++k) ++s.counts[sampler.draw(rng)];
  return s;
}

/// Multinomial(m, P) draw: m sequential inverse-CDF categorical draws.
inline EmpiricalSample sample_empirical(const Distribution& p, std::uint64_t m, RandomSource& rng) {
  return sample_empirical(CategoricalSampler(p), p.dim(), m, rng);
}

/// (1 - lambda) * p_hat + lambda * p_res.
inline Distribution mix(const Distribution& p_hat, const Distribution& p_res, double lambda) {
  if (p_hat.dim() != p_res.dim()) {
    throw Error(Errc::DimMismatch, std::to_string(p_hat.dim()) + " vs " + std::to_string(p_res.dim()));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::LambdaOutOfRange, std::to_string(lambda));
  if (lambda == 0.0) return p_hat;
  if (lambda == 1.0) return p_res;
  std::vector<double> out(p_hat.dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - lambda) * p_hat[i] + lambda * p_res[i];
  return Distribution(std::move(out));
}

/// Number of entries strictly above `threshold`.
inline std::size_t support_size(const Distribution& p, double threshold = 0.0) {
  return static_cast<std::size_t>(
      std::count_if(p.vec().begin(), p.vec().end(), [threshold](double x) { return x > threshold; }));
}

/// Raises every entry to at least `delta` and rescales the remaining entries
/// so the total stays 1. Entries pushed below `delta` by the rescale join the
/// floored set, so the output satisfies min entry >= delta (up to rounding).
/// Inputs already in the delta-interior come back unchanged.
inline Distribution clamp_interior(const Distribution& p, double delta) {
  const std::size_t n = p.dim();
  if (!(delta > 0.0 && delta < 1.0 / static_cast<double>(n))) {
    throw Error(Errc::DeltaOutOfRange, "delta " + std::to_string(delta) + " not in (0, 1/" + std::to_string(n) + ")");
  }
  std::vector<bool> floored(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    floored[i] = p[i] < delta;
    any = any || floored[i];
  }
  if (!any) return p;

  double scale = 1.0;
  for (;;) {
    std::size_t k = 0;
    double rest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (floored[i]) ++k;
      else rest += p[i];
    }
    scale = (1.0 - static_cast<double>(k) * delta) / rest;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!floored[i] && p[i] * scale < delta) {
        floored[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = floored[i] ? delta : p[i] * scale;
  return Distribution(std::move(out));
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double total_variation(const Distribution& a, const Distribution& b) {
  if (a.dim() != b.dim()) throw Error(Errc::DimMismatch, "total_variation");
  return 0.5 * l1_distance(a.probs(), b.probs());
}

inline double l2_distance_squared(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Shannon entropy in nats; zero entries contribute 0.
inline double shannon_entropy(const Distribution& p) {
  double h = 0.0;
  for (double x : p.vec()) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

}  // namespace erbp
