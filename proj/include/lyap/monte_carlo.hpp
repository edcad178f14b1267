#pragma once

#include "lyap/family.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace lyap {

struct AllTrajectoriesDegenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sampled estimate of the Lyapunov exponent, in nats per step.
/// Reproducible bit-exactly for a fixed seed.
struct McEstimate {
  double mean = 0.0;
  double stderr_value = 0.0;  // standard error across trajectories
  int trajectories = 0;
  int length = 0;
  std::uint64_t seed = 0;
  int degenerate = 0;  // trajectories that hit the exact zero vector
};

namespace rng {

// SplitMix64; used only to spread the user seed into per-trajectory
// substreams, the trajectories themselves run on mt19937_64.
inline std::uint64_t splitmix64(std::uint64_t state) {
  std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(seed + 0x632be59bd9b4e019ULL * (counter + 1));
}

// 53-bit uniform in [0,1); avoids std distributions, whose output is
// implementation-defined, so streams match across platforms.
inline double uniform53(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline int sample_index(std::mt19937_64& g, const std::vector<double>& cum) {
  const double u = uniform53(g);
  for (std::size_t j = 0; j + 1 < cum.size(); ++j)
    if (u < cum[j]) return static_cast<int>(j);
  return static_cast<int>(cum.size()) - 1;
}

}  // namespace rng

/// Simulates N trajectories of T random applications each, renormalizing in
/// L1 every step and accumulating the discarded scale. The L1 choice only
/// guards against overflow and underflow; the limit is norm-independent.
template <class Scalar>
McEstimate monte_carlo_lambda(const MatrixFamilyT<Scalar>& fam, int T, int N,
                              std::uint64_t seed,
                              const typename MatrixFamilyT<Scalar>::Vector* x0 = nullptr) {
  using Vector = typename MatrixFamilyT<Scalar>::Vector;
  if (T < 1 || N < 1) throw std::invalid_argument("monte_carlo_lambda requires T >= 1 and N >= 1");
  Vector start;
  if (x0) {
    start = *x0;
    if (!(static_cast<double>(start.template lpNorm<1>()) > 0.0))
      throw std::invalid_argument("x0 must be a nonzero vector");
  } else {
    start = Vector::Ones(fam.dim);
  }
  start /= start.template lpNorm<1>();

  std::vector<double> cum(fam.probs.size());
  double run = 0.0;
  for (std::size_t j = 0; j < fam.probs.size(); ++j) {
    run += static_cast<double>(fam.probs[j]);
    cum[j] = run;
  }

  std::vector<double> rates;
  rates.reserve(N);
  int degenerate = 0;
  Vector y(fam.dim), z(fam.dim);
  for (int i = 0; i < N; ++i) {
    std::mt19937_64 gen(rng::substream_seed(seed, static_cast<std::uint64_t>(i)));
    y = start;
    double acc = 0.0;
    bool dead = false;
    for (int t = 0; t < T; ++t) {
      const int j = rng::sample_index(gen, cum);
      z.noalias() = fam.matrices[j] * y;
      const double n = static_cast<double>(z.template lpNorm<1>());
      if (!(n > 0.0)) {
        dead = true;
        break;
      }
      acc += std::log(n);
      y = z / Scalar(n);
    }
    if (dead) {
      ++degenerate;
      continue;
    }
    rates.push_back(acc / static_cast<double>(T));
  }

  if (rates.empty())
    throw AllTrajectoriesDegenerate(
        "Lyapunov radius estimate is -inf at sampled resolution: every trajectory "
        "reached the zero vector");

  // mean around a shift so that identical trajectories yield exactly zero spread
  const int n = static_cast<int>(rates.size());
  const double shift = rates.front();
  double mean = 0.0;
  for (double r : rates) mean += r - shift;
  mean = shift + mean / n;
  double se = 0.0;
  if (n > 1) {
    double ss = 0.0;
    for (double r : rates) ss += (r - mean) * (r - mean);
    se = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));
  }

  McEstimate est;
  est.mean = mean;
  est.stderr_value = se;
  est.trajectories = n;
  est.length = T;
  est.seed = seed;
  est.degenerate = degenerate;
  return est;
}

}  // namespace lyap
