#pragma once

#include "lyap/family.hpp"
#include "lyap/monte_carlo.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace lyap {

/// Pair of 6x6 integer matrices tied to the density of odd coefficients of
/// power-of-polynomial expansions; the first matrix has three zero rows, so
/// this family is the stock example of finite lower bounds without
/// guaranteed convergence.
inline MatrixFamily make_sigma6() {
  Eigen::MatrixXd a(6, 6), b(6, 6);
  a << 1, 0, 1, 2, 0, 0,
       0, 0, 0, 0, 0, 0,
       0, 0, 0, 0, 1, 2,
       0, 2, 1, 0, 1, 0,
       0, 0, 0, 0, 0, 0,
       0, 0, 0, 0, 0, 0;
  b << 0, 0, 0, 2, 1, 0,
       1, 0, 0, 0, 0, 0,
       1, 0, 0, 0, 0, 2,
       0, 2, 1, 0, 0, 0,
       0, 0, 1, 0, 0, 0,
       0, 0, 0, 0, 1, 0;
  return validate_family<double>({a, b});
}

/// Two-matrix family of a corner-cutting curve with cutting ratio
/// omega : (1-2*omega) : omega, 0 < omega < 1/2.
inline MatrixFamily make_derham(double omega) {
  if (!(omega > 0.0 && omega < 0.5))
    throw std::invalid_argument("derham parameter must satisfy 0 < omega < 1/2");
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << omega, 0.0,
       omega, 1.0 - 2.0 * omega;
  b << 1.0 - 2.0 * omega, omega,
       0.0, omega;
  return validate_family<double>({a, b});
}

/// { 2*Rot(pi/3), 2*diag(1,0) }: a signed pair whose exponent is nonnegative
/// yet cannot be approached by any continuous lower bound, since arbitrarily
/// small rotations of the first matrix drive the exponent to -inf.
inline MatrixFamily make_counterexample() {
  const double c = std::cos(M_PI / 3.0), s = std::sin(M_PI / 3.0);
  Eigen::MatrixXd rot(2, 2), proj(2, 2);
  rot << 2.0 * c, -2.0 * s,
         2.0 * s, 2.0 * c;
  proj << 2.0, 0.0,
          0.0, 0.0;
  return validate_family<double>({rot, proj});
}

/// Seeded pair of dim x dim matrices: entries uniform on [0,1] (or on
/// [-0.5,0.5] when signed), then independently zeroed with probability
/// 1 - density. Per entry the value is drawn first and the mask second,
/// row-major, matrix by matrix, on one mt19937_64 stream.
inline MatrixFamily make_random(int dim, double density, bool signed_entries,
                                std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("random family needs dim >= 1");
  if (!(density >= 0.0 && density <= 1.0))
    throw std::invalid_argument("density must lie in [0,1]");
  std::mt19937_64 gen(seed);
  std::vector<Eigen::MatrixXd> mats;
  for (int n = 0; n < 2; ++n) {
    Eigen::MatrixXd a(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        const double value = rng::uniform53(gen);
        const double mask = rng::uniform53(gen);
        a(i, j) = mask < density ? (signed_entries ? value - 0.5 : value) : 0.0;
      }
    mats.push_back(std::move(a));
  }
  return validate_family<double>(std::move(mats));
}

}  // namespace lyap
