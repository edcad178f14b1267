#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lyap {

/// A finite family of square d x d matrices together with the sampling
/// probabilities of the i.i.d. index process. Every bound, classifier and
/// simulator in this library consumes this type; treat it as immutable
/// after validation so it can be shared freely across threads.
template <class Scalar>
struct MatrixFamilyT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Eigen::Index dim = 0;
  std::vector<Matrix> matrices;
  std::vector<Scalar> probs;

  int size() const { return static_cast<int>(matrices.size()); }

  bool is_nonnegative() const {
    for (const Matrix& a : matrices)
      if ((a.array() < Scalar(0)).any()) return false;
    return true;
  }
};

using MatrixFamily = MatrixFamilyT<double>;

inline constexpr double kProbSumTol = 1e-12;

/// Checks shapes, entries and probabilities; missing probabilities are
/// replaced by the uniform vector 1/m.
template <class Scalar>
MatrixFamilyT<Scalar> validate_family(
    std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> raw,
    std::vector<Scalar> probs = {}) {
  if (raw.empty()) throw std::invalid_argument("matrix family is empty");
  const Eigen::Index d = raw.front().rows();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].rows() != raw[i].cols() || raw[i].rows() != d)
      throw std::invalid_argument(
          "dimension mismatch: matrix " + std::to_string(i) + " is " +
          std::to_string(raw[i].rows()) + "x" + std::to_string(raw[i].cols()) +
          ", expected " + std::to_string(d) + "x" + std::to_string(d));
    if (!raw[i].allFinite())
      throw std::invalid_argument("matrix " + std::to_string(i) +
                                  " has NaN or Inf entries");
  }
  const int m = static_cast<int>(raw.size());
  if (probs.empty()) probs.assign(m, Scalar(1) / Scalar(m));
  if (static_cast<int>(probs.size()) != m)
    throw std::invalid_argument("probability count does not match matrix count");
  Scalar sum{0};
  for (Scalar p : probs) {
    if (!(p > Scalar(0)) || !std::isfinite(static_cast<double>(p)))
      throw std::invalid_argument("probabilities must be positive");
    sum += p;
  }
  if (std::abs(static_cast<double>(sum) - 1.0) > kProbSumTol)
    throw std::invalid_argument("probabilities do not sum to 1");
  return MatrixFamilyT<Scalar>{d, std::move(raw), std::move(probs)};
}

/// The family {A_1^T, ..., A_m^T} with the same probabilities. The Lyapunov
/// exponent is invariant under transposition, so any bound computed on the
/// transposed family is a bound for the original one.
template <class Scalar>
MatrixFamilyT<Scalar> transpose_family(const MatrixFamilyT<Scalar>& fam) {
  MatrixFamilyT<Scalar> out = fam;
  for (auto& a : out.matrices) a.transposeInPlace();
  return out;
}

}  // namespace lyap
