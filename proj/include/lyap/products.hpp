#pragma once

#include "lyap/family.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lyap {

/// Raised when the requested ensemble A^k has more leaves than the cap.
/// Enumeration is exact or refused, never silently truncated.
struct EnsembleTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultLeafCap = std::uint64_t{1} << 24;
inline constexpr std::uint64_t kLiftedLeafCap = std::uint64_t{1} << 20;

/// One product B in A^k: the index word and its probability p_B.
/// The word is in product order, B = A[word[0]] * ... * A[word[k-1]].
struct ProductIndex {
  std::vector<int> word;
  double prob = 1.0;
};

template <class Scalar>
typename MatrixFamilyT<Scalar>::Matrix product_of_word(
    const MatrixFamilyT<Scalar>& fam, const std::vector<int>& word) {
  typename MatrixFamilyT<Scalar>::Matrix b =
      MatrixFamilyT<Scalar>::Matrix::Identity(fam.dim, fam.dim);
  for (int j : word) b = (b * fam.matrices.at(j)).eval();
  return b;
}

inline std::uint64_t ensemble_size(int m, int k, std::uint64_t cap = kDefaultLeafCap) {
  if (m < 1 || k < 1)
    throw std::invalid_argument("product ensemble requires m >= 1 and k >= 1");
  std::uint64_t n = 1;
  for (int i = 0; i < k; ++i) {
    if (n > cap / static_cast<std::uint64_t>(m))
      throw EnsembleTooLarge("ensemble too large: " + std::to_string(m) + "^" +
                             std::to_string(k) + " leaves exceed cap " +
                             std::to_string(cap));
    n *= static_cast<std::uint64_t>(m);
  }
  return n;
}

namespace detail {

// Factors the L1 norm out of the running state and returns its log;
// the zero state is left untouched and reported as -inf.
template <class Mat>
double normalize_state(Mat& s) {
  const double n = static_cast<double>(s.template lpNorm<1>());
  if (!(n > 0.0)) return -std::numeric_limits<double>::infinity();
  s /= typename Mat::Scalar(n);
  return std::log(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Depth-first walks over the product ensemble A^k.
//
// All walks visit leaves in lexicographic order of the descent path, which
// fixes the summation order and makes every reduction deterministic. The
// running state is renormalized at each edge and the discarded scale is
// carried as a log, so leaf functionals stay finite for any product length.
//
// Path conventions (path[t] is the edge taken at depth t):
//   walk_forward:   state = exp(ls) * s_hat = A[path[k-1]] ... A[path[0]] * x0
//   walk_transpose: state = exp(ls) * s_hat = (A[path[0]] ... A[path[k-1]])^T * v0
//   walk_full:      state = exp(ls) * s_hat = A[path[0]] ... A[path[k-1]]
// The three conventions enumerate the same weighted ensemble, so any
// expectation over leaves is independent of the choice.
// ---------------------------------------------------------------------------

template <class Scalar, class Leaf>
void walk_forward(const MatrixFamilyT<Scalar>& fam, int k,
                  const typename MatrixFamilyT<Scalar>::Vector& x0, Leaf&& leaf,
                  std::uint64_t cap = kDefaultLeafCap) {
  using Vector = typename MatrixFamilyT<Scalar>::Vector;
  ensemble_size(fam.size(), k, cap);
  std::vector<Vector> stage(k + 1);
  std::vector<double> scale(k + 1);
  std::vector<int> path(k);
  stage[0] = x0;
  scale[0] = detail::normalize_state(stage[0]);
  const int m = fam.size();
  auto rec = [&](auto&& self, int level, double prob) -> void {
    if (level == k) {
      leaf(std::as_const(path), prob, std::as_const(stage[k]), scale[k]);
      return;
    }
    for (int j = 0; j < m; ++j) {
      path[level] = j;
      stage[level + 1].noalias() = fam.matrices[j] * stage[level];
      scale[level + 1] = scale[level] + detail::normalize_state(stage[level + 1]);
      self(self, level + 1, prob * static_cast<double>(fam.probs[j]));
    }
  };
  rec(rec, 0, 1.0);
}

template <class Scalar, class Leaf>
void walk_transpose(const MatrixFamilyT<Scalar>& fam, int k,
                    const typename MatrixFamilyT<Scalar>::Vector& v0, Leaf&& leaf,
                    std::uint64_t cap = kDefaultLeafCap) {
  using Vector = typename MatrixFamilyT<Scalar>::Vector;
  ensemble_size(fam.size(), k, cap);
  std::vector<Vector> stage(k + 1);
  std::vector<double> scale(k + 1);
  std::vector<int> path(k);
  stage[0] = v0;
  scale[0] = detail::normalize_state(stage[0]);
  const int m = fam.size();
  auto rec = [&](auto&& self, int level, double prob) -> void {
    if (level == k) {
      leaf(std::as_const(path), prob, std::as_const(stage[k]), scale[k]);
      return;
    }
    for (int j = 0; j < m; ++j) {
      path[level] = j;
      stage[level + 1].noalias() = fam.matrices[j].transpose() * stage[level];
      scale[level + 1] = scale[level] + detail::normalize_state(stage[level + 1]);
      self(self, level + 1, prob * static_cast<double>(fam.probs[j]));
    }
  };
  rec(rec, 0, 1.0);
}

template <class Scalar, class Leaf>
void walk_full(const MatrixFamilyT<Scalar>& fam, int k, Leaf&& leaf,
               std::uint64_t cap = kDefaultLeafCap) {
  using Matrix = typename MatrixFamilyT<Scalar>::Matrix;
  ensemble_size(fam.size(), k, cap);
  std::vector<Matrix> stage(k + 1);
  std::vector<double> scale(k + 1);
  std::vector<int> path(k);
  stage[0] = Matrix::Identity(fam.dim, fam.dim);
  scale[0] = detail::normalize_state(stage[0]);
  const int m = fam.size();
  auto rec = [&](auto&& self, int level, double prob) -> void {
    if (level == k) {
      leaf(std::as_const(path), prob, std::as_const(stage[k]), scale[k]);
      return;
    }
    for (int j = 0; j < m; ++j) {
      path[level] = j;
      stage[level + 1].noalias() = stage[level] * fam.matrices[j];
      scale[level + 1] = scale[level] + detail::normalize_state(stage[level + 1]);
      self(self, level + 1, prob * static_cast<double>(fam.probs[j]));
    }
  };
  rec(rec, 0, 1.0);
}

// ---------------------------------------------------------------------------
// Reverse sweeps. The leaf returns the adjoint dphi/d(state) at its product
// state (true scale, i.e. for state = exp(ls) * s_hat); the walk scales it by
// p_B and unwinds one matvec per edge, so the total cost stays at two matvecs
// per tree node:
//   walk_forward_adjoint   returns  sum_B p_B * B^T a_B   (B as in walk_forward)
//   walk_transpose_adjoint returns  sum_B p_B * B   q_B   (B as in walk_transpose)
// ---------------------------------------------------------------------------

template <class Scalar, class Leaf>
typename MatrixFamilyT<Scalar>::Vector walk_forward_adjoint(
    const MatrixFamilyT<Scalar>& fam, int k,
    const typename MatrixFamilyT<Scalar>::Vector& x0, Leaf&& leaf,
    std::uint64_t cap = kDefaultLeafCap) {
  using Vector = typename MatrixFamilyT<Scalar>::Vector;
  ensemble_size(fam.size(), k, cap);
  std::vector<Vector> stage(k + 1);
  std::vector<double> scale(k + 1);
  std::vector<int> path(k);
  stage[0] = x0;
  scale[0] = detail::normalize_state(stage[0]);
  const int m = fam.size();
  auto rec = [&](auto&& self, int level, double prob) -> Vector {
    if (level == k)
      return prob * leaf(std::as_const(path), prob, std::as_const(stage[k]), scale[k]);
    Vector acc = Vector::Zero(fam.dim);
    for (int j = 0; j < m; ++j) {
      path[level] = j;
      stage[level + 1].noalias() = fam.matrices[j] * stage[level];
      scale[level + 1] = scale[level] + detail::normalize_state(stage[level + 1]);
      acc.noalias() += fam.matrices[j].transpose() *
                       self(self, level + 1, prob * static_cast<double>(fam.probs[j]));
    }
    return acc;
  };
  return rec(rec, 0, 1.0);
}

template <class Scalar, class Leaf>
typename MatrixFamilyT<Scalar>::Vector walk_transpose_adjoint(
    const MatrixFamilyT<Scalar>& fam, int k,
    const typename MatrixFamilyT<Scalar>::Vector& v0, Leaf&& leaf,
    std::uint64_t cap = kDefaultLeafCap) {
  using Vector = typename MatrixFamilyT<Scalar>::Vector;
  ensemble_size(fam.size(), k, cap);
  std::vector<Vector> stage(k + 1);
  std::vector<double> scale(k + 1);
  std::vector<int> path(k);
  stage[0] = v0;
  scale[0] = detail::normalize_state(stage[0]);
  const int m = fam.size();
  auto rec = [&](auto&& self, int level, double prob) -> Vector {
    if (level == k)
      return prob * leaf(std::as_const(path), prob, std::as_const(stage[k]), scale[k]);
    Vector acc = Vector::Zero(fam.dim);
    for (int j = 0; j < m; ++j) {
      path[level] = j;
      stage[level + 1].noalias() = fam.matrices[j].transpose() * stage[level];
      scale[level + 1] = scale[level] + detail::normalize_state(stage[level + 1]);
      acc.noalias() += fam.matrices[j] *
                       self(self, level + 1, prob * static_cast<double>(fam.probs[j]));
    }
    return acc;
  };
  return rec(rec, 0, 1.0);
}

// ---------------------------------------------------------------------------
// Convenience expectation: sum over B in A^k of p_B * reducer(leaf state).
// ---------------------------------------------------------------------------

enum class ProductMode { forward, transpose, full };

/// The reducer receives the renormalized leaf state (a d x 1 column in the
/// vector modes, d x d in full mode) and the log of the factored-out scale.
using LeafReducer = std::function<double(const Eigen::MatrixXd&, double)>;

inline double expect_over_products(const MatrixFamily& fam, int k, ProductMode mode,
                                   const LeafReducer& reducer,
                                   const Eigen::VectorXd* start = nullptr,
                                   std::uint64_t cap = kDefaultLeafCap) {
  double acc = 0.0;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(fam.dim);
  const Eigen::VectorXd& s0 = start ? *start : ones;
  switch (mode) {
    case ProductMode::forward:
      walk_forward(fam, k, s0,
                   [&](const std::vector<int>&, double p, const Eigen::VectorXd& y,
                       double ls) { acc += p * reducer(y, ls); },
                   cap);
      break;
    case ProductMode::transpose:
      walk_transpose(fam, k, s0,
                     [&](const std::vector<int>&, double p, const Eigen::VectorXd& w,
                         double ls) { acc += p * reducer(w, ls); },
                     cap);
      break;
    case ProductMode::full:
      walk_full(fam, k,
                [&](const std::vector<int>&, double p, const Eigen::MatrixXd& b,
                    double ls) { acc += p * reducer(b, ls); },
                cap);
      break;
  }
  return acc;
}

}  // namespace lyap
