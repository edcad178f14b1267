#pragma once

#include "lyap/bounds.hpp"
#include "lyap/family.hpp"
#include "lyap/optim.hpp"
#include "lyap/products.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace lyap {

// ---------------------------------------------------------------------------
// Semidefinite lifting: replace each A_j by X -> A_j X A_j^T acting on
// symmetric d x d matrices. The lifted family leaves the semidefinite cone
// invariant and its exponent is exactly twice the original one, which turns
// cone-based upper bounds into bounds for arbitrary signed families.
// ---------------------------------------------------------------------------

/// Orthonormal coordinates on symmetric matrices: diagonal entries first-come
/// along the row-major upper triangle, off-diagonals scaled by sqrt(2) so the
/// Frobenius inner product becomes the dot product.
inline Eigen::VectorXd svec(const Eigen::MatrixXd& x) {
  const Eigen::Index d = x.rows();
  Eigen::VectorXd out(d * (d + 1) / 2);
  const double s = std::sqrt(2.0);
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j)
      out(t++) = i == j ? x(i, i) : s * 0.5 * (x(i, j) + x(j, i));
  return out;
}

inline Eigen::MatrixXd smat(const Eigen::VectorXd& v, Eigen::Index d) {
  Eigen::MatrixXd out(d, d);
  const double s = 1.0 / std::sqrt(2.0);
  Eigen::Index t = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) {
      out(i, j) = i == j ? v(t) : s * v(t);
      out(j, i) = out(i, j);
      ++t;
    }
  return out;
}

struct LiftedFamily {
  MatrixFamily base;
  MatrixFamily rep;  // the operators X -> A X A^T in svec coordinates
};

/// A point of { X psd, tr(VX) = 1 } together with its constraint residuals.
struct SpectrahedronPoint {
  Eigen::MatrixXd x;
  double trace_constraint_value = 0.0;
  double min_eigenvalue = 0.0;
  bool valid(double tol = 1e-10) const {
    return min_eigenvalue >= -tol && std::abs(trace_constraint_value - 1.0) <= tol;
  }
};

inline SpectrahedronPoint check_spectrahedron_point(const Eigen::MatrixXd& x,
                                                    const Eigen::MatrixXd& v) {
  SpectrahedronPoint p;
  p.x = x;
  p.trace_constraint_value = v.cwiseProduct(x).sum();
  p.min_eigenvalue =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (x + x.transpose()))
          .eigenvalues()
          .minCoeff();
  return p;
}

inline Eigen::MatrixXd apply_lifted(const MatrixFamily& fam, int j,
                                    const Eigen::MatrixXd& x) {
  return fam.matrices.at(j) * x * fam.matrices.at(j).transpose();
}

inline LiftedFamily lift(const MatrixFamily& fam) {
  const Eigen::Index d = fam.dim;
  const Eigen::Index n = d * (d + 1) / 2;
  std::vector<Eigen::MatrixXd> reps;
  for (const auto& a : fam.matrices) {
    Eigen::MatrixXd rep(n, n);
    for (Eigen::Index t = 0; t < n; ++t) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(t) = 1.0;
      rep.col(t) = svec(a * smat(e, d) * a.transpose());
    }
    reps.push_back(std::move(rep));
  }
  return LiftedFamily{fam, validate_family<double>(std::move(reps), fam.probs)};
}

// ---------------------------------------------------------------------------
// Certified upper bound via the lifted cone: maximize the concave map
//   X -> (1/2k) E log tr(V B X B^T)
// over the spectrahedron { X psd, tr(VX) = 1 } with Frank-Wolfe. The linear
// oracle is one extreme-eigenvector computation after the change of variables
// Y = V^(1/2) X V^(1/2), and value + gap certifiably upper-bounds the
// supremum, hence the exponent. An interior-point solve would only give the
// optimum up to solver tolerance on the wrong side.
// ---------------------------------------------------------------------------

inline BoundReport gamma_sdp_upper(
    const MatrixFamily& fam, int k, const Eigen::MatrixXd* v_in = nullptr,
    double tol = 1e-7, int max_iters = 5000, std::uint64_t cap = kLiftedLeafCap,
    const std::function<void(const Eigen::MatrixXd&)>& iterate_hook = {}) {
  detail::WallTimer timer;
  const Eigen::Index d = fam.dim;
  Eigen::MatrixXd v = v_in ? *v_in : Eigen::MatrixXd::Identity(d, d);
  if (v.rows() != d || v.cols() != d || !v.isApprox(v.transpose(), 1e-12))
    throw std::invalid_argument("V must be a symmetric d x d matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("V must be positive definite");
  const Eigen::VectorXd sqrt_ev = es.eigenvalues().array().sqrt();
  const Eigen::MatrixXd v_half =
      es.eigenvectors() * sqrt_ev.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::MatrixXd v_mhalf = es.eigenvectors() *
                                  sqrt_ev.cwiseInverse().asDiagonal() *
                                  es.eigenvectors().transpose();
  const Eigen::MatrixXd x_start = (v_mhalf * v_mhalf) / static_cast<double>(d);

  const std::uint64_t leaves = ensemble_size(fam.size(), k, cap);

  FwProblem<Eigen::MatrixXd> prob;
  prob.value_and_grad = [&fam, k, &v, cap, d](const Eigen::MatrixXd& x,
                                              Eigen::MatrixXd& grad) {
    double val = 0.0;
    grad.setZero(d, d);
    walk_full(
        fam, k,
        [&](const std::vector<int>&, double p, const Eigen::MatrixXd& bhat, double ls) {
          const Eigen::MatrixXd c = bhat.transpose() * v * bhat;
          const double tr = c.cwiseProduct(x).sum();  // tr(V B X B^T) / exp(2 ls)
          if (tr > kLogGuard && std::isfinite(ls)) {
            val += p * (2.0 * ls + std::log(tr));
            grad.noalias() += (p / tr) * c;
          } else {
            val = detail::kNegInf;
          }
        },
        cap);
    grad /= 2.0 * k;
    return val / (2.0 * k);
  };
  prob.linear_oracle = [&v_mhalf](const Eigen::MatrixXd& g) {
    const Eigen::MatrixXd m = v_mhalf * g * v_mhalf;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    const Eigen::VectorXd u = v_mhalf * eig.eigenvectors().col(m.rows() - 1);
    return Eigen::MatrixXd(u * u.transpose());
  };
  prob.inner = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.cwiseProduct(b).sum();
  };
  if (leaves <= kLiftedLeafCap) {
    prob.segment_max = [&fam, k, &v, cap](const Eigen::MatrixXd& x,
                                          const Eigen::MatrixXd& s) {
      std::vector<double> pw, aa, bb;
      walk_full(
          fam, k,
          [&](const std::vector<int>&, double p, const Eigen::MatrixXd& bhat, double) {
            const Eigen::MatrixXd c = bhat.transpose() * v * bhat;
            const double a = c.cwiseProduct(x).sum();
            pw.push_back(p);
            aa.push_back(a);
            bb.push_back(c.cwiseProduct(s).sum() - a);
          },
          cap);
      return maximize_log_affine_mix(pw, aa, bb);
    };
  }
  prob.restart_point = [x_start]() { return x_start; };
  prob.on_iterate = iterate_hook;

  FwOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;
  const FwResult<Eigen::MatrixXd> res = frank_wolfe(prob, x_start, opts);

  BoundReport rep;
  rep.kind = BoundKind::gamma_sdp;
  rep.k = k;
  rep.parameter = svec(v);
  if (res.degenerate) {
    rep.value = detail::kNegInf;
    rep.minus_infinity = true;
    rep.hint = "some product of length k is the zero matrix, so the Lyapunov radius is 0";
  } else {
    rep.value = res.certified_value;
    rep.fw_gap = res.certified_gap;
    rep.certificate = detail::fw_certificate(res.certified_gap);
    if (!res.converged) rep.hint = "frank-wolfe stopped before the gap tolerance";
  }
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

}  // namespace lyap
