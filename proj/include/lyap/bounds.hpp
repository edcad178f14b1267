#pragma once

#include "lyap/family.hpp"
#include "lyap/optim.hpp"
#include "lyap/products.hpp"
#include "lyap/structure.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lyap {

// Arguments at or below this threshold are treated as structural zeros by
// every log evaluation; the bound then reports an explicit -inf state instead
// of silently propagating -Inf.
inline constexpr double kLogGuard = 1e-300;

enum class BoundKind {
  alpha,
  beta,
  alpha_tilde,
  beta_tilde,
  gamma_orthant,
  gamma_sdp,
  euclid,
};

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::alpha: return "alpha";
    case BoundKind::beta: return "beta";
    case BoundKind::alpha_tilde: return "alpha_tilde";
    case BoundKind::beta_tilde: return "beta_tilde";
    case BoundKind::gamma_orthant: return "gamma_orthant";
    case BoundKind::gamma_sdp: return "gamma_sdp";
    case BoundKind::euclid: return "euclid";
  }
  return "?";
}

/// One computed bound in nats. alpha/alpha_tilde/gamma_*/euclid are upper
/// bounds on the Lyapunov exponent, beta/beta_tilde lower bounds; validity
/// never depends on optimizer quality, only on the evaluation itself.
struct BoundReport {
  BoundKind kind = BoundKind::alpha;
  int k = 1;
  double value = std::numeric_limits<double>::quiet_NaN();
  bool minus_infinity = false;
  std::optional<Eigen::VectorXd> parameter;
  bool optimized = false;
  std::string certificate;
  double fw_gap = std::numeric_limits<double>::quiet_NaN();
  std::int64_t wall_time_ms = 0;
  std::string hint;  // set when the value is degenerate or the optimizer bailed
};

namespace detail {

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void require_positive_vector(const Eigen::VectorXd& x, Eigen::Index d,
                                    const char* name) {
  if (x.size() != d)
    throw std::invalid_argument(std::string(name) + " has wrong dimension");
  if (!((x.array() > 0.0).all()))
    throw std::invalid_argument(std::string(name) + " must be strictly positive");
}

inline std::string fw_certificate(double gap) {
  std::ostringstream os;
  os << "frank-wolfe-gap " << gap;
  return os.str();
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// (1/k) E log max_i (Bx)_i / x_i over A^k; -inf when some product maps x to 0.
inline double alpha_raw(const MatrixFamily& fam, int k, const Eigen::VectorXd& x,
                        std::uint64_t cap) {
  const Eigen::VectorXd logx = x.array().log();
  double acc = 0.0;
  walk_forward(
      fam, k, x,
      [&](const std::vector<int>&, double p, const Eigen::VectorXd& yhat, double ls) {
        double best = kNegInf;
        for (Eigen::Index i = 0; i < yhat.size(); ++i)
          if (yhat(i) > kLogGuard) best = std::max(best, std::log(yhat(i)) - logx(i));
        acc += p * (ls + best);  // -inf propagates to the -inf state
      },
      cap);
  return acc / k;
}

// per-column log expectations S_j = E log (B^T v)_j; -inf marks zero columns
inline Eigen::VectorXd beta_column_logs(const MatrixFamily& fam, int k,
                                        const Eigen::VectorXd& v, std::uint64_t cap) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(fam.dim);
  walk_transpose(
      fam, k, v,
      [&](const std::vector<int>&, double p, const Eigen::VectorXd& what, double ls) {
        for (Eigen::Index j = 0; j < what.size(); ++j)
          s(j) += what(j) > kLogGuard ? p * (ls + std::log(what(j))) : kNegInf;
      },
      cap);
  return s;
}

inline double beta_raw(const MatrixFamily& fam, int k, const Eigen::VectorXd& v,
                       const std::vector<bool>* support, std::uint64_t cap) {
  const Eigen::VectorXd s = beta_column_logs(fam, k, v, cap);
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < fam.dim; ++j) {
    if (support && !(*support)[j]) continue;
    best = std::min(best, -std::log(v(j)) + s(j));
  }
  return best / k;
}

// log-sum-exp smoothing of max (and min via negation); -inf entries carry
// zero weight, all -inf collapses to -inf
inline double softmax_smooth(const Eigen::VectorXd& z, double tau, Eigen::VectorXd& w) {
  w.setZero(z.size());
  const double m = z.maxCoeff();
  if (!std::isfinite(m)) return m;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    w(i) = std::isfinite(z(i)) ? std::exp((z(i) - m) / tau) : 0.0;
    sum += w(i);
  }
  w /= sum;
  return m + tau * std::log(sum);
}

inline double softmin_smooth(const Eigen::VectorXd& z, double tau, Eigen::VectorXd& w) {
  const double v = softmax_smooth(-z, tau, w);
  return -v;
}

inline Eigen::VectorXd centered(const Eigen::VectorXd& u) {
  return u.array() - u.mean();
}

// chain rule of the centering u -> u - mean(u)
inline Eigen::VectorXd project_centered(const Eigen::VectorXd& g) {
  return g.array() - g.mean();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Order-unit upper bound alpha_k(x) and linear-functional lower bound
// beta_k(v). Both are valid for *any* admissible parameter, which is what the
// certificate string records.
// ---------------------------------------------------------------------------

inline BoundReport alpha_eval(const MatrixFamily& fam, int k, const Eigen::VectorXd& x,
                              std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  detail::require_positive_vector(x, fam.dim, "x");
  detail::WallTimer timer;
  const double value = detail::alpha_raw(fam, k, x, cap);
  BoundReport rep;
  rep.kind = BoundKind::alpha;
  rep.k = k;
  rep.value = value;
  rep.parameter = x;
  rep.certificate = "valid-for-any-parameter";
  if (!std::isfinite(value)) {
    rep.minus_infinity = true;
    rep.hint = "a product of length k is the zero matrix, so the Lyapunov radius is 0";
  }
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

inline BoundReport beta_eval(const MatrixFamily& fam, int k, const Eigen::VectorXd& v,
                             std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  detail::require_positive_vector(v, fam.dim, "v");
  detail::WallTimer timer;
  const double value = detail::beta_raw(fam, k, v, nullptr, cap);
  BoundReport rep;
  rep.kind = BoundKind::beta;
  rep.k = k;
  rep.value = value;
  rep.parameter = v;
  rep.certificate = "valid-for-any-parameter";
  if (!std::isfinite(value)) {
    rep.minus_infinity = true;
    rep.hint =
        "a product of length k has a zero column; restrict the support with "
        "beta_tilde or bound the transposed family";
  }
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

/// beta with the minimum restricted to the support of v; v may carry zeros,
/// which is how sparse families with zero columns keep a finite lower bound.
inline BoundReport beta_tilde_eval(const MatrixFamily& fam, int k,
                                   const Eigen::VectorXd& v,
                                   std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  if (v.size() != fam.dim) throw std::invalid_argument("v has wrong dimension");
  if ((v.array() < 0.0).any())
    throw std::invalid_argument("v must be nonnegative");
  std::vector<bool> support(fam.dim, false);
  bool any = false;
  for (Eigen::Index j = 0; j < fam.dim; ++j) {
    support[j] = v(j) > 0.0;
    any = any || support[j];
  }
  if (!any) throw std::invalid_argument("v must have at least one positive entry");
  detail::WallTimer timer;
  const double value = detail::beta_raw(fam, k, v, &support, cap);
  BoundReport rep;
  rep.kind = BoundKind::beta_tilde;
  rep.k = k;
  rep.value = value;
  rep.parameter = v;
  rep.certificate = "valid-for-any-parameter";
  if (!std::isfinite(value)) {
    rep.minus_infinity = true;
    rep.hint = "the chosen support still meets a zero column of some product";
  }
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

/// Upper bound for the partition case: the class-wise maximum is taken inside
/// the expectation and the worst class wins. A single class reproduces alpha
/// exactly.
inline BoundReport alpha_tilde_eval(const MatrixFamily& fam,
                                    const PartitionStructure& partition, int k,
                                    const Eigen::VectorXd& x,
                                    std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  detail::require_positive_vector(x, fam.dim, "x");
  if (!partition_is_valid(fam, partition))
    throw std::invalid_argument("partition inconsistent with family patterns");
  detail::WallTimer timer;
  const Eigen::VectorXd logx = x.array().log();
  const int r = static_cast<int>(partition.classes.size());
  Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
  walk_forward(
      fam, k, x,
      [&](const std::vector<int>&, double p, const Eigen::VectorXd& yhat, double ls) {
        for (int l = 0; l < r; ++l) {
          double best = detail::kNegInf;
          for (int i : partition.classes[l])
            if (yhat(i) > kLogGuard) best = std::max(best, std::log(yhat(i)) - logx(i));
          e(l) += p * (ls + best);
        }
      },
      cap);
  const double value = e.maxCoeff() / k;
  BoundReport rep;
  rep.kind = BoundKind::alpha_tilde;
  rep.k = k;
  rep.value = value;
  rep.parameter = x;
  rep.certificate = "valid-for-any-parameter";
  if (!std::isfinite(value)) {
    rep.minus_infinity = true;
    rep.hint = "a product of length k is the zero matrix, so the Lyapunov radius is 0";
  }
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

/// (1/k) E log sigma_max(B): the classical norm-based upper bound; signed
/// matrices allowed.
inline BoundReport euclidean_upper(const MatrixFamily& fam, int k,
                                   std::uint64_t cap = kDefaultLeafCap) {
  detail::WallTimer timer;
  double acc = 0.0;
  walk_full(
      fam, k,
      [&](const std::vector<int>&, double p, const Eigen::MatrixXd& bhat, double ls) {
        const double sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(bhat).singularValues()(0);
        acc += sigma > kLogGuard ? p * (ls + std::log(sigma)) : detail::kNegInf;
      },
      cap);
  BoundReport rep;
  rep.kind = BoundKind::euclid;
  rep.k = k;
  rep.value = acc / k;
  rep.certificate = "exact-svd";
  if (!std::isfinite(rep.value)) {
    rep.minus_infinity = true;
    rep.hint = "a product of length k is the zero matrix, so the Lyapunov radius is 0";
  }
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

// ---------------------------------------------------------------------------
// gamma_k(v) on the positive orthant: maximize the concave map
// x -> (1/k) E log (v, Bx) over the simplex { x >= 0, (v,x) = 1 } by
// Frank-Wolfe. The reported value is objective + gap, a certified upper
// bound on the supremum and hence on the exponent.
// ---------------------------------------------------------------------------

inline BoundReport gamma_orthant_eval(const MatrixFamily& fam, int k,
                                      const Eigen::VectorXd& v,
                                      const FwOptions& fw = {},
                                      std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  detail::require_positive_vector(v, fam.dim, "v");
  detail::WallTimer timer;
  const Eigen::Index d = fam.dim;
  const std::uint64_t leaves = ensemble_size(fam.size(), k, cap);

  FwProblem<Eigen::VectorXd> prob;
  prob.value_and_grad = [&fam, k, &v, cap, d](const Eigen::VectorXd& x,
                                              Eigen::VectorXd& grad) {
    double val = 0.0;
    grad.setZero(d);
    walk_transpose(
        fam, k, v,
        [&](const std::vector<int>&, double p, const Eigen::VectorXd& what, double ls) {
          const double dot = what.dot(x);  // (v, Bx) up to the exp(ls) scale
          if (dot > kLogGuard && std::isfinite(ls)) {
            val += p * (ls + std::log(dot));
            grad.noalias() += (p / dot) * what;
          } else {
            val = detail::kNegInf;
          }
        },
        cap);
    grad /= k;
    return val / k;
  };
  prob.linear_oracle = [&v, d](const Eigen::VectorXd& g) {
    Eigen::Index best = 0;
    double bestval = g(0) / v(0);
    for (Eigen::Index j = 1; j < d; ++j) {
      const double c = g(j) / v(j);
      if (c > bestval) {
        bestval = c;
        best = j;
      }
    }
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    s(best) = 1.0 / v(best);
    return s;
  };
  prob.inner = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); };
  if (leaves <= kLiftedLeafCap) {
    prob.segment_max = [&fam, k, &v, cap](const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& s) {
      std::vector<double> pw, aa, bb;
      walk_transpose(
          fam, k, v,
          [&](const std::vector<int>&, double p, const Eigen::VectorXd& what, double) {
            const double a = what.dot(x);
            pw.push_back(p);
            aa.push_back(a);
            bb.push_back(what.dot(s) - a);
          },
          cap);
      return maximize_log_affine_mix(pw, aa, bb);
    };
  }
  Eigen::VectorXd x0(d);
  for (Eigen::Index j = 0; j < d; ++j) x0(j) = 1.0 / (static_cast<double>(d) * v(j));
  prob.restart_point = [x0]() { return x0; };

  const FwResult<Eigen::VectorXd> res = frank_wolfe(prob, x0, fw);
  BoundReport rep;
  rep.kind = BoundKind::gamma_orthant;
  rep.k = k;
  rep.parameter = v;
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

// ---------------------------------------------------------------------------
// Parameter optimization. The nonsmooth objectives are smoothed by
// log-sum-exp at a decreasing temperature schedule; the returned report is
// always the *exact* evaluation at the best visited parameter, so it is a
// valid bound regardless of how far the optimizer got.
// ---------------------------------------------------------------------------

/// Convex objective behind alpha_optimize, over u with x = exp(u - mean(u)).
/// `exact` is the hard-max evaluation, `smoothed` the per-product log-sum-exp
/// surrogate with its analytic gradient.
inline SmoothedObjective alpha_objective(const MatrixFamily& family, int k,
                                         std::uint64_t cap = kDefaultLeafCap) {
  auto fam = std::make_shared<const MatrixFamily>(family);
  SmoothedObjective obj;
  obj.exact = [fam, k, cap](const Eigen::VectorXd& u) {
    return detail::alpha_raw(*fam, k, detail::centered(u).array().exp(), cap);
  };
  obj.smoothed = [fam, k, cap](const Eigen::VectorXd& u, double tau,
                               Eigen::VectorXd& grad) {
    const Eigen::Index d = fam->dim;
    const Eigen::VectorXd uc = detail::centered(u);
    const Eigen::VectorXd x = uc.array().exp();
    double val = 0.0;
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd z(d), w(d), q(d);
    const Eigen::VectorXd adj = walk_forward_adjoint(
        *fam, k, x,
        [&](const std::vector<int>&, double p, const Eigen::VectorXd& yhat,
            double ls) -> Eigen::VectorXd {
          for (Eigen::Index i = 0; i < d; ++i)
            z(i) = yhat(i) > kLogGuard ? ls + std::log(yhat(i)) - uc(i) : detail::kNegInf;
          val += p * detail::softmax_smooth(z, tau, w);
          direct.noalias() -= p * w;
          const double rescale = std::exp(-ls);
          for (Eigen::Index i = 0; i < d; ++i)
            q(i) = yhat(i) > kLogGuard && w(i) > 0.0 ? w(i) * rescale / yhat(i) : 0.0;
          return q;
        },
        cap);
    grad = detail::project_centered(x.cwiseProduct(adj) + direct) / k;
    return val / k;
  };
  return obj;
}

inline BoundReport alpha_optimize(const MatrixFamily& fam, int k,
                                  const Eigen::VectorXd* u0 = nullptr,
                                  const OptimizerSettings& settings = {},
                                  std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  detail::WallTimer timer;
  const Eigen::Index d = fam.dim;
  Eigen::VectorXd ustart = u0 ? *u0 : Eigen::VectorXd::Zero(d);
  if (ustart.size() != d) throw std::invalid_argument("u0 has wrong dimension");

  {
    const Eigen::VectorXd x0 = detail::centered(ustart).array().exp();
    if (!std::isfinite(detail::alpha_raw(fam, k, x0, cap))) {
      BoundReport rep = alpha_eval(fam, k, x0, cap);
      rep.optimized = false;
      return rep;  // -inf state: nothing to optimize
    }
  }

  const OptimizerResult opt = minimize_smoothed(alpha_objective(fam, k, cap), ustart, settings);
  const Eigen::VectorXd xstar = detail::centered(opt.point).array().exp();
  BoundReport rep = alpha_eval(fam, k, xstar, cap);
  rep.optimized = true;
  if (!opt.converged)
    rep.hint = "optimizer stopped before tolerance; the value is still a valid bound";
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

/// Negation of the quasiconcave lower-bound objective over w with
/// v = exp(w - mean(w)), in minimization form for minimize_smoothed; the
/// min over coordinates is smoothed by a soft-min at the same temperature.
inline SmoothedObjective beta_objective(const MatrixFamily& family, int k,
                                        std::uint64_t cap = kDefaultLeafCap) {
  auto fam = std::make_shared<const MatrixFamily>(family);
  SmoothedObjective obj;
  obj.exact = [fam, k, cap](const Eigen::VectorXd& w) {
    return -detail::beta_raw(*fam, k, detail::centered(w).array().exp(), nullptr, cap);
  };
  obj.smoothed = [fam, k, cap](const Eigen::VectorXd& w, double tau,
                               Eigen::VectorXd& grad) {
    const Eigen::Index d = fam->dim;
    const Eigen::VectorXd wc = detail::centered(w);
    const Eigen::VectorXd v = wc.array().exp();
    const Eigen::VectorXd s = detail::beta_column_logs(*fam, k, v, cap) - wc;
    Eigen::VectorXd omega(d);
    const double val = detail::softmin_smooth(s, tau, omega);
    Eigen::VectorXd q(d);
    const Eigen::VectorXd t1 = walk_transpose_adjoint(
        *fam, k, v,
        [&](const std::vector<int>&, double, const Eigen::VectorXd& what,
            double ls) -> Eigen::VectorXd {
          const double rescale = std::exp(-ls);
          for (Eigen::Index j = 0; j < d; ++j)
            q(j) = what(j) > kLogGuard && omega(j) > 0.0 ? omega(j) * rescale / what(j) : 0.0;
          return q;
        },
        cap);
    grad = -detail::project_centered(v.cwiseProduct(t1) - omega) / k;
    return -val / k;
  };
  return obj;
}

inline BoundReport beta_optimize(const MatrixFamily& fam, int k,
                                 const Eigen::VectorXd* w0 = nullptr,
                                 const OptimizerSettings& settings = {},
                                 std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  detail::WallTimer timer;
  const Eigen::Index d = fam.dim;
  Eigen::VectorXd wstart = w0 ? *w0 : Eigen::VectorXd::Zero(d);
  if (wstart.size() != d) throw std::invalid_argument("w0 has wrong dimension");

  // a zero column in any member forces beta = -inf for every k and v
  for (const auto& a : fam.matrices)
    for (Eigen::Index j = 0; j < d; ++j)
      if ((a.col(j).array() == 0.0).all()) {
        BoundReport rep = beta_eval(fam, k, detail::centered(wstart).array().exp(), cap);
        rep.optimized = false;
        return rep;
      }

  const OptimizerResult opt = minimize_smoothed(beta_objective(fam, k, cap), wstart, settings);
  const Eigen::VectorXd vstar = detail::centered(opt.point).array().exp();
  BoundReport rep = beta_eval(fam, k, vstar, cap);
  rep.optimized = true;
  // the objective is quasiconcave, so this is a local optimum at best; the
  // bound is valid at any parameter either way
  rep.hint = opt.converged
                 ? "local optimum of a quasiconcave objective; validity does not depend on it"
                 : "optimizer stopped before tolerance; the value is still a valid bound";
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

/// Same structure as alpha_objective with the inner maximum taken per class
/// and an outer smoothed maximum across the class expectations; the outer
/// weights multiply straight into the per-leaf weights by the chain rule.
inline SmoothedObjective alpha_tilde_objective(const MatrixFamily& family,
                                               const PartitionStructure& partition,
                                               int k,
                                               std::uint64_t cap = kDefaultLeafCap) {
  auto fam = std::make_shared<const MatrixFamily>(family);
  auto part = std::make_shared<const PartitionStructure>(partition);
  const int r = static_cast<int>(partition.classes.size());

  SmoothedObjective obj;
  obj.exact = [fam, part, k, cap, r](const Eigen::VectorXd& u) {
    const Eigen::VectorXd x = detail::centered(u).array().exp();
    const Eigen::VectorXd logx = x.array().log();
    Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
    walk_forward(
        *fam, k, x,
        [&](const std::vector<int>&, double p, const Eigen::VectorXd& yhat, double ls) {
          for (int l = 0; l < r; ++l) {
            double best = detail::kNegInf;
            for (int i : part->classes[l])
              if (yhat(i) > kLogGuard) best = std::max(best, std::log(yhat(i)) - logx(i));
            e(l) += p * (ls + best);
          }
        },
        cap);
    return e.maxCoeff() / k;
  };
  obj.smoothed = [fam, part, k, cap, r](const Eigen::VectorXd& u, double tau,
                                        Eigen::VectorXd& grad) {
    const Eigen::Index d = fam->dim;
    const Eigen::VectorXd uc = detail::centered(u);
    const Eigen::VectorXd x = uc.array().exp();
    // pass 1: smoothed class expectations
    Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
    {
      Eigen::VectorXd zl, wl;
      walk_forward(
          *fam, k, x,
          [&](const std::vector<int>&, double p, const Eigen::VectorXd& yhat, double ls) {
            for (int l = 0; l < r; ++l) {
              const auto& members = part->classes[l];
              zl.resize(members.size());
              for (std::size_t t = 0; t < members.size(); ++t) {
                const int i = members[t];
                zl(t) = yhat(i) > kLogGuard ? ls + std::log(yhat(i)) - uc(i)
                                            : detail::kNegInf;
              }
              e(l) += p * detail::softmax_smooth(zl, tau, wl);
            }
          },
          cap);
    }
    Eigen::VectorXd big_w(r);
    const double val = detail::softmax_smooth(e, tau, big_w);
    // pass 2: gradient with the outer weights frozen
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd q(d), wt(d), zl, wl;
    const Eigen::VectorXd adj = walk_forward_adjoint(
        *fam, k, x,
        [&](const std::vector<int>&, double p, const Eigen::VectorXd& yhat,
            double ls) -> Eigen::VectorXd {
          wt.setZero(d);
          for (int l = 0; l < r; ++l) {
            const auto& members = part->classes[l];
            zl.resize(members.size());
            for (std::size_t t = 0; t < members.size(); ++t) {
              const int i = members[t];
              zl(t) = yhat(i) > kLogGuard ? ls + std::log(yhat(i)) - uc(i)
                                          : detail::kNegInf;
            }
            detail::softmax_smooth(zl, tau, wl);
            for (std::size_t t = 0; t < members.size(); ++t)
              wt(members[t]) = big_w(l) * wl(t);
          }
          direct.noalias() -= p * wt;
          const double rescale = std::exp(-ls);
          for (Eigen::Index i = 0; i < d; ++i)
            q(i) = yhat(i) > kLogGuard && wt(i) > 0.0 ? wt(i) * rescale / yhat(i) : 0.0;
          return q;
        },
        cap);
    grad = detail::project_centered(x.cwiseProduct(adj) + direct) / k;
    return val / k;
  };
  return obj;
}

inline BoundReport alpha_tilde_optimize(const MatrixFamily& fam,
                                        const PartitionStructure& partition, int k,
                                        const Eigen::VectorXd* u0 = nullptr,
                                        const OptimizerSettings& settings = {},
                                        std::uint64_t cap = kDefaultLeafCap) {
  detail::require_nonnegative(fam);
  if (!partition_is_valid(fam, partition))
    throw std::invalid_argument("partition inconsistent with family patterns");
  detail::WallTimer timer;
  Eigen::VectorXd ustart = u0 ? *u0 : Eigen::VectorXd::Zero(fam.dim);
  if (ustart.size() != fam.dim) throw std::invalid_argument("u0 has wrong dimension");

  const OptimizerResult opt =
      minimize_smoothed(alpha_tilde_objective(fam, partition, k, cap), ustart, settings);
  const Eigen::VectorXd xstar = detail::centered(opt.point).array().exp();
  BoundReport rep = alpha_tilde_eval(fam, partition, k, xstar, cap);
  rep.optimized = true;
  if (!opt.converged)
    rep.hint = "optimizer stopped before tolerance; the value is still a valid bound";
  rep.wall_time_ms = timer.elapsed_ms();
  return rep;
}

}  // namespace lyap
