#include <doctest.h>

#include "lyap/corpus.hpp"
#include "lyap/monte_carlo.hpp"

#include <cmath>

using lyap::MatrixFamily;
using lyap::McEstimate;
using lyap::monte_carlo_lambda;
using lyap::validate_family;

namespace {

Eigen::MatrixXd scalar1(double v) {
  Eigen::MatrixXd a(1, 1);
  a << v;
  return a;
}

}  // namespace

TEST_CASE("single scalar family is exact with zero spread") {
  const MatrixFamily two = validate_family<double>({scalar1(2.0)});
  const McEstimate est = monte_carlo_lambda(two, 100, 10, 42);
  CHECK(est.mean == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(est.stderr_value == 0.0);
  CHECK(est.degenerate == 0);
}

TEST_CASE("two-scalar family converges to the mean log") {
  const MatrixFamily fam = validate_family<double>({scalar1(2.0), scalar1(8.0)});
  const McEstimate est = monte_carlo_lambda(fam, 10000, 50, 7);
  CHECK(est.stderr_value > 0.0);
  CHECK(std::abs(est.mean - 2.0 * std::log(2.0)) <= 3.0 * est.stderr_value);
}

TEST_CASE("single matrix converges to the log spectral radius") {
  Eigen::MatrixXd fib(2, 2);
  fib << 0, 1, 1, 1;
  const MatrixFamily fam = validate_family<double>({fib});
  const McEstimate est = monte_carlo_lambda(fam, 5000, 20, 3);
  const double golden = std::log((1.0 + std::sqrt(5.0)) / 2.0);
  CHECK(est.stderr_value == 0.0);  // deterministic trajectory
  CHECK(std::abs(est.mean - golden) < 1e-3);
}

TEST_CASE("identical seeds reproduce bit-identical estimates") {
  const MatrixFamily fam = lyap::make_random(4, 1.0, false, 11);
  const McEstimate a = monte_carlo_lambda(fam, 500, 8, 99);
  const McEstimate b = monte_carlo_lambda(fam, 500, 8, 99);
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_value == b.stderr_value);
  const McEstimate c = monte_carlo_lambda(fam, 500, 8, 100);
  CHECK(a.mean != c.mean);
}

TEST_CASE("scaling every matrix by c shifts the mean by log c exactly") {
  const MatrixFamily fam = lyap::make_random(3, 1.0, false, 5);
  MatrixFamily scaled = fam;
  for (auto& m : scaled.matrices) m *= 2.0;
  const McEstimate base = monte_carlo_lambda(fam, 400, 12, 17);
  const McEstimate shifted = monte_carlo_lambda(scaled, 400, 12, 17);
  CHECK(std::abs(shifted.mean - base.mean - std::log(2.0)) < 1e-12);
  CHECK(std::abs(shifted.stderr_value - base.stderr_value) < 1e-12);
}

TEST_CASE("degenerate trajectories are counted, all-degenerate is an error") {
  Eigen::MatrixXd nil(2, 2), id2 = Eigen::MatrixXd::Identity(2, 2);
  nil << 0, 1, 0, 0;
  const MatrixFamily dies = validate_family<double>({nil});
  CHECK_THROWS_AS(monte_carlo_lambda(dies, 5, 4, 1), lyap::AllTrajectoriesDegenerate);

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  const MatrixFamily mixed = validate_family<double>({zero, id2});
  const McEstimate est = monte_carlo_lambda(mixed, 3, 40, 2);
  CHECK(est.degenerate > 0);
  CHECK(est.degenerate < 40);
  CHECK(est.trajectories + est.degenerate == 40);
  CHECK(est.mean == 0.0);  // surviving trajectories saw only the identity
}

TEST_CASE("x0 validation") {
  const MatrixFamily fam = validate_family<double>({scalar1(2.0)});
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(monte_carlo_lambda(fam, 10, 2, 1, &zero), std::invalid_argument);
  CHECK_THROWS_AS(monte_carlo_lambda(fam, 0, 2, 1), std::invalid_argument);
}
