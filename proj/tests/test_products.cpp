#include <doctest.h>

#include "lyap/family.hpp"
#include "lyap/monte_carlo.hpp"
#include "lyap/products.hpp"

#include <cmath>
#include <random>
#include <vector>

using lyap::MatrixFamily;
using lyap::ProductMode;
using lyap::validate_family;

namespace {

Eigen::MatrixXd scalar1(double v) {
  Eigen::MatrixXd a(1, 1);
  a << v;
  return a;
}

MatrixFamily random_pair(int d, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  auto draw = [&] {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = lyap::rng::uniform53(gen);
    return a;
  };
  return validate_family<double>({draw(), draw()});
}

}  // namespace

TEST_CASE("expect_over_products on scalar families") {
  const MatrixFamily two = validate_family<double>({scalar1(2.0)});
  const auto log_norm = [](const Eigen::MatrixXd& b, double ls) {
    return ls + std::log(b.norm());
  };
  CHECK(lyap::expect_over_products(two, 3, ProductMode::full, log_norm) ==
        doctest::Approx(std::log(8.0)).epsilon(1e-15));

  const MatrixFamily two_eight = validate_family<double>({scalar1(2.0), scalar1(8.0)});
  CHECK(lyap::expect_over_products(two_eight, 1, ProductMode::full, log_norm) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("expect_over_products forward mode on the identity family is zero") {
  const MatrixFamily ids = validate_family<double>(
      {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)});
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(2);
  const double val = lyap::expect_over_products(
      ids, 5, ProductMode::forward,
      [&](const Eigen::MatrixXd& y, double ls) {
        // log max_i (Bx)_i / x_i with x = ones; the state is B*x up to exp(ls)
        return ls + std::log(y.col(0).maxCoeff());
      },
      &x);
  CHECK(val == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("full-mode expectation matches brute-force enumeration") {
  const MatrixFamily fam = random_pair(3, 77);
  const int k = 5;  // 2^5 = 32 products, well under the brute-force limit
  const auto log_fro = [](const Eigen::MatrixXd& b, double ls) {
    return ls + std::log(b.norm());
  };
  const double walked = lyap::expect_over_products(fam, k, ProductMode::full, log_fro);

  double brute = 0.0;
  for (int word = 0; word < 32; ++word) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(3, 3);
    double p = 1.0;
    for (int t = 0; t < k; ++t) {
      const int j = (word >> t) & 1;
      b = b * fam.matrices[j];
      p *= fam.probs[j];
    }
    brute += p * std::log(b.norm());
  }
  CHECK(walked == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("transpose mode propagates B^T v") {
  const MatrixFamily fam = random_pair(3, 5);
  const Eigen::VectorXd v = (Eigen::VectorXd(3) << 1.0, 2.0, 0.5).finished();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  lyap::walk_transpose(fam, 2, v,
                       [&](const std::vector<int>& word, double p,
                           const Eigen::VectorXd& w, double ls) {
                         const Eigen::MatrixXd b =
                             fam.matrices[word[0]] * fam.matrices[word[1]];
                         const Eigen::VectorXd expected = b.transpose() * v;
                         CHECK((std::exp(ls) * w - expected).norm() <
                               1e-12 * expected.norm());
                         sum += p * std::exp(ls) * w;
                       });
  const Eigen::MatrixXd mean =
      0.5 * (fam.matrices[0] + fam.matrices[1]);
  const Eigen::VectorXd expected_sum = (mean * mean).transpose() * v;
  CHECK((sum - expected_sum).norm() < 1e-12 * expected_sum.norm());
}

TEST_CASE("walks visit words in lexicographic order") {
  const MatrixFamily fam = random_pair(2, 9);
  std::vector<std::vector<int>> words;
  lyap::walk_full(fam, 2, [&](const std::vector<int>& w, double, const Eigen::MatrixXd&,
                              double) { words.push_back(w); });
  const std::vector<std::vector<int>> expected = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  CHECK(words == expected);
}

TEST_CASE("adjoint walks accumulate sum p_B B^T a and sum p_B B q") {
  const MatrixFamily fam = random_pair(3, 13);
  const Eigen::VectorXd x = (Eigen::VectorXd(3) << 0.4, 1.0, 2.0).finished();
  const Eigen::VectorXd a = (Eigen::VectorXd(3) << 1.0, -2.0, 0.25).finished();

  const Eigen::VectorXd got = lyap::walk_forward_adjoint(
      fam, 2, x,
      [&](const std::vector<int>&, double, const Eigen::VectorXd&, double)
          -> Eigen::VectorXd { return a; });
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(3);
  for (int w0 = 0; w0 < 2; ++w0)
    for (int w1 = 0; w1 < 2; ++w1) {
      const Eigen::MatrixXd b = fam.matrices[w1] * fam.matrices[w0];
      expected += 0.25 * b.transpose() * a;
    }
  CHECK((got - expected).norm() < 1e-12 * expected.norm());

  const Eigen::VectorXd got_t = lyap::walk_transpose_adjoint(
      fam, 2, x,
      [&](const std::vector<int>&, double, const Eigen::VectorXd&, double)
          -> Eigen::VectorXd { return a; });
  Eigen::VectorXd expected_t = Eigen::VectorXd::Zero(3);
  for (int w0 = 0; w0 < 2; ++w0)
    for (int w1 = 0; w1 < 2; ++w1) {
      const Eigen::MatrixXd b = fam.matrices[w0] * fam.matrices[w1];
      expected_t += 0.25 * b * a;
    }
  CHECK((got_t - expected_t).norm() < 1e-12 * expected_t.norm());
}

TEST_CASE("ensemble cap is a hard error, never truncation") {
  CHECK(lyap::ensemble_size(2, 24) == (std::uint64_t{1} << 24));
  CHECK_THROWS_WITH_AS(lyap::ensemble_size(2, 25), doctest::Contains("ensemble too large"),
                       lyap::EnsembleTooLarge);
  const MatrixFamily fam = random_pair(2, 3);
  CHECK_THROWS_AS(lyap::expect_over_products(
                      fam, 4, ProductMode::full,
                      [](const Eigen::MatrixXd&, double) { return 0.0; }, nullptr,
                      /*cap=*/8),
                  lyap::EnsembleTooLarge);
}

TEST_CASE("product_of_word multiplies in word order") {
  const MatrixFamily fam = random_pair(2, 21);
  const Eigen::MatrixXd b = lyap::product_of_word(fam, {0, 1, 1});
  const Eigen::MatrixXd expected =
      fam.matrices[0] * fam.matrices[1] * fam.matrices[1];
  CHECK((b - expected).norm() == 0.0);
}

TEST_CASE("zero products surface as -inf log scale") {
  Eigen::MatrixXd n(2, 2);
  n << 0, 1, 0, 0;  // nilpotent
  const MatrixFamily fam = validate_family<double>({n});
  int leaves = 0;
  lyap::walk_full(fam, 2, [&](const std::vector<int>&, double, const Eigen::MatrixXd& b,
                              double ls) {
    ++leaves;
    CHECK(!std::isfinite(ls));
    CHECK((b.array() == 0.0).all());
  });
  CHECK(leaves == 1);
}
