#include <doctest.h>

#include <cmath>
#include <limits>

#include "pnpg/errors.hpp"
#include "pnpg/models.hpp"
#include "test_util.hpp"

using namespace pnpg;
using testutil::randn;

namespace {

OperatorPtr dense(const Matrix& m) { return std::make_shared<DenseOperator>(m); }

// Central differences along coordinate directions.
double fd_rel_error(const NllModel& model, const Vector& x) {
  const Vector g = model.gradient(x);
  const double h = 1e-5 * (1.0 + x.lpNorm<Eigen::Infinity>());
  Vector fd(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    fd[k] = (model.value(xp) - model.value(xm)) / (2.0 * h);
  }
  return (fd - g).norm() / std::max(1.0, g.norm());
}

}  // namespace

TEST_CASE("Poisson identity values") {
  const auto phi = dense(Matrix::Identity(1, 1));
  auto m = NllModel::poisson_identity(phi, make_vector({1}), make_vector({0}));
  CHECK(m.value(make_vector({2})) == doctest::Approx(1.0 + std::log(0.5)));
  CHECK(m.value(make_vector({1})) == doctest::Approx(0.0));
  CHECK(m.gradient(make_vector({1})).norm() == doctest::Approx(0.0));
  CHECK(std::isinf(m.value(make_vector({-1}))));
  CHECK(std::isinf(m.value(make_vector({0}))));

  // y = 0 terms contribute phi only.
  auto z = NllModel::poisson_identity(phi, make_vector({0}), make_vector({0}));
  CHECK(z.value(make_vector({0})) == doctest::Approx(0.0));
  CHECK(z.value(make_vector({3})) == doctest::Approx(3.0));
  CHECK(z.in_domain(make_vector({0})));
}

TEST_CASE("Poisson identity domain") {
  const auto phi = dense(Matrix::Identity(2, 2));
  auto nob = NllModel::poisson_identity(phi, make_vector({1, 0}), make_vector({0, 0}));
  CHECK_FALSE(nob.in_domain(Vector::Zero(2)));
  CHECK_THROWS_AS(nob.gradient(Vector::Zero(2)), DomainError);
  CHECK_FALSE(nob.evaluate_if_in_domain(Vector::Zero(2)).gradient.has_value());
  auto withb = NllModel::poisson_identity(phi, make_vector({1, 0}), make_vector({0.1, 0.1}));
  CHECK(withb.in_domain(Vector::Zero(2)));
}

TEST_CASE("model construction validation") {
  const auto phi = dense(Matrix::Identity(2, 2));
  CHECK_THROWS_AS(NllModel::poisson_identity(phi, make_vector({1.5, 0}), Vector::Zero(2)), InputError);
  CHECK_THROWS_AS(NllModel::poisson_identity(phi, make_vector({-1, 0}), Vector::Zero(2)), InputError);
  CHECK_THROWS_AS(NllModel::poisson_identity(phi, make_vector({1, 0}), make_vector({-1, 0})), InputError);
  CHECK_THROWS_AS(NllModel::gaussian(phi, make_vector({1, 0, 2})), InputError);
  auto g = NllModel::gaussian(phi, make_vector({1, 0}));
  CHECK_THROWS_AS(g.value(Vector::Zero(3)), InputError);
}

TEST_CASE("concentrated Poisson at zero") {
  std::mt19937_64 rng(1);
  const Matrix m = randn(7, 3, rng);
  const Vector y = make_vector({1, 0, 3, 2, 0, 1, 5});
  auto model = NllModel::poisson_log_concentrated(dense(m), y);
  CHECK(model.value(Vector::Zero(3)) == doctest::Approx(y.sum() * std::log(7.0)));
}

TEST_CASE("concentrated Poisson is overflow safe") {
  Matrix m = Matrix::Zero(3, 1);
  m << 700, -700, 0;
  auto model = NllModel::poisson_log_concentrated(dense(m), make_vector({1, 2, 3}));
  for (double s : {1.0, -1.0}) {
    const Vector x = make_vector({s});
    CHECK(std::isfinite(model.value(x)));
    CHECK(model.gradient(x).allFinite());
  }
}

TEST_CASE("Gaussian gradient vanishes at the data") {
  std::mt19937_64 rng(2);
  const Matrix m = randn(5, 4, rng);
  const Vector x = randn(4, rng);
  auto model = NllModel::gaussian(dense(m), m * x);
  CHECK(model.gradient(x).norm() <= 1e-12);
  CHECK(model.value(x) == doctest::Approx(0.0));
  CHECK(model.has_lipschitz_gradient());
}

TEST_CASE("finite-difference gradients at interior points") {
  std::mt19937_64 rng(3);
  const Matrix m = randn(12, 6, rng).cwiseAbs();
  Vector y(12);
  for (int k = 0; k < 12; ++k) y[k] = k % 3;
  const auto phi = dense(m);
  const NllModel models[] = {
      NllModel::poisson_identity(phi, y, Vector::Constant(12, 0.2)),
      NllModel::poisson_log_concentrated(dense(randn(12, 6, rng)), y),
      NllModel::gaussian(dense(randn(12, 6, rng)), randn(12, rng))};
  for (const auto& model : models) {
    for (int t = 0; t < 20; ++t) {
      Vector x = randn(6, rng);
      if (model.kind() == NllKind::PoissonIdentity) x = x.cwiseAbs();
      CHECK(fd_rel_error(model, x) < 1e-6);
    }
  }
}

TEST_CASE("convexity and nonnegativity probes") {
  std::mt19937_64 rng(4);
  const Matrix m = randn(10, 5, rng).cwiseAbs();
  Vector y(10);
  for (int k = 0; k < 10; ++k) y[k] = (k * 7) % 4;
  const NllModel models[] = {NllModel::poisson_identity(dense(m), y, Vector::Constant(10, 0.5)),
                             NllModel::poisson_log_concentrated(dense(randn(10, 5, rng)), y),
                             NllModel::gaussian(dense(randn(10, 5, rng)), randn(10, rng))};
  std::uniform_real_distribution<double> ut(0.01, 0.99);
  for (const auto& model : models) {
    for (int k = 0; k < 50; ++k) {
      Vector a = randn(5, rng), b = randn(5, rng);
      if (model.kind() == NllKind::PoissonIdentity) {
        a = a.cwiseAbs();
        b = b.cwiseAbs();
      }
      const double t = ut(rng);
      const double lhs = model.value(t * a + (1 - t) * b);
      CHECK(lhs <= t * model.value(a) + (1 - t) * model.value(b) + 1e-9);
      if (model.kind() != NllKind::PoissonLogConcentrated) CHECK(model.value(a) >= 0.0);
    }
  }
}

TEST_CASE("evaluate shares one forward projection") {
  std::mt19937_64 rng(5);
  auto model = NllModel::gaussian(dense(randn(4, 3, rng)), randn(4, rng));
  const Vector x = randn(3, rng);
  const NllEval e = model.evaluate(x, true);
  CHECK(e.value == doctest::Approx(model.value(x)));
  REQUIRE(e.gradient);
  CHECK((*e.gradient - model.gradient(x)).norm() <= 1e-12);
  CHECK_FALSE(model.evaluate(x, false).gradient);
}
