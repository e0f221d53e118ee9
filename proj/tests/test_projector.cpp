#include <doctest.h>

#include <cmath>

#include "pnpg/errors.hpp"
#include "pnpg/projector.hpp"
#include "test_util.hpp"

using namespace pnpg;

TEST_CASE("single pixel projector") {
  auto g = build_line_projector(1, 1, 1);
  CHECK(g->rows() == 1);
  CHECK(g->cols() == 1);
  CHECK(g->matrix().coeff(0, 0) > 0.0);
}

TEST_CASE("projector shape, nonnegativity and per-view mass") {
  const int n = 32, views = 30, radial = 64;
  auto g = build_line_projector(n, views, radial);
  CHECK(g->rows() == views * radial);
  CHECK(g->cols() == n * n);
  for (int k = 0; k < g->matrix().outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(g->matrix(), k); it; ++it) CHECK(it.value() >= 0.0);

  const Vector img = Vector::Ones(n * n);
  const Vector proj = apply(*g, img);
  for (int v = 0; v < views; ++v) {
    const double mass = proj.segment(v * radial, radial).sum();
    CHECK(std::abs(mass - img.sum()) <= 0.05 * img.sum());
  }
  // Central rays cross the image.
  for (int v = 0; v < views; ++v) CHECK(proj[v * radial + radial / 2] > 0.0);
}

TEST_CASE("PET sensing scales rows") {
  std::mt19937_64 rng(8);
  auto g = build_line_projector(8, 6, 8);
  const Vector x = testutil::randn(64, rng).cwiseAbs();

  auto same = build_pet_sensing(g, Vector::Zero(64), Vector::Zero(48), 1.0);
  CHECK((apply(*same, x) - apply(*g, x)).norm() <= 1e-12);

  auto twice = build_pet_sensing(g, Vector::Zero(64), Vector::Constant(48, std::log(2.0)), 1.0);
  CHECK((apply(*twice, x) - 2.0 * apply(*g, x)).norm() <= 1e-12 * apply(*g, x).norm());

  const Vector kappa = testutil::randn(64, rng).cwiseAbs();
  const Vector c = testutil::randn(48, rng, 0.5);
  const double w = 3.0;
  auto phi = build_pet_sensing(g, kappa, c, w);
  const double bound = w * std::exp(c.maxCoeff()) * apply(*g, x).lpNorm<Eigen::Infinity>();
  CHECK(apply(*phi, x).lpNorm<Eigen::Infinity>() <= bound * (1 + 1e-12));
  CHECK((apply(*phi, x).array() >= 0.0).all());
  CHECK(testutil::adjoint_gap(*phi, rng) <= 1e-10);
}

TEST_CASE("projector argument validation") {
  CHECK_THROWS_AS(build_line_projector(0, 1, 1), InputError);
  auto g = build_line_projector(4, 2, 4);
  CHECK_THROWS_AS(build_pet_sensing(g, Vector::Zero(3), Vector::Zero(8), 1.0), InputError);
  CHECK_THROWS_AS(build_pet_sensing(g, Vector::Zero(16), Vector::Zero(8), 0.0), InputError);
}
