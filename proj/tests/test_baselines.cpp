#include <doctest.h>

#include <cmath>

#include "pnpg/baselines.hpp"
#include "pnpg/errors.hpp"
#include "pnpg/wavelet.hpp"
#include "test_util.hpp"

using namespace pnpg;
using testutil::randn;

namespace {

OperatorPtr dense(const Matrix& m) { return std::make_shared<DenseOperator>(m); }

struct Bpdn {
  NllModel model;
  Regularizer reg;
  Vector x0;
};

Bpdn bpdn(ConvexSet set, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 64, rows = 40;
  Vector truth = Vector::Zero(n);
  truth.segment(8, 12).setConstant(1.0);
  truth.segment(36, 6).setConstant(2.5);
  const Matrix phi = randn(rows, n, rng) / std::sqrt(double(rows));
  auto psi = std::make_shared<WaveletOperator>(WaveletSpec::line(WaveletFamily::Daubechies4, 3, n));
  auto model = NllModel::gaussian(dense(phi), phi * truth + 0.01 * randn(rows, rng));
  auto reg = Regularizer::l1_analysis(psi, set, 0.05);
  Vector x0 = adjoint_apply(model.sensing(), model.measurements());
  return {model, reg, x0};
}

double final_f(const NllModel& m, const Regularizer& r, const Vector& x) {
  return objective(m, r, r.set().project(x));
}

}  // namespace

TEST_CASE("PDS relaxation is one with sigma = tau") {
  for (double l : {0.5, 1.0, 7.3, 250.0}) {
    const PdsSteps s = pds_steps(l);
    CHECK(s.tau * s.tau + s.tau * l / 2.0 == doctest::Approx(1.0));
    CHECK(s.rho == doctest::Approx(1.0));
    CHECK(s.sigma == s.tau);
  }
  CHECK_THROWS_AS(pds_steps(0.0), InputError);
}

TEST_CASE("AT with restart period 1 is proximal gradient") {
  Bpdn p = bpdn(ConvexSet::whole_space(), 1);
  SolverConfig cfg;
  cfg.max_iter = 50;
  cfg.epsilon = 0.0;
  cfg.initial_step = 1.0 / spectral_norm_sq(p.model.sensing()).value;
  const SolveResult at = at_solve(p.model, p.reg, p.x0, cfg, 1);

  // Reference: x <- prox(x - beta grad) with the same aggressive step search.
  Vector x = p.x0;
  double beta = *cfg.initial_step;
  ProxWarmStart warm;
  for (int i = 1; i <= 50; ++i) {
    if (i > 1) beta /= cfg.xi;
    while (true) {
      const Vector g = p.model.gradient(x);
      const Vector xn = prox_step(p.reg, x - beta * g, beta * p.reg.weight(),
                                  InnerStopRule::relative(1e-5), warm).x;
      const Vector d = xn - x;
      if (p.model.value(xn) <= p.model.value(x) + d.dot(g) + d.squaredNorm() / (2 * beta) +
                                   1e-12 * (1 + std::abs(p.model.value(xn)))) {
        x = xn;
        break;
      }
      beta *= cfg.xi;
    }
    CHECK(at.trace.records[i - 1].theta == 1.0);
  }
  CHECK((at.x - x).norm() <= 1e-10 * (1 + x.norm()));
}

TEST_CASE("AT stays feasible on a Poisson problem") {
  std::mt19937_64 rng(2);
  const Matrix phi = randn(30, 16, rng).cwiseAbs();
  Vector y(30);
  for (int k = 0; k < 30; ++k) y[k] = (k * 5) % 7;
  auto model = NllModel::poisson_identity(dense(phi), y, Vector::Constant(30, 0.3));
  auto psi = std::make_shared<WaveletOperator>(WaveletSpec::square(WaveletFamily::Haar, 2, 4));
  auto reg = Regularizer::l1_analysis(psi, ConvexSet::nonnegative(), 0.3);
  SolverConfig cfg;
  cfg.max_iter = 500;
  const SolveResult r = at_solve(model, reg, Vector::Ones(16), cfg);
  CHECK(r.trace.feasible);
  CHECK((r.x.array() >= 0.0).all());
  CHECK(r.trace.solver == "at");
}

TEST_CASE("GFB least squares with identity sensing") {
  auto model = NllModel::gaussian(dense(Matrix::Identity(8, 8)), make_vector({1, -2, 3, 0, 5, -1, 2, 2}));
  auto psi = std::make_shared<WaveletOperator>(WaveletSpec::line(WaveletFamily::Haar, 2, 8));
  auto reg = Regularizer::l1_analysis(psi, ConvexSet::whole_space(), 0.0);
  GfbParams gp;
  gp.epsilon = 1e-12;
  gp.max_iter = 100000;
  const SolveResult r = gfb_solve(model, reg, Vector::Zero(8), gp);
  CHECK((r.x - model.measurements()).norm() <= 1e-8);
}

TEST_CASE("GFB splitting variables stay bounded") {
  Bpdn p = bpdn(ConvexSet::nonnegative(), 3);
  GfbParams gp;
  gp.epsilon = 0.0;
  gp.max_iter = 10000;
  const SolveResult r = gfb_solve(p.model, p.reg, p.x0, gp);
  double biggest = 0.0;
  for (const auto& rec : r.trace.records) biggest = std::max(biggest, rec.f);
  CHECK(std::isfinite(biggest));
  CHECK(r.x.norm() < 1e3);
  CHECK(r.trace.records.size() == 10000);
}

TEST_CASE("PDS with zero weight is projected gradient") {
  Bpdn p = bpdn(ConvexSet::nonnegative(), 4);
  const Regularizer reg = p.reg.with_weight(0.0);
  PdsParams pp;
  pp.max_iter = 30;
  pp.epsilon = 0.0;
  const SolveResult r = pds_solve(p.model, reg, p.x0, pp);
  const double tau = pds_steps(spectral_norm_sq(p.model.sensing()).value).tau;
  Vector x = ConvexSet::nonnegative().project(p.x0);
  for (int i = 0; i < 30; ++i) x = ConvexSet::nonnegative().project(x - tau * p.model.gradient(x));
  CHECK((r.x - x).norm() <= 1e-12 * (1 + x.norm()));
}

TEST_CASE("baselines agree with PNPG on a BPDN instance") {
  for (const auto& set : {ConvexSet::whole_space(), ConvexSet::nonnegative()}) {
    Bpdn p = bpdn(set, 5);
    SolverConfig cfg;
    cfg.epsilon = 1e-11;
    cfg.max_iter = 100000;
    const double f_pnpg = final_f(p.model, p.reg, pnpg_solve(p.model, p.reg, p.x0, cfg).x);
    // AT never settles below ~1e-7 relative change: loosen its outer rule and
    // tighten the inner one instead.
    SolverConfig at_cfg;
    at_cfg.epsilon = 1e-8;
    at_cfg.max_iter = 3000;
    at_cfg.inner_relative = 1e-10;
    at_cfg.max_inner = 5000;
    const double f_at = final_f(p.model, p.reg, at_solve(p.model, p.reg, p.x0, at_cfg).x);
    GfbParams gp;
    gp.epsilon = 1e-11;
    gp.max_iter = 200000;
    const double f_gfb = final_f(p.model, p.reg, gfb_solve(p.model, p.reg, p.x0, gp).x);
    PdsParams pp;
    pp.epsilon = 1e-11;
    pp.max_iter = 200000;
    const double f_pds = final_f(p.model, p.reg, pds_solve(p.model, p.reg, p.x0, pp).x);
    CHECK(std::abs(f_at - f_pnpg) <= 1e-5 * f_pnpg);
    CHECK(std::abs(f_gfb - f_pnpg) <= 1e-4 * f_pnpg);
    CHECK(std::abs(f_pds - f_pnpg) <= 1e-4 * f_pnpg);
  }
}

TEST_CASE("PDS dual iterate stays in the box") {
  Bpdn p = bpdn(ConvexSet::nonnegative(), 6);
  PdsParams pp;
  pp.max_iter = 500;
  const double u = p.reg.weight();
  int outside = 0;
  pp.observer = [&](const Vector& x, const Vector& z) {
    if (z.lpNorm<Eigen::Infinity>() > u) ++outside;
    if ((x.array() < 0.0).any()) ++outside;
  };
  pds_solve(p.model, p.reg, p.x0, pp);
  CHECK(outside == 0);
}

TEST_CASE("GFB and PDS reject unsupported inputs") {
  std::mt19937_64 rng(7);
  auto pois = NllModel::poisson_identity(dense(randn(8, 8, rng).cwiseAbs()), Vector::Ones(8),
                                         Vector::Ones(8));
  auto psi = std::make_shared<WaveletOperator>(WaveletSpec::line(WaveletFamily::Haar, 1, 8));
  auto reg = Regularizer::l1_analysis(psi, ConvexSet::nonnegative(), 0.1);
  CHECK_THROWS_AS(gfb_solve(pois, reg, Vector::Ones(8)), InputError);
  CHECK_THROWS_AS(pds_solve(pois, reg, Vector::Ones(8)), InputError);

  // Psi with orthonormal rows but not square.
  Matrix tall = Matrix::Zero(4, 8);
  for (int k = 0; k < 4; ++k) tall(k, k) = 1.0;
  auto gauss = NllModel::gaussian(dense(randn(6, 4, rng)), randn(6, rng));
  auto rect = Regularizer::l1_analysis(dense(tall), ConvexSet::whole_space(), 0.1);
  CHECK_THROWS_AS(gfb_solve(gauss, rect, Vector::Zero(4)), InputError);
  CHECK_NOTHROW(pds_solve(gauss, rect, Vector::Zero(4)));
  auto tv = Regularizer::tv(GridShape{1, 4}, ConvexSet::whole_space(), 0.1);
  CHECK_THROWS_AS(pds_solve(gauss, tv, Vector::Zero(4)), InputError);
}
