#include "pnpg/prox.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace pnpg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------- sets

ConvexSet ConvexSet::box(Vector lo, Vector hi) {
  if (lo.size() != hi.size()) throw InputError("box: bound lengths differ");
  if ((lo.array() > hi.array()).any()) throw InputError("box: lo must be <= hi");
  return ConvexSet(SetKind::Box, std::move(lo), std::move(hi));
}

Vector ConvexSet::project(const Vector& a) const {
  switch (kind_) {
    case SetKind::WholeSpace: return a;
    case SetKind::NonnegativeOrthant: return a.cwiseMax(0.0);
    case SetKind::Box:
      if (a.size() != lo_.size()) throw InputError("box projection: dimension mismatch");
      return a.cwiseMax(lo_).cwiseMin(hi_);
  }
  return a;
}

bool ConvexSet::contains(const Vector& x, double tol) const {
  switch (kind_) {
    case SetKind::WholeSpace: return true;
    case SetKind::NonnegativeOrthant: return x.size() == 0 || x.minCoeff() >= -tol;
    case SetKind::Box:
      return x.size() == lo_.size() && ((x - lo_).array() >= -tol).all() &&
             ((hi_ - x).array() >= -tol).all();
  }
  return false;
}

Vector soft_threshold(const Vector& a, double lambda) {
  if (!(lambda >= 0.0)) throw InputError("soft_threshold: lambda must be >= 0");
  return (a.array().abs() - lambda).max(0.0) * a.array().sign();
}

// ---------------------------------------------------------------- TV helpers

namespace {

bool grid_is_2d(const GridShape& g) { return g.rows > 1 && g.cols > 1; }

// Adjoint-of-divergence: forward differences x_i - x_{i+1}.
void tv_diff(const GridShape& g, const Vector& x, TvDual& d) {
  if (!grid_is_2d(g)) {
    const Eigen::Index n = g.size();
    d.vertical.resize(0);
    d.horizontal.resize(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i + 1 < n; ++i) d.horizontal[i] = x[i] - x[i + 1];
    return;
  }
  const Eigen::Index m = g.rows;
  const Eigen::Index n = g.cols;
  d.vertical.resize((m - 1) * n);
  d.horizontal.resize(m * (n - 1));
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      d.vertical[i * n + j] = x[i * n + j] - x[(i + 1) * n + j];
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j + 1 < n; ++j)
      d.horizontal[i * (n - 1) + j] = x[i * n + j] - x[i * n + j + 1];
}

// Adjoint of tv_diff.
void tv_div(const GridShape& g, const TvDual& d, Vector& out) {
  out.setZero(g.size());
  if (!grid_is_2d(g)) {
    const Eigen::Index n = g.size();
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      out[i] += d.horizontal[i];
      out[i + 1] -= d.horizontal[i];
    }
    return;
  }
  const Eigen::Index m = g.rows;
  const Eigen::Index n = g.cols;
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = d.vertical[i * n + j];
      out[i * n + j] += v;
      out[(i + 1) * n + j] -= v;
    }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j + 1 < n; ++j) {
      const double v = d.horizontal[i * (n - 1) + j];
      out[i * n + j] += v;
      out[i * n + j + 1] -= v;
    }
}

// Projection onto the isotropic unit-ball product.
void project_dual_ball(const GridShape& g, TvDual& d) {
  if (!grid_is_2d(g)) {
    d.horizontal = d.horizontal.cwiseMax(-1.0).cwiseMin(1.0);
    return;
  }
  const Eigen::Index m = g.rows;
  const Eigen::Index n = g.cols;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double sq = 0.0;
      double* pv = (i + 1 < m) ? &d.vertical[i * n + j] : nullptr;
      double* ph = (j + 1 < n) ? &d.horizontal[i * (n - 1) + j] : nullptr;
      if (pv) sq += *pv * *pv;
      if (ph) sq += *ph * *ph;
      if (sq > 1.0) {
        const double s = 1.0 / std::sqrt(sq);
        if (pv) *pv *= s;
        if (ph) *ph *= s;
      }
    }
  }
}

bool dual_shape_ok(const GridShape& g, const TvDual& d) {
  if (!grid_is_2d(g)) {
    return d.vertical.size() == 0 && d.horizontal.size() == std::max<Eigen::Index>(g.size() - 1, 0);
  }
  return d.vertical.size() == (g.rows - 1) * g.cols && d.horizontal.size() == g.rows * (g.cols - 1);
}

}  // namespace

double tv_isotropic(const GridShape& grid, const Vector& x) {
  if (x.size() != grid.size()) throw InputError("tv_isotropic: shape mismatch");
  if (!grid_is_2d(grid)) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) acc += std::abs(x[i] - x[i + 1]);
    return acc;
  }
  const Eigen::Index m = grid.rows;
  const Eigen::Index n = grid.cols;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dv = (i + 1 < m) ? x[i * n + j] - x[(i + 1) * n + j] : 0.0;
      const double dh = (j + 1 < n) ? x[i * n + j] - x[i * n + j + 1] : 0.0;
      acc += std::sqrt(dv * dv + dh * dh);
    }
  }
  return acc;
}

// ---------------------------------------------------------------- regularizer

Regularizer Regularizer::l1_analysis(OperatorPtr psi, ConvexSet set, double weight) {
  if (!psi) throw InputError("l1_analysis: null Psi");
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw InputError("regularizer: weight must be >= 0");
  Regularizer r(SparsityKind::L1Analysis, std::move(set), weight);

  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  const Eigen::Index p = psi->rows();
  const Eigen::Index q = psi->cols();
  Vector v(p), coeffs(q), back(p);
  for (int probe = 0; probe < 3; ++probe) {
    for (Eigen::Index i = 0; i < p; ++i) v[i] = normal(rng);
    v.normalize();
    psi->adjoint(v, coeffs);
    psi->forward(coeffs, back);
    if ((back - v).norm() > 1e-8) {
      throw InputError("l1_analysis: rows of Psi are not orthonormal (Psi Psi^T != I)");
    }
  }
  if (p == q) {
    bool orth = true;
    Vector c(q), sig(p), c2(q);
    for (int probe = 0; probe < 3 && orth; ++probe) {
      for (Eigen::Index i = 0; i < q; ++i) c[i] = normal(rng);
      c.normalize();
      psi->forward(c, sig);
      psi->adjoint(sig, c2);
      orth = (c2 - c).norm() <= 1e-8;
    }
    r.orthogonal_ = orth;
  }
  r.psi_ = std::move(psi);
  r.grid_ = GridShape{1, p};
  return r;
}

Regularizer Regularizer::tv(GridShape grid, ConvexSet set, double weight) {
  if (grid.rows < 1 || grid.cols < 1) throw InputError("tv: empty grid");
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw InputError("regularizer: weight must be >= 0");
  Regularizer r(SparsityKind::IsotropicTV, std::move(set), weight);
  r.grid_ = grid;
  return r;
}

Eigen::Index Regularizer::dim() const {
  return kind_ == SparsityKind::L1Analysis ? psi_->rows() : grid_.size();
}

Regularizer Regularizer::with_weight(double weight) const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw InputError("regularizer: weight must be >= 0");
  Regularizer r = *this;
  r.weight_ = weight;
  return r;
}

Regularizer Regularizer::with_set(ConvexSet set) const {
  Regularizer r = *this;
  r.set_ = std::move(set);
  return r;
}

double Regularizer::sparsity(const Vector& x) const {
  if (x.size() != dim()) throw InputError("regularizer: dimension mismatch");
  if (kind_ == SparsityKind::IsotropicTV) return tv_isotropic(grid_, x);
  return adjoint_apply(*psi_, x).lpNorm<1>();
}

double Regularizer::value(const Vector& x) const {
  if (!set_.contains(x, 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>()))) return kInf;
  return sparsity(x);
}

// ---------------------------------------------------------------- ADMM

ProxResult prox_l1_analysis(const Vector& a, double lambda, const Regularizer& reg,
                            const Vector* warm_s, const InnerStopRule& stop,
                            Vector* final_s) {
  if (reg.kind() != SparsityKind::L1Analysis) throw InputError("prox_l1_analysis: needs an L1 regularizer");
  if (!(lambda >= 0.0)) throw InputError("prox_l1_analysis: lambda must be >= 0");
  const LinearOperator& psi = reg.psi();
  if (a.size() != psi.rows()) throw InputError("prox_l1_analysis: dimension mismatch");

  Vector s = warm_s ? *warm_s : adjoint_apply(psi, a);
  if (s.size() != psi.cols()) throw InputError("prox_l1_analysis: warm start has wrong length");
  Vector ups = Vector::Zero(psi.cols());
  Vector alpha(a.size());
  Vector synth(a.size());
  Vector analysed(psi.cols());
  Vector s_old(psi.cols());
  double rho = 1.0;

  ProxResult res;
  for (int j = 1; j <= stop.max_iter; ++j) {
    psi.forward(s + ups, synth);
    alpha = reg.set().project((a + rho * synth) / (1.0 + rho));
    psi.adjoint(alpha, analysed);
    s_old = s;
    s = soft_threshold(analysed - ups, lambda / rho);
    ups += s - analysed;

    const double primal = (s - analysed).norm();
    const double dual = (s - s_old).norm();
    res.inner_iterations = j;
    res.precision_proxy = std::max(primal, dual);
    if (stop.satisfied(res.precision_proxy, s.norm())) {
      res.converged = true;
      break;
    }
    // Residual balancing; ups is the scaled dual so it rescales with 1/rho.
    const double dual_scaled = rho * dual;
    if (primal > 10.0 * dual_scaled) {
      rho *= 2.0;
      ups *= 0.5;
    } else if (dual_scaled > 10.0 * primal) {
      rho *= 0.5;
      ups *= 2.0;
    }
  }
  res.x = std::move(alpha);
  if (final_s) *final_s = std::move(s);
  return res;
}

// ---------------------------------------------------------------- TV

ProxResult prox_tv(const Vector& a, double lambda, const Regularizer& reg,
                   const InnerStopRule& stop, TvDual* warm) {
  if (reg.kind() != SparsityKind::IsotropicTV) throw InputError("prox_tv: needs a TV regularizer");
  if (!(lambda >= 0.0)) throw InputError("prox_tv: lambda must be >= 0");
  const GridShape& g = reg.grid();
  if (a.size() != g.size()) throw InputError("prox_tv: signal does not match grid shape");

  ProxResult res;
  if (lambda == 0.0 || g.size() == 1) {
    res.x = reg.set().project(a);
    res.converged = true;
    return res;
  }

  const double step = 1.0 / ((grid_is_2d(g) ? 8.0 : 4.0) * lambda);
  TvDual p;
  if (warm && dual_shape_ok(g, *warm)) {
    p = *warm;
  } else {
    tv_diff(g, Vector::Zero(g.size()), p);
  }
  TvDual r = p;
  TvDual p_old;
  TvDual grad;
  Vector div(g.size());
  Vector x_prev;
  Vector x(g.size());
  double t = 1.0;

  tv_div(g, p, div);
  x_prev = reg.set().project(a - lambda * div);

  for (int j = 1; j <= stop.max_iter; ++j) {
    tv_div(g, r, div);
    const Vector xr = reg.set().project(a - lambda * div);
    tv_diff(g, xr, grad);
    p_old = p;
    p.vertical = r.vertical + step * grad.vertical;
    p.horizontal = r.horizontal + step * grad.horizontal;
    project_dual_ball(g, p);

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    r.vertical = p.vertical + mom * (p.vertical - p_old.vertical);
    r.horizontal = p.horizontal + mom * (p.horizontal - p_old.horizontal);
    t = t_next;

    tv_div(g, p, div);
    x = reg.set().project(a - lambda * div);
    res.inner_iterations = j;
    res.precision_proxy = (x - x_prev).norm();
    if (stop.satisfied(res.precision_proxy, x.norm())) {
      res.converged = true;
      break;
    }
    x_prev = x;
  }
  if (warm) *warm = p;
  res.x = std::move(x);
  return res;
}

// ---------------------------------------------------------------- dispatch

ProxResult prox_step(const Regularizer& reg, const Vector& a, double lambda,
                     const InnerStopRule& stop, ProxWarmStart& warm) {
  if (lambda == 0.0) {
    ProxResult res;
    res.x = reg.set().project(a);
    res.converged = true;
    return res;
  }
  if (reg.kind() == SparsityKind::IsotropicTV) return prox_tv(a, lambda, reg, stop, &warm.tv);

  if (reg.psi_orthogonal() && reg.set().kind() == SetKind::WholeSpace) {
    ProxResult res;
    res.x = apply(reg.psi(), soft_threshold(adjoint_apply(reg.psi(), a), lambda));
    res.converged = true;
    res.inner_iterations = 1;
    return res;
  }
  const Vector* seed = (warm.split && warm.split->size() == reg.psi().cols()) ? &*warm.split : nullptr;
  return prox_l1_analysis(a, lambda, reg, seed, stop);
}

// ---------------------------------------------------------------- eps-subgradient

bool check_eps_subgradient(const Regularizer& reg, const Vector& a, const Vector& x,
                           double u, double eps, int samples, std::uint64_t seed) {
  if (!(u > 0.0)) throw InputError("check_eps_subgradient: u must be > 0");
  if (a.size() != x.size() || x.size() != reg.dim()) {
    throw InputError("check_eps_subgradient: dimension mismatch");
  }
  const ConvexSet& set = reg.set();
  const double rx = reg.value(x);
  if (!std::isfinite(rx)) return false;
  const Vector g = (a - x) / u;
  const double allowance = std::isfinite(eps) ? eps * eps / (2.0 * u) : kInf;

  auto holds = [&](const Vector& z) {
    const double rz = reg.value(z);
    const double rhs = rx + (z - x).dot(g) - allowance;
    const double slack = 1e-12 * (1.0 + std::abs(rx) + std::abs(rz) + std::abs((z - x).dot(g)));
    return rz >= rhs - slack;
  };

  const double scale = 1.0 + x.lpNorm<Eigen::Infinity>() + a.lpNorm<Eigen::Infinity>();
  std::vector<Vector> probes;
  probes.push_back(x);
  probes.push_back(set.project(a));
  const double mean = x.mean();
  for (double t : {1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0}) {
    probes.push_back(set.project(x + t * (a - x)));
    probes.push_back(set.project((1.0 - std::min(t, 1.0)) * x));
    probes.push_back(set.project((1.0 - std::min(t, 1.0)) * x + std::min(t, 1.0) * Vector::Constant(x.size(), mean)));
  }
  if (reg.kind() == SparsityKind::L1Analysis) {
    const Vector coeffs = adjoint_apply(reg.psi(), x);
    const double cmax = coeffs.lpNorm<Eigen::Infinity>();
    for (double t : {1e-3, 1e-2, 0.1, 0.5}) {
      probes.push_back(set.project(apply(reg.psi(), soft_threshold(coeffs, t * cmax))));
    }
  }
  const Eigen::Index coords = std::min<Eigen::Index>(x.size(), 64);
  for (Eigen::Index i = 0; i < coords; ++i) {
    for (double t : {-1.0, -1e-3, 1e-3, 1.0}) {
      Vector z = x;
      z[i] += t * scale;
      probes.push_back(set.project(z));
    }
  }
  for (const Vector& z : probes) {
    if (!holds(z)) return false;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int k = 0; k < samples; ++k) {
    const double sigma = scale * std::pow(10.0, -3.0 + 4.0 * (k % 5) / 4.0);
    Vector z(x.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = x[i] + sigma * normal(rng);
    if (!holds(set.project(z))) return false;
  }
  return true;
}

}  // namespace pnpg
