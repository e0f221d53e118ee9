#include "pnpg/baselines.hpp"

#include <chrono>
#include <cmath>

namespace pnpg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool in_set(const ConvexSet& set, const Vector& x) {
  return set.contains(x, 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>()));
}

bool converged(const Vector& x, const Vector& x_prev, double epsilon) {
  return (x - x_prev).norm() <= epsilon * std::max(x.norm(), 1e-6);
}

void require_lipschitz(const NllModel& model, const char* who) {
  if (!model.has_lipschitz_gradient()) {
    throw InputError(std::string(who) + ": needs a globally Lipschitz gradient (Gaussian model)");
  }
}

void require_dims(const NllModel& model, const Regularizer& reg, const Vector& x0,
                  const char* who) {
  if (x0.size() != model.dim() || reg.dim() != model.dim()) {
    throw InputError(std::string(who) + ": signal, model and regularizer dimensions must agree");
  }
}

IterationRecord make_record(int i, double nll, double pen, double u, double beta, double theta,
                            double delta, long long evals, Clock::time_point t0) {
  IterationRecord rec;
  rec.iteration = i;
  rec.nll = nll;
  rec.penalty = pen;
  rec.weight = u;
  rec.f = nll + u * pen;
  rec.beta = beta;
  rec.theta = theta;
  rec.delta = delta;
  rec.nll_evals = evals;
  rec.seconds = seconds_since(t0);
  return rec;
}

}  // namespace

SolveResult at_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                     const SolverConfig& cfg, int restart_period) {
  cfg.validate();
  require_dims(model, reg, x0, "at_solve");
  if (restart_period < 1) throw InputError("at_solve: restart period must be >= 1");
  const auto t0 = Clock::now();
  const ConvexSet& set = reg.set();
  const double u = reg.weight();

  SolveResult out;
  SolverTrace& trace = out.trace;
  trace.solver = "at";

  Vector x = set.project(x0);
  if (!model.in_domain(x)) throw InputError("at_solve: projected starting point is outside dom L");
  Vector xt = x;
  long long evals = 1;
  double nll = model.value(x);
  trace.initial_f = nll + u * reg.sparsity(x);

  double beta = cfg.initial_step ? *cfg.initial_step : bb_initial_step(model, set, x, &evals);
  double beta_prev = beta;
  double theta_prev = 1.0;
  const InnerStopRule stop = InnerStopRule::relative(cfg.inner_relative, cfg.max_inner);
  ProxWarmStart warm;

  for (int i = 1; i <= cfg.max_iter; ++i) {
    const bool reset = (i - 1) % restart_period == 0;
    if (i > 1) beta /= cfg.xi;  // aggressive search: try a larger step every iteration
    if (reg.kind() == SparsityKind::L1Analysis) warm.split = adjoint_apply(reg.psi(), xt);

    int backtracks = 0;
    int inner = 0;
    double theta = 1.0;
    Vector xbar, xt_new, x_new;
    double nll_new = 0.0;
    double eps_hat = 0.0;
    while (true) {
      theta = reset ? 1.0 : theta_update(theta_prev, beta_prev / beta, 2.0, 0.25, 2);
      xbar = (1.0 - 1.0 / theta) * x + (1.0 / theta) * xt;
      const NllEval eb = model.evaluate_if_in_domain(xbar);
      ++evals;
      if (!eb.gradient) throw DomainError("at_solve: extrapolated point left dom L");
      const Vector& g = *eb.gradient;
      const double step = theta * beta;
      ProxResult pr = prox_step(reg, xt - step * g, step * u, stop, warm);
      inner += pr.inner_iterations;
      eps_hat = pr.precision_proxy;
      xt_new = std::move(pr.x);
      x_new = (1.0 - 1.0 / theta) * x + (1.0 / theta) * xt_new;
      nll_new = model.value(x_new);
      ++evals;
      const Vector d = x_new - xbar;
      const double q = eb.value + d.dot(g) + d.squaredNorm() / (2.0 * beta);
      if (nll_new <= q + majorization_slack(nll_new)) break;
      beta *= cfg.xi;
      ++backtracks;
    }
    if (!in_set(set, xbar) || !in_set(set, x_new)) trace.feasible = false;

    const double delta = (x_new - x).squaredNorm();
    const bool done = converged(x_new, x, cfg.epsilon);
    IterationRecord rec = make_record(i, nll_new, reg.sparsity(x_new), u, beta, theta, delta,
                                      evals, t0);
    rec.backtracks = backtracks;
    rec.inner_iterations = inner;
    rec.eps_hat = eps_hat;
    trace.records.push_back(rec);

    x = std::move(x_new);
    xt = std::move(xt_new);
    nll = nll_new;
    theta_prev = theta;
    beta_prev = beta;
    if (done) {
      trace.converged = true;
      break;
    }
  }
  trace.nll_evals = evals;
  trace.seconds = seconds_since(t0);
  out.x = std::move(x);
  return out;
}

SolveResult gfb_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                      const GfbParams& params) {
  require_dims(model, reg, x0, "gfb_solve");
  require_lipschitz(model, "gfb_solve");
  if (reg.kind() != SparsityKind::L1Analysis || !reg.psi_orthogonal()) {
    throw InputError("gfb_solve: needs an L1 penalty with square orthonormal Psi");
  }
  if (!(params.w > 0.0 && params.w < 1.0) || !(params.relax > 0.0 && params.relax < 2.0) ||
      params.max_iter < 1) {
    throw InputError("gfb_solve: invalid parameters");
  }
  const auto t0 = Clock::now();
  const ConvexSet& set = reg.set();
  const double u = reg.weight();
  const double r = params.r ? *params.r : 1.8 / spectral_norm_sq(model.sensing()).value;
  if (!(r > 0.0) || !std::isfinite(r)) throw InputError("gfb_solve: step must be positive");
  const LinearOperator& psi = reg.psi();

  SolveResult out;
  SolverTrace& trace = out.trace;
  trace.solver = "gfb";

  Vector x = set.project(x0);
  Vector z1 = x;
  Vector z2 = x;
  trace.initial_f = model.value(x) + u * reg.sparsity(x);
  long long evals = 1;
  const double lam = params.relax;

  for (int i = 1; i <= params.max_iter; ++i) {
    const Vector g = model.gradient(x);
    ++evals;
    const Vector v = 2.0 * x - r * g;
    const Vector c1 = apply(psi, soft_threshold(adjoint_apply(psi, Vector(v - z1)), r * u / params.w));
    z1 += lam * (c1 - x);
    z2 += lam * (set.project(v - z2) - x);
    Vector x_new = params.w * z1 + (1.0 - params.w) * z2;
    if (!in_set(set, x_new)) trace.feasible = false;

    const double delta = (x_new - x).squaredNorm();
    const bool done = converged(x_new, x, params.epsilon);
    trace.records.push_back(make_record(i, model.value(x_new), reg.sparsity(x_new), u, r, 1.0,
                                        delta, evals, t0));
    x = std::move(x_new);
    if (done) {
      trace.converged = true;
      break;
    }
  }
  trace.nll_evals = evals;
  trace.seconds = seconds_since(t0);
  out.x = std::move(x);
  return out;
}

PdsSteps pds_steps(double phi_norm_sq) {
  if (!(phi_norm_sq > 0.0) || !std::isfinite(phi_norm_sq)) {
    throw InputError("pds_steps: ||Phi||^2 must be positive");
  }
  const double h = 0.5 * phi_norm_sq;
  const double tau = 0.5 * (-h + std::sqrt(h * h + 4.0));
  const double sigma = tau;
  const double rho = 2.0 - h / (1.0 / tau - sigma);
  return {tau, sigma, rho};
}

SolveResult pds_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                      const PdsParams& params) {
  require_dims(model, reg, x0, "pds_solve");
  require_lipschitz(model, "pds_solve");
  if (reg.kind() != SparsityKind::L1Analysis) throw InputError("pds_solve: needs an L1 penalty");
  if (params.max_iter < 1) throw InputError("pds_solve: invalid parameters");
  const auto t0 = Clock::now();
  const ConvexSet& set = reg.set();
  const double u = reg.weight();
  const LinearOperator& psi = reg.psi();

  PdsSteps steps = pds_steps(spectral_norm_sq(model.sensing()).value);
  if (params.tau) {
    if (!(*params.tau > 0.0)) throw InputError("pds_solve: tau must be positive");
    steps.tau = steps.sigma = *params.tau;
  }

  SolveResult out;
  SolverTrace& trace = out.trace;
  trace.solver = "pds";

  Vector x = set.project(x0);
  Vector z = Vector::Zero(psi.cols());
  trace.initial_f = model.value(x) + u * reg.sparsity(x);
  long long evals = 1;

  for (int i = 1; i <= params.max_iter; ++i) {
    const Vector g = model.gradient(x);
    ++evals;
    const Vector zbar =
        (z + steps.sigma * adjoint_apply(psi, x)).cwiseMax(-u).cwiseMin(u);
    const Vector xbar =
        set.project(x - steps.tau * g - steps.tau * apply(psi, Vector(2.0 * zbar - z)));
    z += steps.rho * (zbar - z);
    Vector x_new = x + steps.rho * (xbar - x);
    if (params.observer) params.observer(x_new, z);

    const double delta = (x_new - x).squaredNorm();
    const bool done = converged(x_new, x, params.epsilon);
    trace.records.push_back(make_record(i, model.value(x_new), reg.sparsity(x_new), u,
                                        steps.tau, 1.0, delta, evals, t0));
    x = std::move(x_new);
    if (done) {
      trace.converged = true;
      break;
    }
  }
  trace.nll_evals = evals;
  trace.seconds = seconds_since(t0);
  out.x = std::move(x);
  return out;
}

}  // namespace pnpg
