#include "pnpg/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace pnpg {

const char* to_string(RestartKind kind) {
  switch (kind) {
    case RestartKind::None: return "none";
    case RestartKind::Function: return "function";
    case RestartKind::Domain: return "domain";
  }
  return "none";
}

void SolverConfig::validate() const {
  if (!(gamma >= 2.0)) throw InputError("SolverConfig: gamma must be >= 2");
  if (!(b >= 0.0 && b <= 0.25)) throw InputError("SolverConfig: b must be in [0, 1/4]");
  if (n < 0 || m < 0) throw InputError("SolverConfig: n and m must be >= 0");
  if (!(xi > 0.0 && xi < 1.0)) throw InputError("SolverConfig: xi must be in (0, 1)");
  if (!(eta > 0.0 && eta < 1.0)) throw InputError("SolverConfig: eta must be in (0, 1)");
  if (!(epsilon >= 0.0)) throw InputError("SolverConfig: epsilon must be >= 0");
  if (max_iter < 1 || max_inner < 1) throw InputError("SolverConfig: iteration limits must be >= 1");
  if (initial_step && !(*initial_step > 0.0)) throw InputError("SolverConfig: initial step must be > 0");
  if (continuation) {
    const auto& c = *continuation;
    if (!(c.start_factor > 0.0) || !(c.decay > 0.0 && c.decay < 1.0) || c.max_stages < 1) {
      throw InputError("SolverConfig: invalid continuation schedule");
    }
  }
}

double theta_update(double theta_prev, double B, double gamma, double b, int i) {
  if (i <= 1) return 1.0;
  return 1.0 / gamma + std::sqrt(b + B * theta_prev * theta_prev);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double bb_step_counted(const NllModel& model, const ConvexSet& set, const Vector& x0,
                       long long& evals) {
  const Vector start = set.project(x0);
  const NllEval e0 = model.evaluate_if_in_domain(start);
  ++evals;
  if (!e0.gradient) throw DomainError("bb_initial_step: starting point outside dom L");
  const Vector& g0 = *e0.gradient;

  double t0 = 1e-3 * (1.0 + start.norm()) / (1.0 + g0.norm());
  for (int attempt = 0; attempt < 40; ++attempt, t0 *= 0.5) {
    const Vector x1 = set.project(start - t0 * g0);
    const NllEval e1 = model.evaluate_if_in_domain(x1);
    ++evals;
    if (!e1.gradient) continue;
    const Vector dx = x1 - start;
    const Vector dg = *e1.gradient - g0;
    const double dxn = dx.norm();
    const double dgn = dg.norm();
    if (dxn == 0.0 || dgn == 0.0) return 1.0;
    const double curv = dx.dot(dg);
    const double beta = curv > 0.0 ? dx.squaredNorm() / curv : dxn / dgn;
    return (std::isfinite(beta) && beta > 0.0) ? beta : 1.0;
  }
  return 1.0;
}

double penalty_of(const Regularizer& reg, const Vector& x) { return reg.sparsity(x); }

struct Workspace {
  Vector analysed;  // Psi^T x_{i-1}
};

SolveResult run_pnpg(const NllModel& model, const Regularizer& reg, const Vector& x0,
                     const SolverConfig& cfg, const char* name) {
  cfg.validate();
  if (x0.size() != model.dim() || reg.dim() != model.dim()) {
    throw InputError("pnpg: signal, model and regularizer dimensions must agree");
  }
  const auto t_start = Clock::now();
  const ConvexSet& set = reg.set();
  const double u = reg.weight();
  const bool is_tv = reg.kind() == SparsityKind::IsotropicTV;

  SolveResult out;
  SolverTrace& trace = out.trace;
  trace.solver = name;

  Vector x_prev = set.project(x0);
  const NllEval e_start = model.evaluate_if_in_domain(x_prev);
  long long evals = 1;
  if (!e_start.gradient || !std::isfinite(e_start.value)) {
    throw InputError("pnpg: projected starting point is outside dom L");
  }
  double nll_prev = e_start.value;
  double f_prev = nll_prev + u * penalty_of(reg, x_prev);
  if (!std::isfinite(f_prev)) throw InputError("pnpg: objective is not finite at the start");
  trace.initial_f = f_prev;

  double beta = cfg.initial_step ? *cfg.initial_step : bb_step_counted(model, set, x_prev, evals);
  double beta_prev = beta;
  Vector x_prev2 = x_prev;
  double theta_prev = 1.0;
  std::optional<double> prev_disp;  // sqrt(delta) or ||Psi^T dx|| of the last accepted step

  int kappa = 0;
  long long n_eff = cfg.n;
  double eta_eff = cfg.eta;
  int consecutive_restarts = 0;
  int consecutive_fallbacks = 0;
  bool increase_attempt = false;
  RestartKind pending = RestartKind::None;
  ProxWarmStart warm;
  Vector x = x_prev;

  int i = 0;
  while (i < cfg.max_iter) {
    ++i;
    ++kappa;
    int backtracks = 0;
    int inner_total = 0;
    bool patience_bumped = false;
    RestartKind restart_kind = pending;
    pending = RestartKind::None;

    const InnerStopRule stop = inner_stop_rule(is_tv ? PenaltyKind::TV : PenaltyKind::L1, eta_eff,
                                               prev_disp, cfg.inner_relative, cfg.max_inner);
    if (!is_tv && !(reg.psi_orthogonal() && set.kind() == SetKind::WholeSpace)) {
      warm.split = adjoint_apply(reg.psi(), x_prev);
    }

    Vector xbar;
    Vector grad;
    double nll_bar = 0.0;
    double nll_x = 0.0;
    double theta = 1.0;
    double momentum = 0.0;
    ProxResult pr;
    while (true) {
      const double B = cfg.unit_b_ratio ? 1.0 : beta_prev / beta;
      theta = theta_update(theta_prev, B, cfg.gamma, cfg.b, i);
      momentum = (theta_prev - 1.0) / theta;
      xbar = momentum == 0.0 ? x_prev : set.project(x_prev + momentum * (x_prev - x_prev2));
      NllEval eb = model.evaluate_if_in_domain(xbar);
      ++evals;
      if (!eb.gradient) {
        if (momentum == 0.0) throw DomainError("pnpg: previous iterate left dom L");
        theta_prev = 1.0;
        restart_kind = RestartKind::Domain;
        ++trace.domain_restarts;
        continue;
      }
      nll_bar = eb.value;
      grad = std::move(*eb.gradient);

      pr = prox_step(reg, xbar - beta * grad, beta * u, stop, warm);
      inner_total += pr.inner_iterations;
      nll_x = model.value(pr.x);
      ++evals;
      const Vector diff = pr.x - xbar;
      const double q = nll_bar + diff.dot(grad) + diff.squaredNorm() / (2.0 * beta);
      if (nll_x <= q + majorization_slack(nll_x)) break;

      if (increase_attempt && !patience_bumped && n_eff != kInfinitePatience) {
        n_eff = std::min<long long>(n_eff + cfg.m, kInfinitePatience - 1);
        patience_bumped = true;
      }
      beta *= cfg.xi;
      kappa = 0;
      ++backtracks;
    }
    x = std::move(pr.x);

    double delta = (x - x_prev).squaredNorm();
    double pen = penalty_of(reg, x);
    double f_new = nll_x + u * pen;
    bool fallback = false;

    if (cfg.restart && i > 1 && f_new > f_prev) {
      // Prox too coarse for monotonicity: tighten once and retry the same step.
      if (pr.precision_proxy > std::sqrt(delta)) {
        ProxResult fine = prox_step(reg, xbar - beta * grad, beta * u, stop.tightened(10.0), warm);
        inner_total += fine.inner_iterations;
        const double nll_fine = model.value(fine.x);
        ++evals;
        const Vector diff = fine.x - xbar;
        const double q = nll_bar + diff.dot(grad) + diff.squaredNorm() / (2.0 * beta);
        if (nll_fine <= q + majorization_slack(nll_fine)) {
          pr.precision_proxy = fine.precision_proxy;
          x = std::move(fine.x);
          nll_x = nll_fine;
          delta = (x - x_prev).squaredNorm();
          pen = penalty_of(reg, x);
          f_new = nll_x + u * pen;
        }
      }
      if (f_new > f_prev) {
        ++consecutive_restarts;
        ++trace.function_restarts;
        if (consecutive_restarts >= 2) eta_eff /= 10.0;
        if (consecutive_restarts <= cfg.max_consecutive_restarts) {
          theta_prev = 1.0;
          kappa = 0;
          pending = RestartKind::Function;
          --i;
          continue;
        }
        // Guard: keep the previous iterate (x = xbar = x_{i-1}).
        x = x_prev;
        xbar = x_prev;
        nll_x = nll_prev;
        nll_bar = nll_prev;
        theta = 1.0;
        momentum = 0.0;
        delta = 0.0;
        pen = penalty_of(reg, x);
        f_new = f_prev;
        fallback = true;
        restart_kind = RestartKind::Function;
        grad = model.gradient(x);
        ++evals;
      }
    }
    consecutive_restarts = 0;

    IterationRecord rec;
    rec.iteration = i;
    rec.f = f_new;
    rec.nll = nll_x;
    rec.penalty = pen;
    rec.weight = u;
    rec.beta = beta;
    rec.theta = theta;
    rec.delta = delta;
    rec.restart = restart_kind;
    rec.backtracks = backtracks;
    rec.inner_iterations = inner_total;
    rec.eps_hat = pr.precision_proxy;
    rec.nll_evals = evals;
    rec.seconds = seconds_since(t_start);
    trace.records.push_back(rec);
    if (cfg.observer) {
      cfg.observer(AcceptedStep{i, xbar, x, grad, nll_bar, nll_x, beta, theta, momentum});
    }

    const double dx_norm = std::sqrt(delta);
    // A fallback step has delta = 0 by construction; it is not convergence
    // unless the previous iteration was a fallback too, in which case the
    // point is stationary up to round-off and nothing further will change.
    consecutive_fallbacks = fallback ? consecutive_fallbacks + 1 : 0;
    const bool done = fallback ? consecutive_fallbacks >= 2
                               : dx_norm <= cfg.epsilon * std::max(x.norm(), 1e-6);

    if (fallback) {
      // keep the last real displacement for the inner rule
    } else if (is_tv) {
      prev_disp = dx_norm;
    } else {
      prev_disp = adjoint_apply(reg.psi(), Vector(x - x_prev)).norm();
    }
    x_prev2 = std::move(x_prev);
    x_prev = x;
    theta_prev = theta;
    f_prev = f_new;
    nll_prev = nll_x;

    if (done) {
      trace.converged = true;
      break;
    }

    beta_prev = beta;
    if (n_eff != kInfinitePatience && kappa >= n_eff) {
      kappa = 0;
      beta = beta / cfg.xi;
      increase_attempt = true;
    } else {
      increase_attempt = false;
    }
  }

  trace.nll_evals = evals;
  trace.seconds = seconds_since(t_start);
  out.x = std::move(x_prev);
  return out;
}

}  // namespace

double bb_initial_step(const NllModel& model, const ConvexSet& set, const Vector& x0,
                       long long* evals) {
  if (x0.size() != model.dim()) throw InputError("bb_initial_step: dimension mismatch");
  long long local = 0;
  const double beta = bb_step_counted(model, set, x0, local);
  if (evals) *evals += local;
  return beta;
}

InnerStopRule inner_stop_rule(PenaltyKind kind, double eta,
                              std::optional<double> prev_displacement, double relative,
                              int max_inner) {
  (void)kind;  // both penalties scale eta by their own displacement measure
  if (!prev_displacement || !(*prev_displacement > 0.0) || !std::isfinite(*prev_displacement)) {
    return InnerStopRule::relative(relative, max_inner);
  }
  return InnerStopRule::absolute(eta * *prev_displacement, max_inner);
}

double objective(const NllModel& model, const Regularizer& reg, const Vector& x) {
  const double r = reg.value(x);
  if (!std::isfinite(r)) return r;
  return model.value(x) + reg.weight() * r;
}

double weight_upper_bound(const NllModel& model, const Regularizer& reg) {
  const Vector g = model.gradient(Vector::Zero(model.dim()));
  if (reg.kind() == SparsityKind::IsotropicTV) return g.lpNorm<Eigen::Infinity>();
  return adjoint_apply(reg.psi(), g).lpNorm<Eigen::Infinity>();
}

SolveResult pnpg_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                       const SolverConfig& cfg) {
  return run_pnpg(model, reg, x0, cfg, "pnpg");
}

SolveResult npgs_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                       const SolverConfig& cfg) {
  return run_pnpg(model, reg.with_set(ConvexSet::whole_space()), x0, cfg, "npgs");
}

std::vector<double> continuation_schedule(double u, double upper_bound,
                                          const ContinuationConfig& cc) {
  std::vector<double> stages;
  double level = cc.start_factor * upper_bound;
  for (int k = 0; k < cc.max_stages - 1 && level > u; ++k) {
    stages.push_back(level);
    level *= cc.decay;
  }
  stages.push_back(u);
  return stages;
}

SolveResult continuation_solve(const NllModel& model, const Regularizer& reg,
                               const Vector& x0, const SolverConfig& cfg) {
  if (!cfg.continuation) throw InputError("continuation_solve: cfg.continuation is not set");
  cfg.validate();
  const ContinuationConfig& cc = *cfg.continuation;
  const auto t_start = Clock::now();
  const std::vector<double> stages =
      continuation_schedule(reg.weight(), weight_upper_bound(model, reg), cc);

  SolveResult out;
  out.trace.solver = "pnpg_cont";
  Vector x = x0;
  std::optional<double> step = cfg.initial_step;
  long long evals_offset = 0;
  int iter_offset = 0;
  double secs_offset = 0.0;
  for (std::size_t k = 0; k < stages.size(); ++k) {
    const bool last = k + 1 == stages.size();
    SolverConfig stage_cfg = cfg;
    stage_cfg.continuation.reset();
    stage_cfg.epsilon = last ? cfg.epsilon : cc.stage_epsilon;
    stage_cfg.initial_step = step;
    SolveResult r = run_pnpg(model, reg.with_weight(stages[k]), x, stage_cfg, "pnpg");
    if (k == 0) out.trace.initial_f = objective(model, reg, reg.set().project(x0));
    for (IterationRecord rec : r.trace.records) {
      rec.iteration += iter_offset;
      rec.nll_evals += evals_offset;
      rec.seconds += secs_offset;
      out.trace.records.push_back(rec);
    }
    if (!r.trace.records.empty()) step = r.trace.records.back().beta;
    iter_offset = out.trace.records.empty() ? 0 : out.trace.records.back().iteration;
    evals_offset += r.trace.nll_evals;
    secs_offset += r.trace.seconds;
    out.trace.function_restarts += r.trace.function_restarts;
    out.trace.domain_restarts += r.trace.domain_restarts;
    out.trace.converged = r.trace.converged;
    x = std::move(r.x);
  }
  out.trace.nll_evals = evals_offset;
  out.trace.seconds = seconds_since(t_start);
  out.x = std::move(x);
  return out;
}

}  // namespace pnpg
