#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "pnpg/models.hpp"
#include "pnpg/prox.hpp"
#include "pnpg/trace.hpp"

namespace pnpg {

inline constexpr int kInfinitePatience = std::numeric_limits<int>::max();

struct ContinuationConfig {
  double start_factor = 0.1;  // first stage weight = start_factor * U
  double decay = 0.1;         // u_{k+1} = decay * u_k
  int max_stages = 20;
  double stage_epsilon = 1e-4;  // outer threshold for all but the last stage
};

/// What an observer sees for each accepted PNPG iterate.
struct AcceptedStep {
  int iteration;
  const Vector& xbar;
  const Vector& x;
  const Vector& grad_xbar;
  double nll_xbar;
  double nll_x;
  double beta;
  double theta;
  double momentum;  // Theta = (theta_prev - 1) / theta
};

struct SolverConfig {
  // Momentum tuning: gamma >= 2, b in [0, 1/4].
  double gamma = 2.0;
  double b = 0.0;
  // Step-size patience and its increment; kInfinitePatience disables
  // increase attempts (backtracking only).
  int n = 4;
  int m = 4;
  double xi = 0.8;
  // Inner tolerance factor and the relative rule used when the previous
  // displacement is undefined or zero.
  double eta = 1e-2;
  double inner_relative = 1e-5;
  double epsilon = 1e-6;
  int max_iter = 10000;
  int max_inner = 100;
  bool restart = true;
  int max_consecutive_restarts = 3;
  // B = 1 in the theta recursion (classical FISTA momentum).
  bool unit_b_ratio = false;
  // Skip the Barzilai-Borwein probe and start from this step.
  std::optional<double> initial_step;
  std::optional<ContinuationConfig> continuation;
  std::function<void(const AcceptedStep&)> observer;

  void validate() const;
};

/// Floating-point allowance in the majorization test L(x) <= Q(x | xbar).
/// Kept near rounding level: a looser allowance lets step sizes above 1/Lip
/// through once iterates stall, and unrestarted momentum then amplifies the
/// resulting jitter.
inline double majorization_slack(double nll) { return 1e-14 * (1.0 + std::abs(nll)); }

/// theta_i = 1 for i <= 1, else 1/gamma + sqrt(b + B theta_{i-1}^2).
double theta_update(double theta_prev, double B, double gamma, double b, int i);

/// Initial step from one Barzilai-Borwein probe at P_C(x0).
/// `evals`, when given, is incremented by the number of NLL evaluations used.
double bb_initial_step(const NllModel& model, const ConvexSet& set, const Vector& x0,
                       long long* evals = nullptr);

enum class PenaltyKind { TV, L1 };

/// Inner stopping rule for one outer iteration. `prev_displacement` is
/// sqrt(delta_{i-1}) for TV and ||Psi^T(x_{i-1} - x_{i-2})|| for L1; when it is
/// absent or zero the relative rule with `relative` is used instead.
InnerStopRule inner_stop_rule(PenaltyKind kind, double eta,
                              std::optional<double> prev_displacement,
                              double relative = 1e-5, int max_inner = 100);

/// f(x) = L(x) + u ||psi(x)||_1 subject to x in C.
double objective(const NllModel& model, const Regularizer& reg, const Vector& x);

/// ||Psi^T grad L(0)||_inf for L1, ||grad L(0)||_inf for TV. Above this
/// weight the (unconstrained) minimizer is 0.
double weight_upper_bound(const NllModel& model, const Regularizer& reg);

SolveResult pnpg_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                       const SolverConfig& cfg = {});

/// PNPG with C replaced by the whole space.
SolveResult npgs_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                       const SolverConfig& cfg = {});

/// Decreasing-weight warm-started PNPG stages ending at reg.weight().
SolveResult continuation_solve(const NllModel& model, const Regularizer& reg,
                               const Vector& x0, const SolverConfig& cfg);

/// Stage weights u_k = max(u, start * U * decay^k), ending exactly at u.
std::vector<double> continuation_schedule(double u, double upper_bound,
                                          const ContinuationConfig& cc);

}  // namespace pnpg
