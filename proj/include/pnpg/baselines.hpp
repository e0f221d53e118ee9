#pragma once

#include <optional>

#include "pnpg/solver.hpp"

namespace pnpg {

/// Auslender-Teboulle acceleration. Uses cfg.xi, epsilon, max_iter,
/// inner_relative, max_inner and initial_step; theta follows (gamma, b) =
/// (2, 1/4) and is reset every `restart_period` iterations.
SolveResult at_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                     const SolverConfig& cfg = {}, int restart_period = 200);

struct GfbParams {
  std::optional<double> r;  // default 1.8 / ||Phi||^2
  double relax = 1.0;       // lambda
  double w = 0.5;
  double epsilon = 1e-6;
  int max_iter = 10000;
};

/// Generalized forward-backward splitting with two blocks: the L1 term
/// (closed form, square orthogonal Psi) and the indicator of C.
SolveResult gfb_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                      const GfbParams& params = {});

struct PdsParams {
  std::optional<double> tau;  // default: positive root of tau^2 + tau ||Phi||^2/2 = 1
  double epsilon = 1e-6;
  int max_iter = 10000;
  // Called with (x, z) after every update.
  std::function<void(const Vector&, const Vector&)> observer;
};

/// Condat-Vu primal-dual splitting with sigma = tau.
SolveResult pds_solve(const NllModel& model, const Regularizer& reg, const Vector& x0,
                      const PdsParams& params = {});

/// tau, sigma and rho used by pds_solve for a given ||Phi||^2.
struct PdsSteps {
  double tau;
  double sigma;
  double rho;
};
PdsSteps pds_steps(double phi_norm_sq);

}  // namespace pnpg
