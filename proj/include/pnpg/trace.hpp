#pragma once

#include <string>
#include <vector>

#include "pnpg/operators.hpp"

namespace pnpg {

enum class RestartKind { None, Function, Domain };

const char* to_string(RestartKind kind);

/// One accepted outer iteration.
struct IterationRecord {
  int iteration = 0;
  double f = 0.0;        // nll + weight * penalty
  double nll = 0.0;
  double penalty = 0.0;  // unweighted sparsity term
  double weight = 0.0;   // u in force for this iteration
  double beta = 0.0;
  double theta = 1.0;
  double delta = 0.0;    // ||x_i - x_{i-1}||^2
  RestartKind restart = RestartKind::None;
  int backtracks = 0;
  int inner_iterations = 0;
  double eps_hat = 0.0;
  long long nll_evals = 0;  // cumulative
  double seconds = 0.0;     // cumulative wall clock
};

struct SolverTrace {
  std::string solver;
  double initial_f = 0.0;  // f at the projected starting point
  std::vector<IterationRecord> records;
  bool converged = false;
  bool feasible = true;  // every intermediate point stayed in C (checked by AT)
  long long nll_evals = 0;
  double seconds = 0.0;
  int function_restarts = 0;
  int domain_restarts = 0;
};

struct SolveResult {
  Vector x;
  SolverTrace trace;
};

}  // namespace pnpg
