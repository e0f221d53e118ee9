#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnpg/baselines.hpp"
#include "pnpg/wavelet.hpp"

namespace pnpg {

inline constexpr const char* kToolVersion = "0.1.0";

/// Nonnegative 1-D test signal of length p built from triangle, rectangle,
/// sinusoid and parabola pieces at fixed relative positions. Throws unless
/// p >= 64 is a power of two.
Vector gen_skyline(Eigen::Index p);

struct PetPhantom {
  Vector activity;     // grid_n^2, row-major
  Vector attenuation;  // per unit pixel length
};

/// Ellipse torso phantom: body, two lungs, heart, spine and a few hot lesions
/// whose placement depends on `seed`. grid_n must be 32, 64 or 128.
PetPhantom gen_pet_phantom(int grid_n, std::uint64_t seed);

struct PoissonSimulation {
  OperatorPtr phi;   // sensing rescaled so that 1^T phi x = target counts
  double scale = 1;  // factor applied to the input operator
  Vector intercept;  // b = 1^T phi x / (10 N)
  Vector y;
};

/// Rescale, add a 10% intercept and draw Poisson counts with mt19937_64(seed).
PoissonSimulation simulate_poisson(OperatorPtr phi, const Vector& x, double target_counts,
                                   std::uint64_t seed);

Vector simulate_gaussian_noiseless(const LinearOperator& phi, const Vector& x);

/// ||xhat - xtrue||^2 / ||xtrue||^2.
double rse(const Vector& xhat, const Vector& xtrue);

/// Fraction of ||x||^2 carried by the largest `fraction` of DWT coefficients.
double top_coefficient_energy(const WaveletSpec& spec, const Vector& x, double fraction);

enum class Family { PetPoisson, SkylineGaussian };
enum class PenaltyChoice { L1, TV };

const char* to_string(Family f);
const char* to_string(PenaltyChoice r);
Family parse_family(const std::string& s);
PenaltyChoice parse_penalty(const std::string& s);

/// Known solver names: pnpg, pnpg_inf, pnpg_cont, npgs, at, gfb, pds.
bool is_known_solver(const std::string& name);

struct ExperimentSpec {
  Family family = Family::SkylineGaussian;
  // PET
  int grid_n = 32;
  int n_views = 30;
  int n_radial = 32;
  double counts = 1e6;
  // Skyline
  Eigen::Index p = 1024;
  double ratio = 0.34;

  PenaltyChoice reg = PenaltyChoice::L1;
  std::vector<double> a_grid;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> solvers;

  double epsilon = 1e-6;
  int max_iter = 10000;
  int at_period = 200;
  int threads = 1;
  std::filesystem::path out_dir;

  void validate() const;
};

/// One problem realization shared by every (solver, a) pair of a seed.
struct Instance {
  std::uint64_t seed = 0;
  NllModel model;
  Regularizer reg;  // weight 1; scaled per run
  Vector x0;
  Vector truth;
  double weight_scale = 1.0;  // u = 10^a * weight_scale
};

Instance build_instance(const ExperimentSpec& spec, std::uint64_t seed);

struct RunResult {
  int run_id = 0;
  std::string solver;
  double a = 0.0;
  std::uint64_t seed = 0;
  double weight = 0.0;
  double rse = 0.0;
  double f_final = 0.0;
  int iterations = 0;
  long long nll_evals = 0;
  double wall_seconds = 0.0;
  bool converged = false;
  std::string error;  // empty on success
  SolverTrace trace;
};

struct SweepResult {
  ExperimentSpec spec;
  std::vector<RunResult> runs;  // ordered by run_id
};

/// Runs one (solver, weight) pair on an instance.
SolveResult run_solver(const std::string& solver, const Instance& inst, double weight,
                       const ExperimentSpec& spec);

/// Every (solver, a, seed) run; run_id enumerates solvers, then a, then seeds.
/// Independent runs go to `spec.threads` workers; results do not depend on
/// the thread count.
SweepResult run_sweep(const ExperimentSpec& spec);

struct BestA {
  std::string solver;
  double a = 0.0;
  double mean_rse = 0.0;
  int runs = 0;
};

/// Per solver, the a minimizing mean RSE across seeds (failed runs skipped;
/// ties go to the smaller a).
std::vector<BestA> best_a(const std::vector<RunResult>& runs);

/// Writes results.csv, failures.csv, traces/run_<id>.csv and manifest.json
/// under `dir`. Throws std::runtime_error naming the file on I/O failure.
void export_results(const SweepResult& result, const std::filesystem::path& dir);

/// Spec recorded in a manifest.json written by export_results (out_dir and
/// threads are left at their defaults).
ExperimentSpec load_manifest(const std::filesystem::path& path);

/// Parses results.csv back into RunResult rows (traces are not loaded).
std::vector<RunResult> read_results_csv(const std::filesystem::path& path);

std::string results_csv_header();
std::string format_double(double v);

}  // namespace pnpg
