#pragma once

#include <cstdint>
#include <optional>

#include "pnpg/operators.hpp"

namespace pnpg {

enum class SetKind { WholeSpace, NonnegativeOrthant, Box };

/// Closed convex set C with a closed-form Euclidean projection.
class ConvexSet {
 public:
  static ConvexSet whole_space() { return ConvexSet(SetKind::WholeSpace, {}, {}); }
  static ConvexSet nonnegative() { return ConvexSet(SetKind::NonnegativeOrthant, {}, {}); }
  // Throws InputError unless lo <= hi elementwise.
  static ConvexSet box(Vector lo, Vector hi);

  SetKind kind() const { return kind_; }
  Vector project(const Vector& a) const;
  bool contains(const Vector& x, double tol = 0.0) const;

 private:
  ConvexSet(SetKind kind, Vector lo, Vector hi)
      : kind_(kind), lo_(std::move(lo)), hi_(std::move(hi)) {}

  SetKind kind_;
  Vector lo_;
  Vector hi_;
};

inline Vector project(const ConvexSet& set, const Vector& a) { return set.project(a); }

/// sign(a_i) * max(|a_i| - lambda, 0).
Vector soft_threshold(const Vector& a, double lambda);

/// 1-D chain (rows == 1) or row-major 2-D lattice with forward-difference
/// neighbours.
struct GridShape {
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  Eigen::Index size() const { return rows * cols; }
  bool is_2d() const { return rows > 1 && cols > 1; }
};

/// Isotropic TV: sum over pixels of the norm of the forward differences.
double tv_isotropic(const GridShape& grid, const Vector& x);

enum class SparsityKind { L1Analysis, IsotropicTV };

/// u * (||psi(x)||_1 + I_C(x)), with psi either Psi^T x (rows of Psi
/// orthonormal, Psi is p x p') or the isotropic gradient map.
class Regularizer {
 public:
  /// Probes Psi Psi^T v = v on random unit v and throws InputError if the
  /// residual exceeds 1e-8.
  static Regularizer l1_analysis(OperatorPtr psi, ConvexSet set, double weight);
  static Regularizer tv(GridShape grid, ConvexSet set, double weight);

  SparsityKind kind() const { return kind_; }
  const ConvexSet& set() const { return set_; }
  double weight() const { return weight_; }
  Eigen::Index dim() const;
  const LinearOperator& psi() const { return *psi_; }
  const OperatorPtr& psi_ptr() const { return psi_; }
  const GridShape& grid() const { return grid_; }
  // Square Psi with Psi^T Psi = I as well: the unconstrained prox is closed form.
  bool psi_orthogonal() const { return orthogonal_; }

  Regularizer with_weight(double weight) const;
  Regularizer with_set(ConvexSet set) const;

  // ||Psi^T x||_1 or TV(x); ignores C.
  double sparsity(const Vector& x) const;
  // sparsity(x) + I_C(x), unweighted.
  double value(const Vector& x) const;

 private:
  Regularizer(SparsityKind kind, ConvexSet set, double weight)
      : kind_(kind), set_(std::move(set)), weight_(weight) {}

  SparsityKind kind_;
  ConvexSet set_;
  double weight_;
  OperatorPtr psi_;
  GridShape grid_;
  bool orthogonal_ = false;
};

/// Termination rule for inner proximal iterations.
///
/// Absolute: residual <= threshold. Relative: residual <= threshold * reference,
/// where reference is ||s|| (ADMM) or ||x|| (TV).
struct InnerStopRule {
  enum class Mode { Absolute, Relative };
  Mode mode = Mode::Relative;
  double threshold = 1e-5;
  int max_iter = 100;

  static InnerStopRule absolute(double threshold, int max_iter = 100) {
    return {Mode::Absolute, threshold, max_iter};
  }
  static InnerStopRule relative(double threshold, int max_iter = 100) {
    return {Mode::Relative, threshold, max_iter};
  }
  bool satisfied(double residual, double reference_norm) const {
    return mode == Mode::Absolute ? residual <= threshold
                                  : residual <= threshold * reference_norm;
  }
  InnerStopRule tightened(double factor) const {
    InnerStopRule r = *this;
    r.threshold /= factor;
    return r;
  }
};

struct ProxResult {
  Vector x;
  int inner_iterations = 0;
  bool converged = false;
  // eps-hat: max(primal, dual residual) for ADMM, last inner displacement for
  // TV, 0 for closed-form steps.
  double precision_proxy = 0.0;
};

/// ADMM for argmin_x 0.5||x - a||^2 + lambda ||Psi^T x||_1 + I_C(x).
/// `warm_s` seeds the split variable s = Psi^T x (defaults to Psi^T a).
/// On return `final_s` (if given) holds the last s iterate.
ProxResult prox_l1_analysis(const Vector& a, double lambda, const Regularizer& reg,
                            const Vector* warm_s, const InnerStopRule& stop,
                            Vector* final_s = nullptr);

/// Dual variables of the TV denoiser, kept between calls for warm starts.
struct TvDual {
  Vector vertical;    // (rows-1) x cols differences, row-major; empty for 1-D
  Vector horizontal;  // rows x (cols-1) differences
};

/// Fast gradient projection on the dual of
/// argmin_x 0.5||x - a||^2 + lambda TV(x) + I_C(x).
/// `warm` (optional) seeds the dual and receives the final dual iterate.
ProxResult prox_tv(const Vector& a, double lambda, const Regularizer& reg,
                   const InnerStopRule& stop, TvDual* warm = nullptr);

/// Per-run warm-start state for prox_step.
struct ProxWarmStart {
  std::optional<Vector> split;  // ADMM s
  TvDual tv;
};

/// prox of lambda * r for whichever penalty `reg` carries. Dispatches to a
/// closed form when one exists (lambda == 0, or L1 with orthogonal Psi and
/// C = whole space).
ProxResult prox_step(const Regularizer& reg, const Vector& a, double lambda,
                     const InnerStopRule& stop, ProxWarmStart& warm);

/// Sampled necessary condition for x ~=_eps prox_{u r}(a):
///   r(z) >= r(x) + (z - x)^T (a - x)/u - eps^2/(2u)
/// over structured probes plus `samples` random points of C.
bool check_eps_subgradient(const Regularizer& reg, const Vector& a, const Vector& x,
                           double u, double eps, int samples, std::uint64_t seed = 1);

}  // namespace pnpg
