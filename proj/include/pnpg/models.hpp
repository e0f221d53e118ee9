#pragma once

#include <optional>

#include "pnpg/operators.hpp"

namespace pnpg {

enum class NllKind { PoissonIdentity, PoissonLogConcentrated, GaussianLinear };

const char* to_string(NllKind kind);

/// Value and (optionally) gradient of an NLL at one point.
struct NllEval {
  double value = 0.0;         // +inf outside the domain
  std::optional<Vector> gradient;
};

/// Convex differentiable negative log-likelihood L(x).
///
///  - PoissonIdentity:  1^T(phi - y) + sum_{y_n>0} y_n ln(y_n/phi_n), phi = Phi x + b
///  - PoissonLogConcentrated:  (1^T y) ln(1^T exp(-Phi x)) + y^T Phi x
///  - GaussianLinear:  0.5 ||y - Phi x||^2
///
/// Immutable; evaluation is pure and thread-safe.
class NllModel {
 public:
  static NllModel poisson_identity(OperatorPtr phi, Vector y, Vector intercept);
  static NllModel poisson_log_concentrated(OperatorPtr phi, Vector y);
  static NllModel gaussian(OperatorPtr phi, Vector y);

  NllKind kind() const { return kind_; }
  const LinearOperator& sensing() const { return *phi_; }
  const OperatorPtr& sensing_ptr() const { return phi_; }
  const Vector& measurements() const { return y_; }
  const Vector& intercept() const { return b_; }
  Eigen::Index dim() const { return phi_->cols(); }

  double value(const Vector& x) const;
  // Throws DomainError when !in_domain(x).
  Vector gradient(const Vector& x) const;
  // One forward projection shared by value and gradient.
  NllEval evaluate(const Vector& x, bool with_gradient) const;
  // Like evaluate(x, true) but reports a point outside the domain by
  // leaving `gradient` empty instead of throwing.
  NllEval evaluate_if_in_domain(const Vector& x) const;
  bool in_domain(const Vector& x) const;

  // True when the gradient is globally Lipschitz (needed by GFB/PDS).
  bool has_lipschitz_gradient() const { return kind_ == NllKind::GaussianLinear; }

 private:
  NllModel(NllKind kind, OperatorPtr phi, Vector y, Vector b);

  void check_dim(const Vector& x) const;
  // Linear predictor Phi x (+ b for the identity link).
  Vector predictor(const Vector& x) const;
  double value_from_predictor(const Vector& eta) const;
  bool predictor_in_domain(const Vector& eta) const;
  Vector gradient_from_predictor(const Vector& eta) const;

  NllKind kind_;
  OperatorPtr phi_;
  Vector y_;
  Vector b_;
  double total_counts_ = 0.0;
};

}  // namespace pnpg
