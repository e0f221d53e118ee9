#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <memory>
#include <string>

#include "pnpg/errors.hpp"

namespace pnpg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Builds a vector from values, rejecting NaN and Inf entries.
Vector make_vector(std::initializer_list<double> values);
void require_finite(const Vector& v, const std::string& what);

/// A linear map A: R^cols -> R^rows with its transpose.
///
/// Implementations write into a preallocated output; the free functions
/// `apply` and `adjoint_apply` do the dimension checks and allocation.
/// Operators are immutable once built and may be shared across threads.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Eigen::Index rows() const = 0;
  virtual Eigen::Index cols() const = 0;

  // out = A x. `out` has size rows().
  virtual void forward(const Vector& x, Vector& out) const = 0;
  // out = A^T y. `out` has size cols().
  virtual void adjoint(const Vector& y, Vector& out) const = 0;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

Vector apply(const LinearOperator& op, const Vector& x);
Vector adjoint_apply(const LinearOperator& op, const Vector& y);

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Eigen::Index n);
  Eigen::Index rows() const override { return n_; }
  Eigen::Index cols() const override { return n_; }
  void forward(const Vector& x, Vector& out) const override { out = x; }
  void adjoint(const Vector& y, Vector& out) const override { out = y; }

 private:
  Eigen::Index n_;
};

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix m);
  Eigen::Index rows() const override { return m_.rows(); }
  Eigen::Index cols() const override { return m_.cols(); }
  void forward(const Vector& x, Vector& out) const override;
  void adjoint(const Vector& y, Vector& out) const override;
  const Matrix& matrix() const { return m_; }

 private:
  Matrix m_;
};

class SparseOperator final : public LinearOperator {
 public:
  explicit SparseOperator(SparseMatrix m);
  Eigen::Index rows() const override { return m_.rows(); }
  Eigen::Index cols() const override { return m_.cols(); }
  void forward(const Vector& x, Vector& out) const override;
  void adjoint(const Vector& y, Vector& out) const override;
  const SparseMatrix& matrix() const { return m_; }

 private:
  SparseMatrix m_;
  SparseMatrix mt_;  // cached transpose, row-major for a fast adjoint
};

// diag(scale) * inner. Used for attenuation-weighted sensing.
class RowScaledOperator final : public LinearOperator {
 public:
  RowScaledOperator(OperatorPtr inner, Vector scale);
  Eigen::Index rows() const override { return inner_->rows(); }
  Eigen::Index cols() const override { return inner_->cols(); }
  void forward(const Vector& x, Vector& out) const override;
  void adjoint(const Vector& y, Vector& out) const override;
  const Vector& scale() const { return scale_; }
  const OperatorPtr& inner() const { return inner_; }

 private:
  OperatorPtr inner_;
  Vector scale_;
};

// s * inner for a scalar s.
class ScaledOperator final : public LinearOperator {
 public:
  ScaledOperator(OperatorPtr inner, double s);
  Eigen::Index rows() const override { return inner_->rows(); }
  Eigen::Index cols() const override { return inner_->cols(); }
  void forward(const Vector& x, Vector& out) const override;
  void adjoint(const Vector& y, Vector& out) const override;

 private:
  OperatorPtr inner_;
  double s_;
};

/// Materializes an operator as a dense matrix by probing unit vectors.
/// Intended for tests and small problems.
Matrix to_dense(const LinearOperator& op);

struct NormEstimate {
  double value = 0.0;   // estimate of ||A||_2^2
  int iterations = 0;
  bool converged = false;  // false: max_iter hit, value is the last estimate
};

/// Power iteration on A^T A. Stops when the relative change of the
/// Rayleigh quotient drops below `tol`.
NormEstimate spectral_norm_sq(const LinearOperator& op, double tol = 1e-12,
                              int max_iter = 10000, std::uint64_t seed = 7);

/// Dense N x p operator with iid N(0,1) entries drawn from mt19937_64(seed).
std::shared_ptr<const DenseOperator> gaussian_sensing(Eigen::Index rows,
                                                      Eigen::Index cols,
                                                      std::uint64_t seed);

}  // namespace pnpg
