#include "pnpg/operators.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace pnpg {

Vector make_vector(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  require_finite(v, "vector");
  return v;
}

void require_finite(const Vector& v, const std::string& what) {
  if (!v.allFinite()) throw InputError(what + " has non-finite entries");
}

namespace {

void check_len(Eigen::Index got, Eigen::Index want, const char* which) {
  if (got != want) {
    std::ostringstream os;
    os << which << ": dimension mismatch (got " << got << ", expected " << want
       << ")";
    throw InputError(os.str());
  }
}

}  // namespace

Vector apply(const LinearOperator& op, const Vector& x) {
  check_len(x.size(), op.cols(), "apply");
  Vector out(op.rows());
  op.forward(x, out);
  return out;
}

Vector adjoint_apply(const LinearOperator& op, const Vector& y) {
  check_len(y.size(), op.rows(), "adjoint_apply");
  Vector out(op.cols());
  op.adjoint(y, out);
  return out;
}

IdentityOperator::IdentityOperator(Eigen::Index n) : n_(n) {
  if (n < 1) throw InputError("identity operator needs n >= 1");
}

DenseOperator::DenseOperator(Matrix m) : m_(std::move(m)) {
  if (m_.rows() < 1 || m_.cols() < 1) throw InputError("empty matrix operator");
  if (!m_.allFinite()) throw InputError("matrix operator has non-finite entries");
}

void DenseOperator::forward(const Vector& x, Vector& out) const {
  out.noalias() = m_ * x;
}

void DenseOperator::adjoint(const Vector& y, Vector& out) const {
  out.noalias() = m_.transpose() * y;
}

SparseOperator::SparseOperator(SparseMatrix m) : m_(std::move(m)) {
  if (m_.rows() < 1 || m_.cols() < 1) throw InputError("empty sparse operator");
  m_.makeCompressed();
  mt_ = m_.transpose();
  mt_.makeCompressed();
}

void SparseOperator::forward(const Vector& x, Vector& out) const {
  out.noalias() = m_ * x;
}

void SparseOperator::adjoint(const Vector& y, Vector& out) const {
  out.noalias() = mt_ * y;
}

RowScaledOperator::RowScaledOperator(OperatorPtr inner, Vector scale)
    : inner_(std::move(inner)), scale_(std::move(scale)) {
  if (!inner_) throw InputError("row-scaled operator: null inner operator");
  check_len(scale_.size(), inner_->rows(), "row-scaled operator");
  require_finite(scale_, "row scale");
}

void RowScaledOperator::forward(const Vector& x, Vector& out) const {
  inner_->forward(x, out);
  out.array() *= scale_.array();
}

void RowScaledOperator::adjoint(const Vector& y, Vector& out) const {
  Vector scaled = y.cwiseProduct(scale_);
  inner_->adjoint(scaled, out);
}

ScaledOperator::ScaledOperator(OperatorPtr inner, double s)
    : inner_(std::move(inner)), s_(s) {
  if (!inner_) throw InputError("scaled operator: null inner operator");
  if (!std::isfinite(s)) throw InputError("scaled operator: non-finite scale");
}

void ScaledOperator::forward(const Vector& x, Vector& out) const {
  inner_->forward(x, out);
  out *= s_;
}

void ScaledOperator::adjoint(const Vector& y, Vector& out) const {
  inner_->adjoint(y, out);
  out *= s_;
}

Matrix to_dense(const LinearOperator& op) {
  Matrix m(op.rows(), op.cols());
  Vector e = Vector::Zero(op.cols());
  Vector col(op.rows());
  for (Eigen::Index j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    op.forward(e, col);
    m.col(j) = col;
    e[j] = 0.0;
  }
  return m;
}

NormEstimate spectral_norm_sq(const LinearOperator& op, double tol, int max_iter,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(op.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  v.normalize();

  Vector w(op.rows());
  Vector z(op.cols());
  NormEstimate est;
  double prev = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    op.forward(v, w);
    const double value = w.squaredNorm();
    est.value = value;
    est.iterations = k;
    if (value == 0.0) {
      throw InputError("spectral_norm_sq: operator annihilates the probe vector");
    }
    if (k > 1 && std::abs(value - prev) <= tol * value) {
      est.converged = true;
      return est;
    }
    prev = value;
    op.adjoint(w, z);
    v = z / z.norm();
  }
  return est;
}

std::shared_ptr<const DenseOperator> gaussian_sensing(Eigen::Index rows,
                                                      Eigen::Index cols,
                                                      std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw InputError("gaussian_sensing: N, p must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  // Row-major fill order so the draw sequence does not depend on storage.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return std::make_shared<const DenseOperator>(std::move(m));
}

}  // namespace pnpg
