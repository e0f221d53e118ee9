#include "pnpg/models.hpp"

#include <cmath>
#include <limits>

namespace pnpg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* to_string(NllKind kind) {
  switch (kind) {
    case NllKind::PoissonIdentity: return "poisson-identity";
    case NllKind::PoissonLogConcentrated: return "poisson-log-concentrated";
    case NllKind::GaussianLinear: return "gaussian";
  }
  return "unknown";
}

NllModel::NllModel(NllKind kind, OperatorPtr phi, Vector y, Vector b)
    : kind_(kind), phi_(std::move(phi)), y_(std::move(y)), b_(std::move(b)) {
  if (!phi_) throw InputError("NllModel: null sensing operator");
  if (y_.size() != phi_->rows()) {
    throw InputError("NllModel: measurement length must equal sensing rows");
  }
  require_finite(y_, "measurements");
  total_counts_ = y_.sum();
}

NllModel NllModel::poisson_identity(OperatorPtr phi, Vector y, Vector intercept) {
  for (Eigen::Index n = 0; n < y.size(); ++n) {
    if (y[n] < 0.0 || y[n] != std::floor(y[n])) {
      throw InputError("poisson_identity: counts must be nonnegative integers");
    }
  }
  if (intercept.size() != y.size()) {
    throw InputError("poisson_identity: intercept length must equal measurement length");
  }
  require_finite(intercept, "intercept");
  if ((intercept.array() < 0.0).any()) throw InputError("poisson_identity: intercept must be >= 0");
  return NllModel(NllKind::PoissonIdentity, std::move(phi), std::move(y), std::move(intercept));
}

NllModel NllModel::poisson_log_concentrated(OperatorPtr phi, Vector y) {
  if ((y.array() < 0.0).any()) throw InputError("poisson_log_concentrated: counts must be >= 0");
  return NllModel(NllKind::PoissonLogConcentrated, std::move(phi), std::move(y), Vector());
}

NllModel NllModel::gaussian(OperatorPtr phi, Vector y) {
  return NllModel(NllKind::GaussianLinear, std::move(phi), std::move(y), Vector());
}

void NllModel::check_dim(const Vector& x) const {
  if (x.size() != phi_->cols()) throw InputError("NllModel: signal length must equal sensing cols");
}

Vector NllModel::predictor(const Vector& x) const {
  Vector eta(phi_->rows());
  phi_->forward(x, eta);
  if (kind_ == NllKind::PoissonIdentity) eta += b_;
  return eta;
}

double NllModel::value_from_predictor(const Vector& eta) const {
  switch (kind_) {
    case NllKind::PoissonIdentity: {
      double acc = 0.0;
      for (Eigen::Index n = 0; n < eta.size(); ++n) {
        const double phi = eta[n];
        const double y = y_[n];
        if (phi < 0.0) return kInf;
        if (y > 0.0) {
          if (phi == 0.0) return kInf;
          acc += (phi - y) + y * std::log(y / phi);
        } else {
          acc += phi;
        }
      }
      return acc;
    }
    case NllKind::PoissonLogConcentrated: {
      // log sum exp(-eta), shifted by max(-eta).
      const double shift = (-eta).maxCoeff();
      const double lse = shift + std::log((-eta.array() - shift).exp().sum());
      return total_counts_ * lse + y_.dot(eta);
    }
    case NllKind::GaussianLinear:
      return 0.5 * (y_ - eta).squaredNorm();
  }
  return kInf;
}

bool NllModel::predictor_in_domain(const Vector& eta) const {
  if (kind_ != NllKind::PoissonIdentity) return eta.allFinite();
  for (Eigen::Index n = 0; n < eta.size(); ++n) {
    if (!std::isfinite(eta[n]) || eta[n] < 0.0) return false;
    if (y_[n] > 0.0 && eta[n] == 0.0) return false;
  }
  return true;
}

Vector NllModel::gradient_from_predictor(const Vector& eta) const {
  Vector pre(eta.size());
  switch (kind_) {
    case NllKind::PoissonIdentity:
      for (Eigen::Index n = 0; n < eta.size(); ++n) {
        pre[n] = (y_[n] > 0.0) ? 1.0 - y_[n] / eta[n] : 1.0;
      }
      break;
    case NllKind::PoissonLogConcentrated: {
      const double shift = (-eta).maxCoeff();
      Vector w = (-eta.array() - shift).exp().matrix();
      w /= w.sum();
      pre = y_ - total_counts_ * w;
      break;
    }
    case NllKind::GaussianLinear:
      pre = eta - y_;
      break;
  }
  Vector g(phi_->cols());
  phi_->adjoint(pre, g);
  return g;
}

double NllModel::value(const Vector& x) const {
  check_dim(x);
  return value_from_predictor(predictor(x));
}

Vector NllModel::gradient(const Vector& x) const {
  check_dim(x);
  const Vector eta = predictor(x);
  if (!predictor_in_domain(eta)) throw DomainError("NllModel: gradient requested outside dom L");
  return gradient_from_predictor(eta);
}

NllEval NllModel::evaluate(const Vector& x, bool with_gradient) const {
  check_dim(x);
  const Vector eta = predictor(x);
  NllEval out;
  out.value = value_from_predictor(eta);
  if (with_gradient) {
    if (!predictor_in_domain(eta)) throw DomainError("NllModel: gradient requested outside dom L");
    out.gradient = gradient_from_predictor(eta);
  }
  return out;
}

NllEval NllModel::evaluate_if_in_domain(const Vector& x) const {
  check_dim(x);
  const Vector eta = predictor(x);
  NllEval out;
  out.value = value_from_predictor(eta);
  if (predictor_in_domain(eta)) out.gradient = gradient_from_predictor(eta);
  return out;
}

bool NllModel::in_domain(const Vector& x) const {
  check_dim(x);
  if (kind_ != NllKind::PoissonIdentity) return x.allFinite();
  return predictor_in_domain(predictor(x));
}

}  // namespace pnpg
