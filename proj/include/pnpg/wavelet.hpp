#pragma once

#include <vector>

#include "pnpg/operators.hpp"

namespace pnpg {

enum class WaveletFamily { Haar, Daubechies4 };

/// Orthonormal periodic DWT configuration.
///
/// `rows == 1` selects a 1-D transform of a length-`cols` signal; otherwise the
/// signal is a square `rows x cols` image stored row-major. Coefficients use
/// Mallat ordering: the coarsest approximation block comes first (1-D) or sits
/// in the top-left corner (2-D).
struct WaveletSpec {
  WaveletFamily family = WaveletFamily::Haar;
  int levels = 1;
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;

  static WaveletSpec line(WaveletFamily f, int levels, Eigen::Index n) {
    return {f, levels, 1, n};
  }
  static WaveletSpec square(WaveletFamily f, int levels, Eigen::Index n) {
    return {f, levels, n, n};
  }

  Eigen::Index size() const { return rows * cols; }
  bool is_2d() const { return rows > 1; }
  // Throws InputError unless every transformed axis is divisible by 2^levels.
  void validate() const;
};

/// Low-pass analysis filter; the high-pass filter is its quadrature mirror.
std::vector<double> scaling_filter(WaveletFamily family);

Vector dwt_forward(const WaveletSpec& spec, const Vector& x);
Vector dwt_inverse(const WaveletSpec& spec, const Vector& w);

/// Psi as a LinearOperator: forward is synthesis (coefficients -> signal) and
/// adjoint is analysis (signal -> coefficients), so Psi^T x is the DWT of x.
class WaveletOperator final : public LinearOperator {
 public:
  explicit WaveletOperator(WaveletSpec spec);
  Eigen::Index rows() const override { return spec_.size(); }
  Eigen::Index cols() const override { return spec_.size(); }
  void forward(const Vector& coeffs, Vector& out) const override;
  void adjoint(const Vector& signal, Vector& out) const override;
  const WaveletSpec& spec() const { return spec_; }

 private:
  WaveletSpec spec_;
};

}  // namespace pnpg
