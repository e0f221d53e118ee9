#include "pnpg/wavelet.hpp"

#include <cmath>
#include <sstream>

namespace pnpg {

namespace {

struct Filters {
  std::vector<double> lo;
  std::vector<double> hi;
};

Filters make_filters(WaveletFamily family) {
  Filters f;
  f.lo = scaling_filter(family);
  const std::size_t len = f.lo.size();
  f.hi.resize(len);
  for (std::size_t m = 0; m < len; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    f.hi[m] = sign * f.lo[len - 1 - m];
  }
  return f;
}

// One analysis level on n samples read with a stride. Writes approximation
// coefficients to out[0, n/2) and details to out[n/2, n).
void analyze(const Filters& f, const double* in, std::ptrdiff_t stride,
             std::ptrdiff_t n, double* out) {
  const std::ptrdiff_t half = n / 2;
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(f.lo.size());
  for (std::ptrdiff_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (std::ptrdiff_t m = 0; m < len; ++m) {
      const double v = in[((2 * k + m) % n) * stride];
      a += f.lo[m] * v;
      d += f.hi[m] * v;
    }
    out[k] = a;
    out[half + k] = d;
  }
}

// Inverse of analyze(): reads [approx | detail] from `in`, writes n samples.
void synthesize(const Filters& f, const double* in, std::ptrdiff_t n,
                double* out, std::ptrdiff_t stride) {
  const std::ptrdiff_t half = n / 2;
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(f.lo.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i * stride] = 0.0;
  for (std::ptrdiff_t k = 0; k < half; ++k) {
    const double a = in[k];
    const double d = in[half + k];
    for (std::ptrdiff_t m = 0; m < len; ++m) {
      out[((2 * k + m) % n) * stride] += f.lo[m] * a + f.hi[m] * d;
    }
  }
}

void forward_1d(const Filters& f, int levels, double* data, std::ptrdiff_t n) {
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (int l = 0; l < levels; ++l) {
    const std::ptrdiff_t len = n >> l;
    analyze(f, data, 1, len, buf.data());
    std::copy(buf.begin(), buf.begin() + len, data);
  }
}

void inverse_1d(const Filters& f, int levels, double* data, std::ptrdiff_t n) {
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (int l = levels - 1; l >= 0; --l) {
    const std::ptrdiff_t len = n >> l;
    synthesize(f, data, len, buf.data(), 1);
    std::copy(buf.begin(), buf.begin() + len, data);
  }
}

// Square row-major image of side n.
void forward_2d(const Filters& f, int levels, double* img, std::ptrdiff_t n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int l = 0; l < levels; ++l) {
    const std::ptrdiff_t s = n >> l;
    for (std::ptrdiff_t r = 0; r < s; ++r) {
      analyze(f, img + r * n, 1, s, out.data());
      std::copy(out.begin(), out.begin() + s, img + r * n);
    }
    for (std::ptrdiff_t c = 0; c < s; ++c) {
      analyze(f, img + c, n, s, out.data());
      for (std::ptrdiff_t r = 0; r < s; ++r) img[r * n + c] = out[r];
    }
  }
}

void inverse_2d(const Filters& f, int levels, double* img, std::ptrdiff_t n) {
  std::vector<double> line(static_cast<std::size_t>(n));
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int l = levels - 1; l >= 0; --l) {
    const std::ptrdiff_t s = n >> l;
    for (std::ptrdiff_t c = 0; c < s; ++c) {
      for (std::ptrdiff_t r = 0; r < s; ++r) line[r] = img[r * n + c];
      synthesize(f, line.data(), s, img + c, n);
    }
    for (std::ptrdiff_t r = 0; r < s; ++r) {
      synthesize(f, img + r * n, s, out.data(), 1);
      std::copy(out.begin(), out.begin() + s, img + r * n);
    }
  }
}

}  // namespace

void WaveletSpec::validate() const {
  if (levels < 1) throw InputError("wavelet: levels must be >= 1");
  if (rows < 1 || cols < 1) throw InputError("wavelet: empty signal shape");
  if (rows > 1 && rows != cols) throw InputError("wavelet: 2-D layout must be square");
  if (levels > 30) throw InputError("wavelet: too many levels");
  const Eigen::Index block = Eigen::Index{1} << levels;
  if (cols % block != 0 || (rows > 1 && rows % block != 0)) {
    std::ostringstream os;
    os << "wavelet: side " << cols << " is not divisible by 2^" << levels;
    throw InputError(os.str());
  }
}

std::vector<double> scaling_filter(WaveletFamily family) {
  switch (family) {
    case WaveletFamily::Haar: {
      const double h = 1.0 / std::sqrt(2.0);
      return {h, h};
    }
    case WaveletFamily::Daubechies4: {
      const double s3 = std::sqrt(3.0);
      const double d = 4.0 * std::sqrt(2.0);
      return {(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d};
    }
  }
  throw InputError("wavelet: unknown family");
}

Vector dwt_forward(const WaveletSpec& spec, const Vector& x) {
  spec.validate();
  if (x.size() != spec.size()) throw InputError("dwt_forward: length does not match spec");
  const Filters f = make_filters(spec.family);
  Vector w = x;
  if (spec.is_2d()) {
    forward_2d(f, spec.levels, w.data(), spec.cols);
  } else {
    forward_1d(f, spec.levels, w.data(), spec.cols);
  }
  return w;
}

Vector dwt_inverse(const WaveletSpec& spec, const Vector& w) {
  spec.validate();
  if (w.size() != spec.size()) throw InputError("dwt_inverse: length does not match spec");
  const Filters f = make_filters(spec.family);
  Vector x = w;
  if (spec.is_2d()) {
    inverse_2d(f, spec.levels, x.data(), spec.cols);
  } else {
    inverse_1d(f, spec.levels, x.data(), spec.cols);
  }
  return x;
}

WaveletOperator::WaveletOperator(WaveletSpec spec) : spec_(spec) { spec_.validate(); }

void WaveletOperator::forward(const Vector& coeffs, Vector& out) const {
  out = dwt_inverse(spec_, coeffs);
}

void WaveletOperator::adjoint(const Vector& signal, Vector& out) const {
  out = dwt_forward(spec_, signal);
}

}  // namespace pnpg
