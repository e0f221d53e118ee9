#include "pnpg/projector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace pnpg {

std::shared_ptr<const SparseOperator> build_line_projector(int grid_n, int n_views,
                                                           int n_radial) {
  if (grid_n < 1 || n_views < 1 || n_radial < 1) {
    throw InputError("build_line_projector: grid_n, n_views, n_radial must be >= 1");
  }
  const double n = grid_n;
  const double half = 0.5 * n;
  const double dt = n * std::numbers::sqrt2 / n_radial;
  const double eps = 1e-12;

  std::vector<Eigen::Triplet<double>> entries;
  std::vector<double> params;
  params.reserve(static_cast<std::size_t>(2 * grid_n + 4));

  for (int v = 0; v < n_views; ++v) {
    const double theta = std::numbers::pi * v / n_views;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (int r = 0; r < n_radial; ++r) {
      const int row = v * n_radial + r;
      const double t = (r - 0.5 * (n_radial - 1)) * dt;
      // Ray: (t c - u s, t s + u c) for u in R.
      const double x0 = t * c;
      const double y0 = t * s;
      params.clear();
      if (std::abs(s) > eps) {
        for (int i = 0; i <= grid_n; ++i) params.push_back((x0 - (-half + i)) / s);
      }
      if (std::abs(c) > eps) {
        for (int j = 0; j <= grid_n; ++j) params.push_back(((-half + j) - y0) / c);
      }
      std::sort(params.begin(), params.end());
      for (std::size_t k = 1; k < params.size(); ++k) {
        const double len = params[k] - params[k - 1];
        if (len <= eps) continue;
        const double um = 0.5 * (params[k] + params[k - 1]);
        const double xm = x0 - um * s;
        const double ym = y0 + um * c;
        if (xm <= -half || xm >= half || ym <= -half || ym >= half) continue;
        const int col = std::clamp(static_cast<int>(std::floor(xm + half)), 0, grid_n - 1);
        const int lin = std::clamp(static_cast<int>(std::floor(ym + half)), 0, grid_n - 1);
        entries.emplace_back(row, lin * grid_n + col, dt * len);
      }
    }
  }

  SparseMatrix m(static_cast<Eigen::Index>(n_views) * n_radial,
                 static_cast<Eigen::Index>(grid_n) * grid_n);
  m.setFromTriplets(entries.begin(), entries.end());
  return std::make_shared<const SparseOperator>(std::move(m));
}

std::shared_ptr<const RowScaledOperator> build_pet_sensing(OperatorPtr projector,
                                                           const Vector& attenuation,
                                                           const Vector& efficiency,
                                                           double w) {
  if (!projector) throw InputError("build_pet_sensing: null projector");
  if (!(w > 0.0) || !std::isfinite(w)) throw InputError("build_pet_sensing: w must be > 0");
  if (attenuation.size() != projector->cols()) {
    throw InputError("build_pet_sensing: attenuation length must equal projector cols");
  }
  if (efficiency.size() != projector->rows()) {
    throw InputError("build_pet_sensing: efficiency length must equal projector rows");
  }
  Vector line_atten(projector->rows());
  projector->forward(attenuation, line_atten);
  Vector scale = w * (efficiency - line_atten).array().exp().matrix();
  return std::make_shared<const RowScaledOperator>(std::move(projector), std::move(scale));
}

}  // namespace pnpg
