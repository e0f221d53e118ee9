#pragma once

#include "pnpg/operators.hpp"

namespace pnpg {

/// Parallel-beam line projector for a grid_n x grid_n image (row-major,
/// unit pixels centred on the origin).
///
/// Views are equally spaced over [0, 180) degrees. Each view has n_radial
/// parallel rays whose detector bins of width dt = grid_n*sqrt(2)/n_radial
/// span the image diagonal. Entry (ray, pixel) is dt times the length of the
/// ray inside the pixel, so every row approximates a strip integral and the
/// per-view projection mass approximates the image mass.
std::shared_ptr<const SparseOperator> build_line_projector(int grid_n, int n_views,
                                                           int n_radial);

/// w * diag(exp(-projector*attenuation + efficiency)) * projector.
std::shared_ptr<const RowScaledOperator> build_pet_sensing(OperatorPtr projector,
                                                           const Vector& attenuation,
                                                           const Vector& efficiency,
                                                           double w);

}  // namespace pnpg
