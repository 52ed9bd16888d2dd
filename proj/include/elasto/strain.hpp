#pragma once

#include "elasto/types.hpp"

namespace elasto::strain {

/// Windowed least-squares differentiation lengths, in samples. Both must be
/// odd and >= 3. The long defaults suit displayed strain maps; the tracking
/// solvers use shorter windows internally (see SolverParams).
struct LsqParams {
  int window_axial = 43;
  int window_lateral = 9;
};

enum class Axis { axial, lateral };

/// Ordinary least-squares slope of the field over a centered window along
/// `axis`. Windows are clipped at the borders and extended one-sidedly so a
/// fit never uses fewer than 3 points. Exact on affine inputs and linear in
/// the field.
Matrix ls_differentiate(const Eigen::Ref<const Matrix>& field, Axis axis, int window);

/// s_yy from the axial component along rows, s_xx from the lateral component
/// along columns.
StrainTensorField compute_strains(const DisplacementField& displacement,
                                  const LsqParams& params);

/// Pointwise -s_xx / s_yy with a divide guard: below `s_floor` the output
/// falls back to `default_nu`. Values are clamped to [nu_min, nu_max];
/// median smoothing (5x5) is off by default here, unlike the solver-side
/// update.
EprField epr_map(const StrainTensorField& strains, double s_floor,
                 double nu_min, double nu_max, double default_nu,
                 bool median_smooth = false);

}  // namespace elasto::strain
