#include "elasto/strain.hpp"

#include <algorithm>
#include <cmath>

#include "elasto/filters.hpp"

namespace elasto::strain {

namespace {

void check_window(int window, const char* name) {
  if (window < 3 || window % 2 == 0)
    throw SpecError(std::string(name) + ": window must be odd and >= 3");
}

// Slope of the best-fit line over positions [lo, hi] of one 1-D slice.
template <class Slice>
double window_slope(const Slice& s, Index lo, Index hi) {
  const double count = static_cast<double>(hi - lo + 1);
  const double kbar = 0.5 * static_cast<double>(lo + hi);
  double num = 0.0, den = 0.0, vbar = 0.0;
  for (Index k = lo; k <= hi; ++k) vbar += s(k);
  vbar /= count;
  for (Index k = lo; k <= hi; ++k) {
    const double dk = static_cast<double>(k) - kbar;
    num += dk * (s(k) - vbar);
    den += dk * dk;
  }
  return num / den;
}

void window_bounds(Index c, Index len, int half, Index& lo, Index& hi) {
  lo = std::max<Index>(0, c - half);
  hi = std::min<Index>(len - 1, c + half);
  if (hi - lo + 1 < 3) {
    hi = std::min<Index>(len - 1, lo + 2);
    lo = std::max<Index>(0, hi - 2);
  }
}

}  // namespace

Matrix ls_differentiate(const Eigen::Ref<const Matrix>& field, Axis axis, int window) {
  check_window(window, "ls_differentiate");
  const Index m = field.rows();
  const Index n = field.cols();
  const Index len = axis == Axis::axial ? m : n;
  if (len < 3)
    throw SpecError("ls_differentiate: need at least 3 samples along the fit axis");

  const int half = window / 2;
  Matrix out(m, n);
  if (axis == Axis::axial) {
    for (Index j = 0; j < n; ++j) {
      auto col = field.col(j);
      for (Index i = 0; i < m; ++i) {
        Index lo, hi;
        window_bounds(i, m, half, lo, hi);
        out(i, j) = window_slope(col, lo, hi);
      }
    }
  } else {
    for (Index i = 0; i < m; ++i) {
      auto row = field.row(i);
      for (Index j = 0; j < n; ++j) {
        Index lo, hi;
        window_bounds(j, n, half, lo, hi);
        out(i, j) = window_slope(row, lo, hi);
      }
    }
  }
  return out;
}

StrainTensorField compute_strains(const DisplacementField& displacement,
                                  const LsqParams& params) {
  validate_displacement(displacement);
  check_window(params.window_axial, "LsqParams.window_axial");
  check_window(params.window_lateral, "LsqParams.window_lateral");
  StrainTensorField out;
  out.syy = ls_differentiate(displacement.axial, Axis::axial, params.window_axial);
  out.sxx = ls_differentiate(displacement.lateral, Axis::lateral, params.window_lateral);
  return out;
}

EprField epr_map(const StrainTensorField& strains, double s_floor,
                 double nu_min, double nu_max, double default_nu,
                 bool median_smooth) {
  validate_strain(strains);
  if (s_floor <= 0.0) throw SpecError("epr_map: s_floor must be positive");
  if (nu_min > nu_max) throw SpecError("epr_map: empty clamp range");
  EprField out;
  out.nu.resize(strains.rows(), strains.cols());
  const double fallback = std::clamp(default_nu, nu_min, nu_max);
  for (Index i = 0; i < strains.rows(); ++i)
    for (Index j = 0; j < strains.cols(); ++j) {
      const double syy = strains.syy(i, j);
      out.nu(i, j) = std::fabs(syy) >= s_floor
                         ? std::clamp(-strains.sxx(i, j) / syy, nu_min, nu_max)
                         : fallback;
    }
  if (median_smooth) out.nu = median_filter(out.nu, 2);
  return out;
}

}  // namespace elasto::strain
