#pragma once

#include <cmath>

#include "elasto/types.hpp"

namespace elasto {

// Catmull-Rom cubic interpolation on a regular grid. The kernel is C1, so
// sampled values have continuous analytic derivatives, which the tracking
// solvers rely on. Taps outside the grid are clamped to the edge sample.

struct CubicWeights {
  double w[4];
  double dw[4];
};

inline CubicWeights cubic_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  CubicWeights cw;
  cw.w[0] = 0.5 * (-t + 2.0 * t2 - t3);
  cw.w[1] = 0.5 * (2.0 - 5.0 * t2 + 3.0 * t3);
  cw.w[2] = 0.5 * (t + 4.0 * t2 - 3.0 * t3);
  cw.w[3] = 0.5 * (-t2 + t3);
  cw.dw[0] = 0.5 * (-1.0 + 4.0 * t - 3.0 * t2);
  cw.dw[1] = 0.5 * (-10.0 * t + 9.0 * t2);
  cw.dw[2] = 0.5 * (1.0 + 8.0 * t - 9.0 * t2);
  cw.dw[3] = 0.5 * (-2.0 * t + 3.0 * t2);
  return cw;
}

struct CubicSample {
  double value = 0.0;
  double dy = 0.0;  // derivative along rows (axial), per sample
  double dx = 0.0;  // derivative along cols (lateral), per pitch unit
  bool inside = false;
};

namespace detail {

inline Index clamp_index(Index i, Index n) {
  return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

}  // namespace detail

/// Value and both partial derivatives of the interpolant at (y, x), where y
/// is the fractional row and x the fractional column. `inside` is false when
/// the point lies outside [0, rows-1] x [0, cols-1]; the value is still
/// evaluated with edge-clamped taps.
template <class Derived>
CubicSample sample_cubic(const Eigen::MatrixBase<Derived>& img, double y, double x) {
  const Index m = img.rows();
  const Index n = img.cols();
  CubicSample s;
  s.inside = (y >= 0.0 && y <= static_cast<double>(m - 1) &&
              x >= 0.0 && x <= static_cast<double>(n - 1));

  const double fy = std::floor(y);
  const double fx = std::floor(x);
  const Index iy = static_cast<Index>(fy);
  const Index ix = static_cast<Index>(fx);
  const CubicWeights wy = cubic_weights(y - fy);
  const CubicWeights wx = cubic_weights(x - fx);

  Index rows[4], cols[4];
  for (int k = 0; k < 4; ++k) {
    rows[k] = detail::clamp_index(iy - 1 + k, m);
    cols[k] = detail::clamp_index(ix - 1 + k, n);
  }

  for (int a = 0; a < 4; ++a) {
    double row_v = 0.0, row_dx = 0.0;
    for (int b = 0; b < 4; ++b) {
      const double p = img(rows[a], cols[b]);
      row_v += wx.w[b] * p;
      row_dx += wx.dw[b] * p;
    }
    s.value += wy.w[a] * row_v;
    s.dy += wy.dw[a] * row_v;
    s.dx += wy.w[a] * row_dx;
  }
  return s;
}

template <class Derived>
double sample_cubic_value(const Eigen::MatrixBase<Derived>& img, double y, double x) {
  return sample_cubic(img, y, x).value;
}

/// Separable cubic upsampling by an integer factor. Output point (i, j) maps
/// to source coordinate (i/f, j/f); the result has (rows-1)*f+1 by
/// (cols-1)*f+1 samples so the source corners are reproduced exactly.
Matrix upsample_cubic(const Matrix& img, int factor);

}  // namespace elasto
