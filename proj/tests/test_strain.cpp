#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "elasto/strain.hpp"
#include "helpers.hpp"

using namespace elasto;
using namespace elasto::strain;

TEST_CASE("least-squares differentiation is exact on affine fields") {
  const Index m = 12, n = 10;
  Matrix f(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) f(i, j) = 3.0 + 0.5 * i - 0.25 * j;

  for (int window : {3, 5, 9}) {
    Matrix dy = ls_differentiate(f, Axis::axial, window);
    Matrix dx = ls_differentiate(f, Axis::lateral, window);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) {
        CHECK(dy(i, j) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(dx(i, j) == doctest::Approx(-0.25).epsilon(1e-12));
      }
  }
}

TEST_CASE("a cubic ramp has the closed-form window-9 slope") {
  // Least-squares slope of k^3 over k = -4..4 is sum(k^4)/sum(k^2) = 708/60.
  const Index m = 9, n = 4;
  Matrix f(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      const double k = double(i) - 4.0;
      f(i, j) = k * k * k;
    }
  Matrix dy = ls_differentiate(f, Axis::axial, 9);
  for (Index j = 0; j < n; ++j)
    CHECK(dy(4, j) == doctest::Approx(708.0 / 60.0).epsilon(1e-12));
}

TEST_CASE("differentiation is linear in the field") {
  const Matrix f = testutil::random_matrix(10, 8, 11);
  const Matrix g = testutil::random_matrix(10, 8, 12);
  const Matrix lhs = ls_differentiate(2.0 * f + 3.0 * g, Axis::lateral, 5);
  const Matrix rhs = 2.0 * ls_differentiate(f, Axis::lateral, 5) +
                     3.0 * ls_differentiate(g, Axis::lateral, 5);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("border windows are clipped but never drop below three points") {
  // A pure quadratic: slope at i from a window [lo, hi] is 2*mean position
  // offset, so the border values expose exactly which window was used.
  const Index m = 7, n = 3;
  Matrix f(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) f(i, j) = double(i) * double(i);
  Matrix dy = ls_differentiate(f, Axis::axial, 5);
  // Row 0: window extends one-sidedly to {0, 1, 2} -> slope 2.
  CHECK(dy(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  // Row 1: window {0, 1, 2, 3} -> slope of i^2 over mean 1.5 is 3.
  CHECK(dy(1, 0) == doctest::Approx(3.0).epsilon(1e-12));
  // Row 3: full window {1..5} -> slope 6.
  CHECK(dy(3, 0) == doctest::Approx(6.0).epsilon(1e-12));
  // Last row: window {4, 5, 6} -> slope 10.
  CHECK(dy(6, 0) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("argument validation") {
  const Matrix f = Matrix::Ones(6, 6);
  CHECK_THROWS_AS(ls_differentiate(f, Axis::axial, 4), SpecError);
  CHECK_THROWS_AS(ls_differentiate(f, Axis::axial, 1), SpecError);
  CHECK_THROWS_AS(ls_differentiate(Matrix::Ones(2, 6), Axis::axial, 3), SpecError);
  CHECK_THROWS_AS(ls_differentiate(Matrix::Ones(6, 2), Axis::lateral, 3), SpecError);
}

TEST_CASE("compute_strains wires the axes correctly") {
  const Index m = 20, n = 16;
  DisplacementField d;
  d.axial.resize(m, n);
  d.lateral.resize(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) {
      d.axial(i, j) = -0.02 * i + 0.001 * j;
      d.lateral(i, j) = 0.0098 * j - 0.002 * i;
    }
  LsqParams p;
  p.window_axial = 7;
  p.window_lateral = 5;
  StrainTensorField s = compute_strains(d, p);
  CHECK(s.syy(10, 8) == doctest::Approx(-0.02).epsilon(1e-12));
  CHECK(s.sxx(10, 8) == doctest::Approx(0.0098).epsilon(1e-12));
}

TEST_CASE("epr_map guards, clamps and falls back") {
  StrainTensorField s;
  s.syy = Matrix::Constant(2, 3, -0.02);
  s.sxx = Matrix::Constant(2, 3, 0.0098);
  s.sxx(0, 1) = 0.02;    // ratio 1.0 -> clamped to nu_max
  s.sxx(0, 2) = -0.004;  // ratio -0.2 -> clamped to nu_min
  s.syy(1, 0) = 0.0;     // guard -> default
  EprField nu = epr_map(s, 1e-5, 0.0, 0.5, 0.3);
  CHECK(nu.nu(0, 0) == doctest::Approx(0.49).epsilon(1e-12));
  CHECK(nu.nu(0, 1) == 0.5);
  CHECK(nu.nu(0, 2) == 0.0);
  CHECK(nu.nu(1, 0) == 0.3);
}

TEST_CASE("epr_map validates its configuration") {
  StrainTensorField s{Matrix::Constant(2, 2, -0.02), Matrix::Constant(2, 2, 0.01)};
  CHECK_THROWS_AS(epr_map(s, 0.0, 0.0, 0.5, 0.3), SpecError);
  CHECK_THROWS_AS(epr_map(s, 1e-5, 0.5, 0.0, 0.3), SpecError);
  // default_nu outside the clamp range is pulled inside it.
  EprField nu = epr_map(StrainTensorField{Matrix::Zero(2, 2), Matrix::Zero(2, 2)},
                        1e-5, 0.0, 0.5, 0.9);
  CHECK(nu.nu(0, 0) == 0.5);
}
