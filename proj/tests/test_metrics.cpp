#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "elasto/metrics.hpp"
#include "helpers.hpp"

using namespace elasto;
using namespace elasto::metrics;

TEST_CASE("rmse on a worked example") {
  Matrix est(2, 2), truth(2, 2);
  est << 0, 0, 0, 0;
  truth << 3, 4, 0, 0;
  // sqrt((9 + 16) / 4) = 2.5
  CHECK(rmse(est, truth) == doctest::Approx(2.5).epsilon(1e-15));

  BoolGrid mask = BoolGrid::Constant(2, 2, false);
  mask(0, 0) = true;
  CHECK(rmse(est, truth, &mask) == doctest::Approx(3.0).epsilon(1e-15));

  BoolGrid none = BoolGrid::Constant(2, 2, false);
  CHECK_THROWS_AS(rmse(est, truth, &none), SpecError);
  CHECK_THROWS_AS(rmse(est, Matrix::Zero(3, 2)), SpecError);
}

TEST_CASE("psnr reference value and limits") {
  // A strain RMSE of 7.35e-4 maps to 62.67 dB.
  CHECK(psnr_db(7.35e-4) == doctest::Approx(62.674253218).epsilon(1e-10));
  CHECK(std::isinf(psnr_db(0.0)));
  CHECK(psnr_db(1.0) == 0.0);
  CHECK(psnr_db(0.1) == doctest::Approx(20.0).epsilon(1e-12));
  // Monotone: smaller error, larger value.
  CHECK(psnr_db(1e-4) > psnr_db(1e-3));
  CHECK_THROWS_AS(psnr_db(-1.0), SpecError);
  CHECK_THROWS_AS(psnr_db(std::numeric_limits<double>::infinity()), SpecError);
}

TEST_CASE("snr uses the population deviation") {
  Matrix w(1, 3);
  w << 1, 2, 3;
  // mean 2, population sigma sqrt(2/3) -> snr = sqrt(6)
  CHECK(snr(w) == doctest::Approx(std::sqrt(6.0)).epsilon(1e-14));
  CHECK(std::isinf(snr(Matrix::Constant(2, 2, 5.0))));
  CHECK_THROWS_AS(snr(Matrix::Ones(1, 1)), SpecError);
}

TEST_CASE("cnr on hand-computed windows") {
  Matrix b(1, 4), t(1, 4);
  b << 5, 5, 7, 7;  // mean 6, var 1
  t << 1, 1, 3, 3;  // mean 2, var 1
  // sqrt(2 * 16 / 2) = 4
  CHECK(cnr(b, t) == doctest::Approx(4.0).epsilon(1e-14));

  CHECK(cnr(b, b) == 0.0);  // equal means dominate
  Matrix cb = Matrix::Constant(2, 2, 1.0);
  Matrix ct = Matrix::Constant(2, 2, 2.0);
  CHECK(std::isinf(cnr(cb, ct)));
  CHECK(cnr(cb, cb) == 0.0);  // the zero numerator wins over the zero denominator
  CHECK_THROWS_AS(cnr(Matrix::Ones(1, 1), t), SpecError);
}

TEST_CASE("a mean shift moves cnr but not the shifted window's relation to snr") {
  const Matrix base = testutil::random_matrix(6, 6, 21, 1.0, 2.0);
  const Matrix shifted = base.array() + 3.0;
  CHECK(cnr(base, shifted) > 0.0);
  CHECK(cnr(base, base) == 0.0);
  // SNR is not shift-invariant either, but in the opposite direction.
  CHECK(snr(shifted) > snr(base));
}

TEST_CASE("window sweep places the exact requested window counts") {
  const Index m = 120, n = 100;
  const Matrix field = testutil::random_matrix(m, n, 3, 1.0, 2.0);

  WindowSweepSpec spec;
  spec.window_height_mm = 3.0;
  spec.window_width_mm = 3.0;
  spec.background = {5.0, 5.0, 80.0, 70.0};
  spec.targets = {{10.0, 10.0, 20.0, 20.0},
                  {40.0, 30.0, 20.0, 20.0},
                  {60.0, 50.0, 20.0, 20.0}};
  spec.background_window_count = 50;

  MetricsReport r = sweep(field, 1.0, 1.0, spec);
  CHECK(r.snr_values.size() == 50);
  CHECK(r.cnr_values.size() == 150);
  CHECK_FALSE(r.rmse.has_value());

  // All windows stay inside the declared background region.
  std::set<std::pair<Index, Index>> origins;
  for (const SnrEntry& e : r.snr_values) {
    CHECK(e.row0 >= 5);
    CHECK(e.col0 >= 5);
    CHECK(e.row0 + 3 <= 85);
    CHECK(e.col0 + 3 <= 75);
    origins.insert({e.row0, e.col0});
  }
  // The grid is spread out, not stacked on one spot.
  CHECK(origins.size() == 50);

  // Every (target, background) pair appears exactly once.
  std::set<std::pair<int, int>> pairs;
  for (const CnrEntry& e : r.cnr_values) pairs.insert({e.target, e.background});
  CHECK(pairs.size() == 150);
}

TEST_CASE("sweep converts millimetres through the frame spacings") {
  const Matrix field = testutil::random_matrix(200, 60, 5, 1.0, 2.0);
  WindowSweepSpec spec;
  spec.background = {0.5, 1.0, 5.0, 8.0};
  spec.targets = {};
  spec.background_window_count = 4;
  // 0.05 mm axial spacing: a 3 mm window is 60 samples tall; 0.5 mm pitch
  // makes it 6 A-lines wide.
  MetricsReport r = sweep(field, 0.05, 0.5, spec);
  CHECK(r.snr_values.size() == 4);
  for (const SnrEntry& e : r.snr_values) {
    CHECK(e.row0 >= 10);
    CHECK(e.row0 + 60 <= 110);
    CHECK(e.col0 >= 2);
    CHECK(e.col0 + 6 <= 18);
  }
  CHECK(r.cnr_values.empty());
}

TEST_CASE("sweep summary excludes infinite sentinels and counts them") {
  Matrix field = Matrix::Constant(40, 40, 2.0);  // constant -> every SNR is inf
  WindowSweepSpec spec;
  spec.background = {0.0, 0.0, 40.0, 40.0};
  spec.background_window_count = 9;
  MetricsReport r = sweep(field, 1.0, 1.0, spec);
  CHECK(r.snr_excluded == 9);
  CHECK(r.snr_mean == 0.0);
  CHECK(r.snr_std == 0.0);
}

TEST_CASE("sweep reports rmse and psnr against supplied truth") {
  const Matrix field = Matrix::Constant(30, 30, 1.5);
  const Matrix truth = Matrix::Constant(30, 30, 1.0);
  WindowSweepSpec spec;
  spec.background = {0.0, 0.0, 30.0, 30.0};
  spec.background_window_count = 4;
  MetricsReport r = sweep(field, 1.0, 1.0, spec, &truth);
  REQUIRE(r.rmse.has_value());
  CHECK(*r.rmse == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(*r.psnr_db == doctest::Approx(-20.0 * std::log10(0.5)).epsilon(1e-12));
}

TEST_CASE("sweep rejects ill-posed regions") {
  const Matrix field = Matrix::Ones(50, 50);
  WindowSweepSpec spec;
  spec.background = {0.0, 0.0, 2.0, 50.0};  // shorter than one window
  CHECK_THROWS_AS(sweep(field, 1.0, 1.0, spec), SpecError);

  spec.background = {0.0, 0.0, 30.0, 30.0};
  spec.targets = {{40.0, 40.0, 20.0, 20.0}};  // leaves the field
  CHECK_THROWS_AS(sweep(field, 1.0, 1.0, spec), SpecError);

  spec.targets.clear();
  spec.background_window_count = 0;
  CHECK_THROWS_AS(sweep(field, 1.0, 1.0, spec), SpecError);

  WindowSweepSpec tiny;
  tiny.background = {0.0, 0.0, 30.0, 30.0};
  CHECK_THROWS_AS(sweep(field, 10.0, 1.0, tiny), SpecError);  // window < 2 rows
}
