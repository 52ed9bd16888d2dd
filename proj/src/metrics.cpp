#include "elasto/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace elasto::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // population variance
};

Moments moments(const Eigen::Ref<const Matrix>& w) {
  Moments mo;
  mo.mean = w.mean();
  mo.var = (w.array() - mo.mean).square().mean();
  return mo;
}

struct SampleRect {
  Index r0, c0, rows, cols;
};

SampleRect to_samples(const RegionMm& r, double dy, double dx, const char* what) {
  SampleRect s;
  s.r0 = static_cast<Index>(std::llround(r.top_mm / dy));
  s.c0 = static_cast<Index>(std::llround(r.left_mm / dx));
  s.rows = static_cast<Index>(std::llround(r.height_mm / dy));
  s.cols = static_cast<Index>(std::llround(r.width_mm / dx));
  if (s.rows < 1 || s.cols < 1)
    throw SpecError(std::string(what) + ": region collapses to zero samples");
  if (s.r0 < 0 || s.c0 < 0)
    throw SpecError(std::string(what) + ": region origin outside the field");
  return s;
}

void summarize(const std::vector<double>& values, double& mean, double& stdev, int& excluded) {
  double sum = 0.0;
  int count = 0;
  excluded = 0;
  for (double v : values) {
    if (std::isinf(v)) {
      ++excluded;
      continue;
    }
    sum += v;
    ++count;
  }
  if (count == 0) {
    mean = 0.0;
    stdev = 0.0;
    return;
  }
  mean = sum / count;
  double ss = 0.0;
  for (double v : values)
    if (!std::isinf(v)) ss += (v - mean) * (v - mean);
  stdev = std::sqrt(ss / count);
}

}  // namespace

double rmse(const Eigen::Ref<const Matrix>& estimate,
            const Eigen::Ref<const Matrix>& truth,
            const BoolGrid* mask) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw SpecError("rmse: shape mismatch");
  if (mask && (mask->rows() != estimate.rows() || mask->cols() != estimate.cols()))
    throw SpecError("rmse: mask shape mismatch");
  double ss = 0.0;
  Index count = 0;
  for (Index i = 0; i < estimate.rows(); ++i)
    for (Index j = 0; j < estimate.cols(); ++j) {
      if (mask && !(*mask)(i, j)) continue;
      const double d = estimate(i, j) - truth(i, j);
      ss += d * d;
      ++count;
    }
  if (count == 0) throw SpecError("rmse: mask excludes every sample");
  return std::sqrt(ss / static_cast<double>(count));
}

double psnr_db(double rmse_value) {
  if (rmse_value < 0.0 || !std::isfinite(rmse_value))
    throw SpecError("psnr_db: rmse must be finite and non-negative");
  if (rmse_value == 0.0) return kInf;
  return -20.0 * std::log10(rmse_value);
}

double snr(const Eigen::Ref<const Matrix>& window) {
  if (window.size() < 2) throw SpecError("snr: window needs at least 2 samples");
  const Moments mo = moments(window);
  if (mo.var == 0.0) return kInf;
  return mo.mean / std::sqrt(mo.var);
}

double cnr(const Eigen::Ref<const Matrix>& background,
           const Eigen::Ref<const Matrix>& target) {
  if (background.size() < 2 || target.size() < 2)
    throw SpecError("cnr: windows need at least 2 samples");
  const Moments b = moments(background);
  const Moments t = moments(target);
  const double num = 2.0 * (b.mean - t.mean) * (b.mean - t.mean);
  if (num == 0.0) return 0.0;
  const double den = b.var + t.var;
  if (den == 0.0) return kInf;
  return std::sqrt(num / den);
}

MetricsReport sweep(const Eigen::Ref<const Matrix>& field,
                    double axial_spacing_mm, double lateral_pitch_mm,
                    const WindowSweepSpec& spec,
                    const Matrix* truth) {
  if (axial_spacing_mm <= 0.0 || lateral_pitch_mm <= 0.0)
    throw SpecError("sweep: spacings must be positive");
  if (spec.background_window_count < 1)
    throw SpecError("sweep: background_window_count must be >= 1");

  const Index wr = static_cast<Index>(std::llround(spec.window_height_mm / axial_spacing_mm));
  const Index wc = static_cast<Index>(std::llround(spec.window_width_mm / lateral_pitch_mm));
  if (wr < 2 || wc < 2)
    throw SpecError("sweep: window collapses below 2x2 samples");

  auto fit_check = [&](const SampleRect& r, const char* what) {
    if (r.rows < wr || r.cols < wc)
      throw SpecError(std::string(what) + ": region too small for one window");
    if (r.r0 + r.rows > field.rows() || r.c0 + r.cols > field.cols())
      throw SpecError(std::string(what) + ": region leaves the field");
  };

  const SampleRect bg = to_samples(spec.background, axial_spacing_mm, lateral_pitch_mm,
                                   "sweep background");
  fit_check(bg, "sweep background");

  MetricsReport report;

  // Uniform row-major grid of K top-left offsets over the feasible span.
  const int K = spec.background_window_count;
  const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(K))));
  const int grid_rows = (K + grid_cols - 1) / grid_cols;
  const Index span_r = bg.rows - wr;
  const Index span_c = bg.cols - wc;
  std::vector<std::pair<Index, Index>> bg_origins;
  for (int a = 0; a < grid_rows && static_cast<int>(bg_origins.size()) < K; ++a) {
    const Index r0 = bg.r0 + (grid_rows > 1
                                  ? static_cast<Index>(std::llround(
                                        static_cast<double>(a) * span_r / (grid_rows - 1)))
                                  : span_r / 2);
    for (int b = 0; b < grid_cols && static_cast<int>(bg_origins.size()) < K; ++b) {
      const Index c0 = bg.c0 + (grid_cols > 1
                                    ? static_cast<Index>(std::llround(
                                          static_cast<double>(b) * span_c / (grid_cols - 1)))
                                    : span_c / 2);
      bg_origins.emplace_back(r0, c0);
    }
  }

  std::vector<double> snr_list;
  for (int k = 0; k < K; ++k) {
    const auto [r0, c0] = bg_origins[static_cast<std::size_t>(k)];
    const double v = snr(field.block(r0, c0, wr, wc));
    report.snr_values.push_back({k, r0, c0, v});
    snr_list.push_back(v);
  }
  summarize(snr_list, report.snr_mean, report.snr_std, report.snr_excluded);

  std::vector<double> cnr_list;
  for (std::size_t t = 0; t < spec.targets.size(); ++t) {
    const SampleRect tr = to_samples(spec.targets[t], axial_spacing_mm, lateral_pitch_mm,
                                     "sweep target");
    fit_check(tr, "sweep target");
    const Index tr0 = tr.r0 + (tr.rows - wr) / 2;
    const Index tc0 = tr.c0 + (tr.cols - wc) / 2;
    auto target_block = field.block(tr0, tc0, wr, wc);
    for (int k = 0; k < K; ++k) {
      const auto [r0, c0] = bg_origins[static_cast<std::size_t>(k)];
      const double v = cnr(field.block(r0, c0, wr, wc), target_block);
      report.cnr_values.push_back({static_cast<int>(t), k, v});
      cnr_list.push_back(v);
    }
  }
  summarize(cnr_list, report.cnr_mean, report.cnr_std, report.cnr_excluded);

  if (truth) {
    report.rmse = rmse(field, *truth);
    report.psnr_db = psnr_db(*report.rmse);
  }
  return report;
}

}  // namespace elasto::metrics
