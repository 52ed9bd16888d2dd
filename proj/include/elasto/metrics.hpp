#pragma once

#include <optional>
#include <vector>

#include "elasto/types.hpp"

namespace elasto::metrics {

/// Root-mean-square error over unmasked samples. Throws if shapes differ or
/// the mask excludes everything.
double rmse(const Eigen::Ref<const Matrix>& estimate,
            const Eigen::Ref<const Matrix>& truth,
            const BoolGrid* mask = nullptr);

/// -20*log10(rmse); +infinity when rmse is exactly zero.
double psnr_db(double rmse_value);

/// Mean over population standard deviation of one window; +infinity for a
/// constant window.
double snr(const Eigen::Ref<const Matrix>& window);

/// sqrt(2*(mb - mt)^2 / (vb + vt)) with population variances. Equal means
/// give 0; distinct means over two constant windows give +infinity.
double cnr(const Eigen::Ref<const Matrix>& background,
           const Eigen::Ref<const Matrix>& target);

/// Axis-aligned rectangle in millimetres, converted to samples through the
/// frame spacings at sweep time.
struct RegionMm {
  double top_mm = 0.0;
  double left_mm = 0.0;
  double height_mm = 0.0;
  double width_mm = 0.0;
};

struct WindowSweepSpec {
  double window_height_mm = 3.0;
  double window_width_mm = 3.0;
  RegionMm background;
  std::vector<RegionMm> targets;
  int background_window_count = 50;
};

struct SnrEntry {
  int index = 0;
  Index row0 = 0;
  Index col0 = 0;
  double value = 0.0;
};

struct CnrEntry {
  int target = 0;
  int background = 0;
  double value = 0.0;
};

struct MetricsReport {
  std::optional<double> rmse;
  std::optional<double> psnr_db;
  std::vector<SnrEntry> snr_values;   // one per background window
  std::vector<CnrEntry> cnr_values;   // one per (target, background) pair
  double snr_mean = 0.0;
  double snr_std = 0.0;
  int snr_excluded = 0;  // infinite sentinels left out of the summary
  double cnr_mean = 0.0;
  double cnr_std = 0.0;
  int cnr_excluded = 0;
};

/// Places background_window_count windows on a uniform grid over the
/// background region (row-major order) plus one centered window per target
/// region, then reports per-window SNR, per-pair CNR and summary statistics.
/// With `truth` given, global RMSE and PSNR are included.
MetricsReport sweep(const Eigen::Ref<const Matrix>& field,
                    double axial_spacing_mm, double lateral_pitch_mm,
                    const WindowSweepSpec& spec,
                    const Matrix* truth = nullptr);

}  // namespace elasto::metrics
