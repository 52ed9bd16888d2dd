#pragma once

#include "elasto/types.hpp"

namespace elasto::init {

/// Per-line dynamic programming over integer (axial, lateral) shift states.
struct DpParams {
  int axial_search = 10;        // states span [-axial_search, +axial_search]
  int lateral_search = 2;
  double transition_weight = 0.15;  // L1 penalty per unit state change
  int patch_half_width = 2;     // similarity patch spans (2h+1)^2 samples
};

/// Windowed normalized cross-correlation with subsample refinement.
/// Windows, searches and strides are given in pre-upsampling units.
struct NccParams {
  int upsample_factor = 3;
  int window_axial = 50;        // samples; 5 wavelengths at 10 samples/cycle
  int window_lateral = 5;       // A-lines
  double overlap_fraction = 0.86;
  int search_axial = 8;
  int search_lateral = 2;
  bool subsample_fit = true;
};

/// Integer displacement seed. Each A-line is solved as a shortest path over
/// shift states with patch-SSD node costs (normalized by frame variance, so
/// transition_weight is amplitude-scale-free) and an L1 transition penalty,
/// then the per-line solutions are fused with a 3x3 median across lines.
/// Outputs are integers within the declared search ranges.
DisplacementField dp_initialize(const RfFrame& pre, const RfFrame& post,
                                const DpParams& params);

/// Block matching on cubically upsampled frames: integer NCC peak within the
/// search bounds, 1-D parabolic refinement along each axis, then bilinear
/// interpolation of the window-center estimates back to the full grid.
/// Zero-variance windows are infilled from neighboring window estimates.
DisplacementField ncc_track(const RfFrame& pre, const RfFrame& post,
                            const NccParams& params);

}  // namespace elasto::init
