#pragma once

#include <cstdint>
#include <optional>

#include "elasto/types.hpp"

namespace elasto::phantom {

/// Separable point-spread function: modulated Gaussian axially, plain
/// Gaussian laterally. Units are samples / A-line pitches.
struct PulseSpec {
  double wavelength = 10.0;     // axial oscillation period, >= 2 samples
  double sigma_axial = 6.0;     // axial Gaussian width
  double sigma_lateral = 1.2;   // lateral Gaussian width
};

struct PhantomSpec {
  Index rows = 256;
  Index cols = 128;
  double scatterer_density = 0.9;  // expected scatterers per sample cell
  PulseSpec pulse;
  std::uint64_t rng_seed = 0x5eed;
  std::optional<double> noise_snr_db;  // additive white noise, off when unset

  // Frames are rescaled to this RMS amplitude so the default solver weights
  // operate at a consistent data-term scale.
  double amplitude_rms = 4.0;

  // Acquisition geometry copied into the generated frame.
  double axial_spacing_mm = 0.0385;
  double lateral_pitch_mm = 0.2;
  double center_frequency_mhz = 5.0;
  double sampling_frequency_mhz = 50.0;
};

enum class DeformationKind {
  uniform_compression,
  inclusion,
  different_pr,
  lateral_boundary,
};

struct InclusionSpec {
  double center_row = 0.0;
  double center_col = 0.0;
  double radius = 0.0;
  double transition_width = 8.0;  // raised-cosine blend width, samples
  double contrast = 2.0;          // background/inclusion axial strain ratio
  double nu = 0.25;               // inclusion Poisson's ratio (different_pr)
};

struct DeformationSpec {
  DeformationKind kind = DeformationKind::uniform_compression;
  double applied_strain = 0.02;   // magnitude of the axial compression
  double background_nu = 0.49;
  InclusionSpec inclusion;
  double taper_width = 0.0;       // lateral_boundary; 0 selects cols/4
};

struct GroundTruth {
  DisplacementField displacement;
  StrainTensorField strain;
  EprField epr;
};

struct WarpResult {
  RfFrame frame;
  BoolGrid valid;  // false where the source coordinate left the pre frame
};

/// Sums randomly placed scatterers convolved with the pulse PSF. The frame
/// is zero-mean, scaled to spec.amplitude_rms, and fully determined by
/// rng_seed. White Gaussian noise is added when noise_snr_db is set.
RfFrame generate_speckle(const PhantomSpec& spec);

/// Closed-form displacement, strain and EPR fields for the requested
/// deformation. Displacements integrate the strain profiles exactly from the
/// fixed top row (axial) and the lateral centerline, so s_yy and s_xx are
/// consistent derivatives of the returned displacement.
GroundTruth analytic_displacement(const DeformationSpec& spec, Index rows, Index cols);

/// Builds the post frame I2 with I2(i + a, j + l) = I1(i, j) by fixed-point
/// inversion of the forward map (default 5 iterations). Throws
/// NumericalError if the inversion still moves by > 0.5 samples afterwards.
WarpResult warp_frame(const RfFrame& pre, const DisplacementField& truth,
                      int fixed_point_iters = 5);

/// Additive white Gaussian noise at the given SNR relative to frame power.
RfFrame add_noise(const RfFrame& frame, double snr_db, std::uint64_t seed);

}  // namespace elasto::phantom
