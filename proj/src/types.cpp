#include "elasto/types.hpp"

namespace elasto {

void validate_grid(const Matrix& grid, const std::string& name) {
  if (grid.rows() < 1 || grid.cols() < 1)
    throw SpecError(name + ": empty grid");
  if (!grid.allFinite())
    throw SpecError(name + ": non-finite values");
}

void validate_frame(const RfFrame& frame, bool solver_entry) {
  validate_grid(frame.samples, "RfFrame.samples");
  if (frame.axial_spacing_mm <= 0.0 || frame.lateral_pitch_mm <= 0.0)
    throw SpecError("RfFrame: spacings must be positive");
  if (frame.center_frequency_mhz <= 0.0 || frame.sampling_frequency_mhz <= 0.0)
    throw SpecError("RfFrame: frequencies must be positive");
  if (solver_entry && (frame.rows() < 8 || frame.cols() < 8))
    throw SpecError("RfFrame: tracking requires at least an 8x8 grid");
}

void validate_displacement(const DisplacementField& field) {
  validate_grid(field.axial, "DisplacementField.axial");
  validate_grid(field.lateral, "DisplacementField.lateral");
  if (field.axial.rows() != field.lateral.rows() ||
      field.axial.cols() != field.lateral.cols())
    throw SpecError("DisplacementField: component shapes differ");
}

void validate_strain(const StrainTensorField& field) {
  validate_grid(field.syy, "StrainTensorField.syy");
  validate_grid(field.sxx, "StrainTensorField.sxx");
  if (field.syy.rows() != field.sxx.rows() ||
      field.syy.cols() != field.sxx.cols())
    throw SpecError("StrainTensorField: component shapes differ");
}

void validate_epr(const EprField& field, double nu_min, double nu_max) {
  validate_grid(field.nu, "EprField.nu");
  if ((field.nu.array() < nu_min).any() || (field.nu.array() > nu_max).any())
    throw SpecError("EprField: values outside clamp range");
}

}  // namespace elasto
