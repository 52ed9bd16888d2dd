#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace elasto {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Row index i runs over axial samples (depth), column index j over A-lines
// (lateral position). All displacement values are expressed in sample units
// axially and in A-line pitch units laterally. A positive axial displacement
// moves a sample toward larger i in the post frame.

struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One RF frame plus the acquisition geometry needed to convert between
/// sample indices and physical millimetres.
struct RfFrame {
  Matrix samples;
  double axial_spacing_mm = 1.0;
  double lateral_pitch_mm = 1.0;
  double center_frequency_mhz = 5.0;
  double sampling_frequency_mhz = 50.0;

  Index rows() const { return samples.rows(); }
  Index cols() const { return samples.cols(); }
};

/// Dense displacement estimate: axial in samples, lateral in pitch units.
struct DisplacementField {
  Matrix axial;
  Matrix lateral;

  Index rows() const { return axial.rows(); }
  Index cols() const { return axial.cols(); }
};

/// Axial (s_yy) and lateral (s_xx) normal strain components.
struct StrainTensorField {
  Matrix syy;
  Matrix sxx;

  Index rows() const { return syy.rows(); }
  Index cols() const { return syy.cols(); }
};

/// Effective Poisson's ratio map, clamped to a physical range on update.
struct EprField {
  Matrix nu;

  Index rows() const { return nu.rows(); }
  Index cols() const { return nu.cols(); }
};

/// Throws SpecError unless the frame has positive shape, finite samples and
/// positive geometry values. With `solver_entry` set, also enforces the
/// minimum grid size the tracking solvers require.
void validate_frame(const RfFrame& frame, bool solver_entry = false);

/// Shape/finite checks for field types. `name` appears in error messages.
void validate_grid(const Matrix& grid, const std::string& name);
void validate_displacement(const DisplacementField& field);
void validate_strain(const StrainTensorField& field);
void validate_epr(const EprField& field, double nu_min = 0.0, double nu_max = 0.5);

}  // namespace elasto
