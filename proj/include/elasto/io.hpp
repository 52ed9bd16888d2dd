#pragma once

#include <filesystem>
#include <iosfwd>

#include "elasto/types.hpp"

namespace elasto::io {

// Binary field containers. All four kinds share one layout:
//
//   offset 0   4-byte ASCII tag ("EFR1", "EDF1", "ESF1" or "EPF1")
//   offset 4   rows, unsigned 32-bit little-endian
//   offset 8   cols, unsigned 32-bit little-endian
//   offset 12  reserved, must be zero
//   offset 16  one payload per matrix: rows*cols IEEE-754 binary32
//              little-endian values in row-major order
//
// EFR1 holds one payload (RF samples), EDF1 two (axial then lateral),
// ESF1 two (s_yy then s_xx), EPF1 one (nu). Values are stored as 32-bit
// floats; keep data in that range if bit-exact round-trips matter.
// Acquisition geometry travels in a sidecar text file of `key = value`
// lines, not in the binary payload.

void write_frame(const RfFrame& frame, std::ostream& out);
RfFrame read_frame(std::istream& in);

void write_displacement(const DisplacementField& field, std::ostream& out);
DisplacementField read_displacement(std::istream& in);

void write_strain(const StrainTensorField& field, std::ostream& out);
StrainTensorField read_strain(std::istream& in);

void write_epr(const EprField& field, std::ostream& out);
/// With `validate` set, values outside [nu_min, nu_max] raise SpecError.
EprField read_epr(std::istream& in, bool validate = false,
                  double nu_min = 0.0, double nu_max = 0.5);

/// Sidecar metadata: spacings and frequencies as `key = value` lines.
void write_meta(const RfFrame& frame, std::ostream& out);
void apply_meta(RfFrame& frame, std::istream& in);

/// Path-level helpers. save_frame writes the binary payload at `path` and a
/// sidecar next to it with the extension replaced by ".meta"; load_frame
/// applies the sidecar when present.
void save_frame(const std::filesystem::path& path, const RfFrame& frame);
RfFrame load_frame(const std::filesystem::path& path);

void save_displacement(const std::filesystem::path& path, const DisplacementField& field);
DisplacementField load_displacement(const std::filesystem::path& path);

void save_strain(const std::filesystem::path& path, const StrainTensorField& field);
StrainTensorField load_strain(const std::filesystem::path& path);

void save_epr(const std::filesystem::path& path, const EprField& field);
EprField load_epr(const std::filesystem::path& path);

}  // namespace elasto::io
