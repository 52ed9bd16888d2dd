#pragma once

#include <filesystem>
#include <iosfwd>

#include "elasto/config.hpp"
#include "elasto/types.hpp"

namespace elasto::render {

/// Linear scaling of field values onto [0, 255]; out-of-range values clamp.
/// Gray maps write binary PGM (P5), color maps binary PPM (P6).
void write_image(const Matrix& field, const config::RenderSpec& spec, std::ostream& out);
void save_image(const std::filesystem::path& path, const Matrix& field,
                const config::RenderSpec& spec);

/// The 8-bit intensity a value maps to under the given range.
unsigned char scale_to_byte(double value, double vmin, double vmax);

/// Colormap lookup for one 8-bit level.
void colormap_rgb(config::Colormap map, unsigned char level, unsigned char rgb[3]);

/// "render.pgm" for gray, "render.ppm" otherwise.
const char* image_extension(config::Colormap map);

}  // namespace elasto::render
