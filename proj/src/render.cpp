#include "elasto/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <vector>

namespace elasto::render {

namespace {

// Eight viridis anchors, linearly interpolated between them.
constexpr unsigned char kViridis[8][3] = {
    {68, 1, 84},    {70, 50, 127},  {54, 92, 141},  {39, 127, 142},
    {31, 161, 135}, {74, 194, 109}, {159, 218, 58}, {253, 231, 37}};

unsigned char lerp_channel(unsigned char a, unsigned char b, double t) {
  return static_cast<unsigned char>(std::lround(a + (b - a) * t));
}

}  // namespace

unsigned char scale_to_byte(double value, double vmin, double vmax) {
  const double t = (value - vmin) / (vmax - vmin);
  const double clamped = std::clamp(t, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

void colormap_rgb(config::Colormap map, unsigned char level, unsigned char rgb[3]) {
  const double t = level / 255.0;
  switch (map) {
    case config::Colormap::gray:
      rgb[0] = rgb[1] = rgb[2] = level;
      return;
    case config::Colormap::viridis: {
      const double pos = t * 7.0;
      const int k = std::min(6, static_cast<int>(pos));
      const double f = pos - k;
      for (int c = 0; c < 3; ++c)
        rgb[c] = lerp_channel(kViridis[k][c], kViridis[k + 1][c], f);
      return;
    }
    case config::Colormap::jet: {
      auto channel = [](double v) {
        return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      };
      rgb[0] = channel(1.5 - std::fabs(4.0 * t - 3.0));
      rgb[1] = channel(1.5 - std::fabs(4.0 * t - 2.0));
      rgb[2] = channel(1.5 - std::fabs(4.0 * t - 1.0));
      return;
    }
  }
}

void write_image(const Matrix& field, const config::RenderSpec& spec, std::ostream& out) {
  validate_grid(field, "render field");
  if (!(spec.vmin < spec.vmax))
    throw SpecError("render: vmin must be smaller than vmax");

  const Index h = field.rows();
  const Index w = field.cols();
  const bool gray = spec.colormap == config::Colormap::gray;

  out << (gray ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * (gray ? 1 : 3));
  for (Index i = 0; i < h; ++i) {
    std::size_t k = 0;
    for (Index j = 0; j < w; ++j) {
      const unsigned char level = scale_to_byte(field(i, j), spec.vmin, spec.vmax);
      if (gray) {
        row[k++] = level;
      } else {
        unsigned char rgb[3];
        colormap_rgb(spec.colormap, level, rgb);
        row[k++] = rgb[0];
        row[k++] = rgb[1];
        row[k++] = rgb[2];
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("render: stream failure");
}

void save_image(const std::filesystem::path& path, const Matrix& field,
                const config::RenderSpec& spec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("render: cannot open " + path.string());
  write_image(field, spec, out);
}

const char* image_extension(config::Colormap map) {
  return map == config::Colormap::gray ? ".pgm" : ".ppm";
}

}  // namespace elasto::render
