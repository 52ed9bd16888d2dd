#include "elasto/interp.hpp"

namespace elasto {

namespace {

// One-dimensional pass along rows: output has (rows-1)*f+1 rows.
Matrix upsample_rows(const Matrix& img, int factor) {
  const Index m = img.rows();
  const Index n = img.cols();
  const Index out_m = (m - 1) * factor + 1;
  Matrix out(out_m, n);
  for (Index oi = 0; oi < out_m; ++oi) {
    const Index base = oi / factor;
    const int sub = static_cast<int>(oi % factor);
    if (sub == 0) {
      out.row(oi) = img.row(base);
      continue;
    }
    const CubicWeights w = cubic_weights(static_cast<double>(sub) / factor);
    Index r[4];
    for (int k = 0; k < 4; ++k) r[k] = detail::clamp_index(base - 1 + k, m);
    out.row(oi) = w.w[0] * img.row(r[0]) + w.w[1] * img.row(r[1]) +
                  w.w[2] * img.row(r[2]) + w.w[3] * img.row(r[3]);
  }
  return out;
}

}  // namespace

Matrix upsample_cubic(const Matrix& img, int factor) {
  if (factor < 1) throw SpecError("upsample_cubic: factor must be >= 1");
  if (img.rows() < 2 || img.cols() < 2)
    throw SpecError("upsample_cubic: need at least a 2x2 grid");
  if (factor == 1) return img;
  Matrix tmp = upsample_rows(img, factor);
  return upsample_rows(tmp.transpose(), factor).transpose();
}

}  // namespace elasto
