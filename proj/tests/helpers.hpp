#pragma once

#include <random>

#include "elasto/types.hpp"

namespace testutil {

inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline elasto::Matrix random_matrix(elasto::Index m, elasto::Index n,
                                    std::uint64_t seed, double lo = -1.0,
                                    double hi = 1.0) {
  std::mt19937_64 gen(seed);
  elasto::Matrix out(m, n);
  for (elasto::Index i = 0; i < m; ++i)
    for (elasto::Index j = 0; j < n; ++j)
      out(i, j) = lo + (hi - lo) * uniform01(gen);
  return out;
}

// Random field smoothed with a separable box filter, handy when a test needs
// something differentiable rather than white noise.
inline elasto::Matrix smooth_random_matrix(elasto::Index m, elasto::Index n,
                                           std::uint64_t seed, double amplitude,
                                           int passes = 3) {
  elasto::Matrix f = random_matrix(m, n, seed, -1.0, 1.0);
  for (int p = 0; p < passes; ++p) {
    elasto::Matrix g = f;
    for (elasto::Index i = 0; i < m; ++i)
      for (elasto::Index j = 0; j < n; ++j) {
        double sum = 0.0;
        int count = 0;
        for (elasto::Index a = std::max<elasto::Index>(0, i - 1);
             a <= std::min(m - 1, i + 1); ++a)
          for (elasto::Index b = std::max<elasto::Index>(0, j - 1);
               b <= std::min(n - 1, j + 1); ++b) {
            sum += g(a, b);
            ++count;
          }
        f(i, j) = sum / count;
      }
  }
  const double peak = f.cwiseAbs().maxCoeff();
  if (peak > 0.0) f *= amplitude / peak;
  return f;
}

inline elasto::RfFrame frame_of(const elasto::Matrix& samples) {
  elasto::RfFrame f;
  f.samples = samples;
  return f;
}

}  // namespace testutil
