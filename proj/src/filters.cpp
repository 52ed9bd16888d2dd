#include "elasto/filters.hpp"

#include <algorithm>
#include <vector>

namespace elasto {

Matrix median_filter(const Matrix& grid, int radius) {
  if (radius < 0) throw SpecError("median_filter: negative radius");
  if (radius == 0) return grid;
  const Index m = grid.rows();
  const Index n = grid.cols();
  Matrix out(m, n);
  std::vector<double> window;
  window.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
  for (Index i = 0; i < m; ++i) {
    const Index i0 = std::max<Index>(0, i - radius);
    const Index i1 = std::min<Index>(m - 1, i + radius);
    for (Index j = 0; j < n; ++j) {
      const Index j0 = std::max<Index>(0, j - radius);
      const Index j1 = std::min<Index>(n - 1, j + radius);
      window.clear();
      for (Index a = i0; a <= i1; ++a)
        for (Index b = j0; b <= j1; ++b) window.push_back(grid(a, b));
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
      std::nth_element(window.begin(), mid, window.end());
      out(i, j) = *mid;
    }
  }
  return out;
}

}  // namespace elasto
