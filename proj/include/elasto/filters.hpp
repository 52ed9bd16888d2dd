#pragma once

#include "elasto/types.hpp"

namespace elasto {

/// Median filter with a (2*radius+1)^2 neighborhood. The window is clipped
/// at the grid borders; on even counts the upper median is taken, so output
/// values are always drawn from the input.
Matrix median_filter(const Matrix& grid, int radius);

}  // namespace elasto
