#pragma once

#include <cstddef>

namespace attribex::kernels::detail {

// Left-to-right sum. Both kernel variants use it so entries match bit for bit.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace attribex::kernels::detail
