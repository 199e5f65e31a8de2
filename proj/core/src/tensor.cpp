#include "mulr/tensor.hpp"

#include <cmath>

namespace mulr {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace mulr
