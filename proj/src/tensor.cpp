#include "ecgx/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace ecgx {

bool Tensor3::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace ecgx
