#pragma once

#include "genpred/numerics.hpp"

namespace genpred {

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;  // target coverage 1 - alpha

  double width() const noexcept { return upper - lower; }
  bool contains(double y) const noexcept { return lower <= y && y <= upper; }
};

}  // namespace genpred
