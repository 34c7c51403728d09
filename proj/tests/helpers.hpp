#pragma once

#include <cmath>

#include "gnlab/prng.hpp"
#include "gnlab/tensor.hpp"

namespace gnlab::test {

inline Tensor random_tensor(Shape shape, Prng& prng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * prng.normal();
  return t;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

}  // namespace gnlab::test
