#pragma once

#include <cstdint>

namespace motionseg {

struct GradcheckReport {
  double wbce = 0.0;
  double fg_bg = 0.0;
  double mlp = 0.0;
  int instances = 0;
};

// Central differences with step h on random small problems; each entry is
// the max over instances and coordinates of |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-6).
GradcheckReport run_gradcheck(int instances, std::uint64_t seed, double h = 1e-5);

}  // namespace motionseg
