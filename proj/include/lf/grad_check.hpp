#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lf/tensor.hpp"

namespace lf {

// Central-difference gradient verification, double precision only.
// loss_fn must recompute the forward pass from the current parameter values;
// parameters are mutated in place during probing and restored afterwards.
// Returns max over sampled coordinates of
//   |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<Tensor<double>()>& loss_fn,
                  const std::vector<Tensor<double>>& params, double eps = 1e-5,
                  std::size_t samples_per_param = 32, std::uint64_t seed = 0);

}  // namespace lf
