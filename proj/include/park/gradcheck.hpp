#pragma once

#include <functional>
#include <span>

#include "park/tensor.hpp"

namespace park {

// Central-difference verification of reverse-mode gradients.
//
// `f` must rebuild its graph from the given leaf parameters on every call and
// return a scalar loss. Each selected coordinate is perturbed by +/-step and
// the central difference is compared against the analytic gradient; the
// returned figure is max over coordinates of
//   |analytic - numeric| / max(1, |analytic|).
//
// When the total parameter count exceeds `sample_threshold`, at most
// `max_coords` coordinates are checked per tensor, chosen by a seeded draw.
struct FiniteDiffOptions {
  double step = 1e-5;
  int64_t sample_threshold = 10000;
  int max_coords = 64;
  uint64_t seed = 0;
};

double finite_diff_check(const std::function<Tensor()>& f,
                         std::span<Tensor> params,
                         const FiniteDiffOptions& opt = {});

}  // namespace park
