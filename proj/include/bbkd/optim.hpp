#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "bbkd/autodiff.hpp"
#include "bbkd/tensor.hpp"

namespace bbkd {

using ParamMap = std::map<std::string, Tensor>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments per parameter plus the number of completed steps.
struct AdamState {
  ParamMap m;
  ParamMap v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update applied in place. Moments are created
/// lazily on the first step. Every parameter must have a gradient of the
/// same shape.
void adam_step(ParamMap& params, const GradientMap& grads, AdamState& state,
               const AdamConfig& cfg = {});

/// Central-difference gradient of a scalar function, one coordinate at a time.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& point, double eps = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
/// whose true gradient is ~0 from dominating the ratio.
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6);

}  // namespace bbkd
