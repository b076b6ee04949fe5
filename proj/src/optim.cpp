#include "bbkd/optim.hpp"

#include <algorithm>
#include <cmath>

#include "bbkd/error.hpp"

namespace bbkd {

void adam_step(ParamMap& params, const GradientMap& grads, AdamState& state,
               const AdamConfig& cfg) {
  require(cfg.lr > 0.0, ErrorKind::InvalidArgument, "adam: learning rate must be positive");
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    require(it != grads.end(), ErrorKind::ShapeMismatch, "adam: no gradient for '" + name + "'");
    require_same_shape(p, it->second, name.c_str());
    auto m = state.m.find(name);
    if (m != state.m.end()) require_same_shape(p, m->second, name.c_str());
  }

  const std::uint64_t step = state.step + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.try_emplace(name, p.shape()).first->second;
    Tensor& v = state.v.try_emplace(name, p.shape()).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p.check_finite(name.c_str());
  }
  state.step = step;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& point, double eps) {
  require(eps > 0.0, ErrorKind::InvalidArgument, "finite_difference_gradient: eps must be > 0");
  Tensor grad(point.shape());
  Tensor x = point;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f(x);
    x[i] = orig - eps;
    const double fm = f(x);
    x[i] = orig;
    require(std::isfinite(fp) && std::isfinite(fm), ErrorKind::NonFinite,
            "finite_difference_gradient: non-finite function value at coordinate " +
                std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
  require_same_shape(a, b, "max_relative_error");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace bbkd
