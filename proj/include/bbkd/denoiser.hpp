#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bbkd/autodiff.hpp"
#include "bbkd/optim.hpp"
#include "bbkd/tensor.hpp"

namespace bbkd {

struct DenoiserConfig {
  int base_channels = 32;
  int num_blocks = 4;
  int time_embed_dim = 32;
  int image_channels = 1;

  void validate() const;
};

/// Named network weights. Keys are stable across runs so checkpoints and
/// optimizer state can be matched by name.
using DenoiserParams = ParamMap;

/// Parameter names and shapes in initialization order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const DenoiserConfig& config);

DenoiserParams init_params(const DenoiserConfig& config, std::uint64_t seed);

/// Recovers the architecture from parameter shapes (used after loading a
/// checkpoint).
DenoiserConfig infer_config(const DenoiserParams& params);

std::size_t parameter_count(const DenoiserParams& params);

/// Sinusoidal embedding [sin(t w_0), cos(t w_0), sin(t w_1), ...] with
/// w_i = 10000^(-2i/dim).
std::vector<double> time_embedding(int t, int dim);

/// Parameter leaves registered on one graph, keyed by name.
struct DenoiserVars {
  DenoiserConfig config;
  std::map<std::string, Var> vars;

  Var operator[](const std::string& name) const;
};

/// Registers every parameter on `graph` so that several forward passes
/// (one per batch element) share and accumulate into the same gradients.
DenoiserVars register_params(Graph& graph, const DenoiserParams& params);

/// Records the network on the graph and returns the output node.
Var predict_x0(Graph& graph, const DenoiserVars& params, Var p_t, int t);

/// Inference-only forward pass (no tape).
Tensor predict_x0(const DenoiserParams& params, const Tensor& p_t, int t);

}  // namespace bbkd
