#include "bbkd/denoiser.hpp"

#include <cmath>
#include <string>

#include "bbkd/error.hpp"
#include "bbkd/rng.hpp"

namespace bbkd {

namespace {

std::string block_key(int i, const char* leaf) {
  return "blocks." + std::to_string(i) + "." + leaf;
}

Tensor kaiming(Rng& rng, Shape shape) {
  const std::size_t fan_in = shape[1] * shape[2] * shape[3];
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = sd * rng.normal();
  return t;
}

const Tensor& get(const DenoiserParams& params, const std::string& name) {
  auto it = params.find(name);
  require(it != params.end(), ErrorKind::ShapeMismatch, "denoiser: missing parameter '" + name + "'");
  return it->second;
}

}  // namespace

void DenoiserConfig::validate() const {
  require(base_channels >= 1, ErrorKind::Config, "base_channels must be >= 1");
  require(num_blocks >= 1, ErrorKind::Config, "num_blocks must be >= 1");
  require(time_embed_dim >= 2 && time_embed_dim % 2 == 0, ErrorKind::Config,
          "time_embed_dim must be a positive even integer");
  require(image_channels >= 1, ErrorKind::Config, "image_channels must be >= 1");
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const DenoiserConfig& config) {
  config.validate();
  const std::size_t c = config.base_channels, ic = config.image_channels,
                    e = config.time_embed_dim;
  std::vector<std::pair<std::string, Shape>> layout;
  layout.emplace_back("in_conv.weight", Shape{c, ic, 3, 3});
  layout.emplace_back("in_conv.bias", Shape{c});
  for (int i = 0; i < config.num_blocks; ++i) {
    layout.emplace_back(block_key(i, "conv1.weight"), Shape{c, c, 3, 3});
    layout.emplace_back(block_key(i, "conv1.bias"), Shape{c});
    layout.emplace_back(block_key(i, "time.weight"), Shape{c, e, 1, 1});
    layout.emplace_back(block_key(i, "time.bias"), Shape{c});
    layout.emplace_back(block_key(i, "conv2.weight"), Shape{c, c, 3, 3});
    layout.emplace_back(block_key(i, "conv2.bias"), Shape{c});
  }
  layout.emplace_back("out_conv.weight", Shape{ic, c, 3, 3});
  layout.emplace_back("out_conv.bias", Shape{ic});
  return layout;
}

DenoiserParams init_params(const DenoiserConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  DenoiserParams p;
  for (auto& [name, shape] : parameter_layout(config)) {
    // Zero biases and a zero output layer: a fresh network is exactly the
    // identity map.
    const bool zero = shape.size() == 1 || name.starts_with("out_conv.");
    p.emplace(name, zero ? Tensor(shape) : kaiming(rng, shape));
  }
  return p;
}

DenoiserConfig infer_config(const DenoiserParams& params) {
  DenoiserConfig cfg;
  const Tensor& in_w = get(params, "in_conv.weight");
  require(in_w.rank() == 4, ErrorKind::Format, "in_conv.weight must be rank 4");
  cfg.base_channels = static_cast<int>(in_w.dim(0));
  cfg.image_channels = static_cast<int>(in_w.dim(1));
  int blocks = 0;
  while (params.contains(block_key(blocks, "conv1.weight"))) ++blocks;
  cfg.num_blocks = blocks;
  require(blocks >= 1, ErrorKind::Format, "denoiser parameters contain no residual blocks");
  cfg.time_embed_dim = static_cast<int>(get(params, block_key(0, "time.weight")).dim(1));
  cfg.validate();

  // Every expected tensor present with the expected shape, nothing extra.
  const auto layout = parameter_layout(cfg);
  require(layout.size() == params.size(), ErrorKind::Format,
          "denoiser parameter set has unexpected entries");
  for (const auto& [name, shape] : layout)
    require(get(params, name).shape() == shape, ErrorKind::Format,
            "parameter '" + name + "' has shape " + shape_string(params.at(name).shape()) +
                ", expected " + shape_string(shape));
  return cfg;
}

std::size_t parameter_count(const DenoiserParams& params) {
  std::size_t n = 0;
  for (const auto& [_, t] : params) n += t.size();
  return n;
}

std::vector<double> time_embedding(int t, int dim) {
  require(dim >= 2 && dim % 2 == 0, ErrorKind::InvalidArgument,
          "time_embedding: dim must be a positive even integer, got " + std::to_string(dim));
  std::vector<double> out(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double w = std::pow(10000.0, -2.0 * i / dim);
    out[2 * i] = std::sin(t * w);
    out[2 * i + 1] = std::cos(t * w);
  }
  return out;
}

Var DenoiserVars::operator[](const std::string& name) const {
  auto it = vars.find(name);
  require(it != vars.end(), ErrorKind::ShapeMismatch, "denoiser: missing parameter '" + name + "'");
  return it->second;
}

DenoiserVars register_params(Graph& graph, const DenoiserParams& params) {
  DenoiserVars out;
  out.config = infer_config(params);
  for (const auto& [name, t] : params) out.vars.emplace(name, graph.parameter(name, t));
  return out;
}

Var predict_x0(Graph& graph, const DenoiserVars& params, Var p_t, int t) {
  const DenoiserConfig& cfg = params.config;
  const Shape& in_shape = p_t.shape();
  require(in_shape.size() == 3 && static_cast<int>(in_shape[0]) == cfg.image_channels,
          ErrorKind::ShapeMismatch,
          "predict_x0: input " + shape_string(in_shape) + " does not match " +
              std::to_string(cfg.image_channels) + " image channel(s)");
  const std::size_t h = in_shape[1], w = in_shape[2];

  const std::vector<double> emb = time_embedding(t, cfg.time_embed_dim);
  Var emb_v = graph.constant(Tensor({emb.size(), 1, 1}, emb));

  Var x = conv2d(p_t, params["in_conv.weight"], params["in_conv.bias"]);
  for (int i = 0; i < cfg.num_blocks; ++i) {
    Var h1 = conv2d(x, params[block_key(i, "conv1.weight")], params[block_key(i, "conv1.bias")]);
    Var temb = conv2d(emb_v, params[block_key(i, "time.weight")], params[block_key(i, "time.bias")]);
    h1 = silu(add(h1, broadcast_channels(temb, h, w)));
    Var h2 = conv2d(h1, params[block_key(i, "conv2.weight")], params[block_key(i, "conv2.bias")]);
    x = add(x, h2);
  }
  Var residual = conv2d(x, params["out_conv.weight"], params["out_conv.bias"]);
  return add(p_t, residual);
}

Tensor predict_x0(const DenoiserParams& params, const Tensor& p_t, int t) {
  Graph graph;
  const DenoiserVars vars = register_params(graph, params);
  Var out = predict_x0(graph, vars, graph.constant(p_t), t);
  return out.value();
}

}  // namespace bbkd
