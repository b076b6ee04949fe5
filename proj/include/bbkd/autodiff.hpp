#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bbkd/tensor.hpp"

namespace bbkd {

class Graph;

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

using GradientMap = std::map<std::string, Tensor>;

enum class OpKind {
  Leaf,
  Add,
  Mul,
  Scale,
  Conv2d,
  Concat,
  Silu,
  SpatialMean,
  Broadcast,
  Mse,
};

/// Tape of recorded operations (the computation record). Nodes are appended
/// in evaluation order, so reverse index order is a valid reverse topological
/// order and backward touches every node at most once. A graph supports a
/// single backward pass; record a fresh forward pass (or call reset) to
/// differentiate again.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is reported under `name` by backward.
  Var parameter(const std::string& name, Tensor value);

  const Tensor& value(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse-mode sweep from a single-element `loss`. Returns one gradient
  /// per registered parameter; parameters with no path to the loss get zeros.
  GradientMap backward(Var loss);

  void reset();

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    MatR cols;  // conv2d: unfolded input patches, reused by backward
    double alpha = 0.0;
  };

  Var push(OpKind op, std::vector<std::size_t> inputs, Tensor value, double alpha = 0.0);
  const Node& node(Var v) const;
  void check_open(const char* where) const;
  void propagate(std::size_t id, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
  bool consumed_ = false;

  friend Var add(Var a, Var b);
  friend Var mul(Var a, Var b);
  friend Var scale(Var a, double s);
  friend Var conv2d(Var input, Var kernels, Var bias);
  friend Var concat_channels(std::span<const Var> parts);
  friend Var silu(Var x);
  friend Var spatial_mean(Var x);
  friend Var broadcast_channels(Var v, std::size_t height, std::size_t width);
  friend Var mse_loss(Var prediction, Var target);
};

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);

/// Same-padded, stride-1 convolution. input [Cin,H,W], kernels
/// [Cout,Cin,kH,kW] with odd kH/kW, bias [Cout] -> [Cout,H,W].
Var conv2d(Var input, Var kernels, Var bias);

/// Concatenate [C_i,H,W] tensors along the channel axis.
Var concat_channels(std::span<const Var> parts);
Var silu(Var x);
/// [C,H,W] -> [C], mean over H and W.
Var spatial_mean(Var x);
/// [C] or [C,1,1] -> [C,H,W] by repeating each channel value.
Var broadcast_channels(Var v, std::size_t height, std::size_t width);
/// Mean squared error reduced to a [1] scalar.
Var mse_loss(Var prediction, Var target);

// Forward-only kernels shared with tests and the non-recording inference path.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);
double silu_value(double x) noexcept;

}  // namespace bbkd
