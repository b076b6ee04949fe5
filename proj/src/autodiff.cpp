#include "bbkd/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "bbkd/error.hpp"

namespace bbkd {

namespace {

using MapR = Eigen::Map<MatR>;
using ConstMapR = Eigen::Map<const MatR>;

struct ConvDims {
  std::size_t cin, h, w, cout, kh, kw;
  std::size_t rows() const { return cin * kh * kw; }
  std::size_t pixels() const { return h * w; }
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require(input.rank() == 3, ErrorKind::ShapeMismatch,
          "conv2d: input must be [C,H,W], got " + shape_string(input.shape()));
  require(kernels.rank() == 4, ErrorKind::ShapeMismatch,
          "conv2d: kernels must be [Cout,Cin,kH,kW], got " + shape_string(kernels.shape()));
  ConvDims d{input.dim(0), input.dim(1), input.dim(2),
             kernels.dim(0), kernels.dim(2), kernels.dim(3)};
  require(kernels.dim(1) == d.cin, ErrorKind::ShapeMismatch,
          "conv2d: kernel expects " + std::to_string(kernels.dim(1)) +
              " input channels, input has " + std::to_string(d.cin));
  require(d.kh % 2 == 1 && d.kw % 2 == 1, ErrorKind::InvalidArgument,
          "conv2d: kernel size must be odd, got " + std::to_string(d.kh) + "x" +
              std::to_string(d.kw));
  require(bias.rank() == 1 && bias.dim(0) == d.cout, ErrorKind::ShapeMismatch,
          "conv2d: bias must be [" + std::to_string(d.cout) + "], got " +
              shape_string(bias.shape()));
  return d;
}

// Columns laid out as [Cin*kH*kW, H*W]; out-of-image taps are zero.
MatR im2col(const Tensor& input, const ConvDims& d) {
  MatR col(d.rows(), d.pixels());
  const long ph = static_cast<long>(d.kh / 2), pw = static_cast<long>(d.kw / 2);
  const long H = static_cast<long>(d.h), W = static_cast<long>(d.w);
  double* out = col.data();
  for (std::size_t c = 0; c < d.cin; ++c) {
    const double* src = input.data().data() + c * d.pixels();
    for (long ky = 0; ky < static_cast<long>(d.kh); ++ky) {
      for (long kx = 0; kx < static_cast<long>(d.kw); ++kx) {
        const long x0 = std::max(0L, pw - kx), x1 = std::min(W, W + pw - kx);
        for (long y = 0; y < H; ++y) {
          const long sy = y + ky - ph;
          double* row = out + y * W;
          if (sy < 0 || sy >= H) {
            std::fill(row, row + W, 0.0);
            continue;
          }
          const double* srow = src + sy * W + (kx - pw);
          std::fill(row, row + x0, 0.0);
          for (long x = x0; x < x1; ++x) row[x] = srow[x];
          std::fill(row + x1, row + W, 0.0);
        }
        out += d.pixels();
      }
    }
  }
  return col;
}

void col2im_accumulate(const MatR& dcol, const ConvDims& d, Tensor& grad_input) {
  const long ph = static_cast<long>(d.kh / 2), pw = static_cast<long>(d.kw / 2);
  const long H = static_cast<long>(d.h), W = static_cast<long>(d.w);
  std::size_t r = 0;
  for (std::size_t c = 0; c < d.cin; ++c) {
    double* dst = grad_input.data().data() + c * d.pixels();
    for (long ky = 0; ky < static_cast<long>(d.kh); ++ky) {
      for (long kx = 0; kx < static_cast<long>(d.kw); ++kx, ++r) {
        const double* row = dcol.data() + r * d.pixels();
        const long x0 = std::max(0L, pw - kx), x1 = std::min(W, W + pw - kx);
        for (long y = 0; y < H; ++y) {
          const long sy = y + ky - ph;
          if (sy < 0 || sy >= H) continue;
          double* drow = dst + sy * W + (kx - pw);
          for (long x = x0; x < x1; ++x) drow[x] += row[y * W + x];
        }
      }
    }
  }
}

Tensor conv_with_col(const MatR& col, const Tensor& kernels, const Tensor& bias,
                     const ConvDims& d) {
  Tensor out({d.cout, d.h, d.w});
  ConstMapR k(kernels.data().data(), d.cout, d.rows());
  MapR y(out.data().data(), d.cout, d.pixels());
  y.noalias() = k * col;
  for (std::size_t o = 0; o < d.cout; ++o) y.row(o).array() += bias[o];
  return out;
}

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

Graph* graph_of(std::initializer_list<Var> vars) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    require(v.graph != nullptr, ErrorKind::State, "variable is not attached to a graph");
    if (g == nullptr) g = v.graph;
    require(g == v.graph, ErrorKind::State, "variables belong to different graphs");
  }
  return g;
}

void accumulate(Tensor& slot, const Shape& shape) {
  if (slot.empty() && shape_size(shape) > 0) slot = Tensor(shape);
}

}  // namespace

double silu_value(double x) noexcept { return x * sigmoid(x); }

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const ConvDims d = conv_dims(input, kernels, bias);
  Tensor out = conv_with_col(im2col(input, d), kernels, bias, d);
  out.check_finite("conv2d");
  return out;
}

const Tensor& Var::value() const {
  require(graph != nullptr, ErrorKind::State, "variable is not attached to a graph");
  return graph->value(*this);
}

Var Graph::constant(Tensor value) {
  check_open("constant");
  value.check_finite("constant");
  return push(OpKind::Leaf, {}, std::move(value));
}

Var Graph::parameter(const std::string& name, Tensor value) {
  check_open("parameter");
  require(!params_.contains(name), ErrorKind::InvalidArgument,
          "duplicate parameter name '" + name + "'");
  value.check_finite(name.c_str());
  Var v = push(OpKind::Leaf, {}, std::move(value));
  params_.emplace(name, v.id);
  return v;
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

const Graph::Node& Graph::node(Var v) const {
  require(v.graph == this && v.id < nodes_.size(), ErrorKind::State,
          "variable does not belong to this graph");
  return nodes_[v.id];
}

void Graph::check_open(const char* where) const {
  require(!consumed_, ErrorKind::State,
          std::string(where) + ": graph already differentiated; record a new forward pass");
}

Var Graph::push(OpKind op, std::vector<std::size_t> inputs, Tensor value, double alpha) {
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), {}, alpha});
  return Var{this, nodes_.size() - 1};
}

void Graph::reset() {
  nodes_.clear();
  params_.clear();
  consumed_ = false;
}

GradientMap Graph::backward(Var loss) {
  require(!consumed_, ErrorKind::State,
          "backward called twice on the same record; run a new forward pass");
  const Node& root = node(loss);
  require(root.value.size() == 1, ErrorKind::ShapeMismatch,
          "backward requires a scalar loss, got shape " + shape_string(root.value.shape()));
  consumed_ = true;

  std::vector<Tensor> grads(loss.id + 1);
  grads[loss.id] = Tensor::full(root.value.shape(), 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (grads[i].empty()) continue;
    propagate(i, grads);
  }

  GradientMap out;
  for (const auto& [name, id] : params_) {
    Tensor g = (id < grads.size() && !grads[id].empty()) ? std::move(grads[id])
                                                         : Tensor(nodes_[id].value.shape());
    g.check_finite(name.c_str());
    out.emplace(name, std::move(g));
  }
  return out;
}

void Graph::propagate(std::size_t id, std::vector<Tensor>& grads) const {
  const Node& n = nodes_[id];
  const Tensor& g = grads[id];
  auto slot = [&](std::size_t k) -> Tensor& {
    const std::size_t in = n.inputs[k];
    accumulate(grads[in], nodes_[in].value.shape());
    return grads[in];
  };

  switch (n.op) {
    case OpKind::Leaf:
      break;
    case OpKind::Add: {
      for (std::size_t k = 0; k < 2; ++k) {
        Tensor& s = slot(k);
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
      }
      break;
    }
    case OpKind::Mul: {
      const Tensor& a = nodes_[n.inputs[0]].value;
      const Tensor& b = nodes_[n.inputs[1]].value;
      Tensor& ga = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      Tensor& gb = slot(1);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      break;
    }
    case OpKind::Scale: {
      Tensor& s = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += n.alpha * g[i];
      break;
    }
    case OpKind::Conv2d: {
      const Tensor& input = nodes_[n.inputs[0]].value;
      const Tensor& kernels = nodes_[n.inputs[1]].value;
      const Tensor& bias = nodes_[n.inputs[2]].value;
      const ConvDims d = conv_dims(input, kernels, bias);
      ConstMapR dy(g.data().data(), d.cout, d.pixels());
      const MatR& col = n.cols;
      ConstMapR k(kernels.data().data(), d.cout, d.rows());

      MapR gk(slot(1).data().data(), d.cout, d.rows());
      gk.noalias() += dy * col.transpose();
      Tensor& gb = slot(2);
      for (std::size_t o = 0; o < d.cout; ++o) gb[o] += dy.row(o).sum();
      MatR dcol = k.transpose() * dy;
      col2im_accumulate(dcol, d, slot(0));
      break;
    }
    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Tensor& s = slot(k);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[offset + i];
        offset += s.size();
      }
      break;
    }
    case OpKind::Silu: {
      const Tensor& x = nodes_[n.inputs[0]].value;
      Tensor& s = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double sg = sigmoid(x[i]);
        s[i] += g[i] * (sg + x[i] * sg * (1.0 - sg));
      }
      break;
    }
    case OpKind::SpatialMean: {
      Tensor& s = slot(0);
      const std::size_t plane = s.size() / g.size();
      for (std::size_t c = 0; c < g.size(); ++c) {
        const double v = g[c] / static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) s[c * plane + i] += v;
      }
      break;
    }
    case OpKind::Broadcast: {
      Tensor& s = slot(0);
      const std::size_t plane = g.size() / s.size();
      for (std::size_t c = 0; c < s.size(); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += g[c * plane + i];
        s[c] += acc;
      }
      break;
    }
    case OpKind::Mse: {
      const Tensor& a = nodes_[n.inputs[0]].value;
      const Tensor& b = nodes_[n.inputs[1]].value;
      const double coef = 2.0 * g[0] / static_cast<double>(a.size());
      Tensor& ga = slot(0);
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += coef * (a[i] - b[i]);
      Tensor& gb = slot(1);
      for (std::size_t i = 0; i < a.size(); ++i) gb[i] -= coef * (a[i] - b[i]);
      break;
    }
  }
}

Var add(Var a, Var b) {
  Graph* g = graph_of({a, b});
  g->check_open("add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "add");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  out.check_finite("add");
  return g->push(OpKind::Add, {a.id, b.id}, std::move(out));
}

Var mul(Var a, Var b) {
  Graph* g = graph_of({a, b});
  g->check_open("mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, "mul");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  out.check_finite("mul");
  return g->push(OpKind::Mul, {a.id, b.id}, std::move(out));
}

Var scale(Var a, double s) {
  Graph* g = graph_of({a});
  g->check_open("scale");
  require(std::isfinite(s), ErrorKind::NonFinite, "scale: non-finite factor");
  Tensor out = scaled(a.value(), s);
  return g->push(OpKind::Scale, {a.id}, std::move(out), s);
}

Var conv2d(Var input, Var kernels, Var bias) {
  Graph* g = graph_of({input, kernels, bias});
  g->check_open("conv2d");
  const ConvDims d = conv_dims(input.value(), kernels.value(), bias.value());
  MatR col = im2col(input.value(), d);
  Tensor out = conv_with_col(col, kernels.value(), bias.value(), d);
  out.check_finite("conv2d");
  Var v = g->push(OpKind::Conv2d, {input.id, kernels.id, bias.id}, std::move(out));
  g->nodes_[v.id].cols = std::move(col);
  return v;
}

Var concat_channels(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::InvalidArgument, "concat_channels: no inputs");
  Graph* g = parts[0].graph;
  require(g != nullptr, ErrorKind::State, "variable is not attached to a graph");
  g->check_open("concat_channels");
  const Shape& first = parts[0].shape();
  require(first.size() == 3, ErrorKind::ShapeMismatch, "concat_channels: inputs must be [C,H,W]");
  std::size_t channels = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    graph_of({parts[0], p});
    const Shape& s = p.shape();
    require(s.size() == 3 && s[1] == first[1] && s[2] == first[2], ErrorKind::ShapeMismatch,
            "concat_channels: spatial dims differ: " + shape_string(first) + " vs " +
                shape_string(s));
    channels += s[0];
    ids.push_back(p.id);
  }
  Tensor out({channels, first[1], first[2]});
  double* dst = out.data().data();
  for (const Var& p : parts) {
    const auto v = p.value().data();
    dst = std::copy(v.begin(), v.end(), dst);
  }
  return g->push(OpKind::Concat, std::move(ids), std::move(out));
}

Var silu(Var x) {
  Graph* g = graph_of({x});
  g->check_open("silu");
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = silu_value(in[i]);
  out.check_finite("silu");
  return g->push(OpKind::Silu, {x.id}, std::move(out));
}

Var spatial_mean(Var x) {
  Graph* g = graph_of({x});
  g->check_open("spatial_mean");
  const Tensor& in = x.value();
  require(in.rank() == 3, ErrorKind::ShapeMismatch, "spatial_mean: input must be [C,H,W]");
  const std::size_t plane = in.dim(1) * in.dim(2);
  Tensor out({in.dim(0)});
  for (std::size_t c = 0; c < in.dim(0); ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += in[c * plane + i];
    out[c] = acc / static_cast<double>(plane);
  }
  return g->push(OpKind::SpatialMean, {x.id}, std::move(out));
}

Var broadcast_channels(Var v, std::size_t height, std::size_t width) {
  Graph* g = graph_of({v});
  g->check_open("broadcast_channels");
  const Tensor& in = v.value();
  const bool ok = in.rank() == 1 || (in.rank() == 3 && in.dim(1) == 1 && in.dim(2) == 1);
  require(ok, ErrorKind::ShapeMismatch,
          "broadcast_channels: expected [C] or [C,1,1], got " + shape_string(in.shape()));
  require(height > 0 && width > 0, ErrorKind::InvalidArgument,
          "broadcast_channels: empty spatial size");
  const std::size_t c = in.dim(0), plane = height * width;
  Tensor out({c, height, width});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < plane; ++i) out[k * plane + i] = in[k];
  return g->push(OpKind::Broadcast, {v.id}, std::move(out));
}

Var mse_loss(Var prediction, Var target) {
  Graph* g = graph_of({prediction, target});
  g->check_open("mse_loss");
  const Tensor& a = prediction.value();
  const Tensor& b = target.value();
  require_same_shape(a, b, "mse_loss");
  require(a.size() > 0, ErrorKind::InvalidArgument, "mse_loss: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  Tensor out = Tensor::scalar(acc / static_cast<double>(a.size()));
  return g->push(OpKind::Mse, {prediction.id, target.id}, std::move(out));
}

}  // namespace bbkd
