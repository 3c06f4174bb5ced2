#pragma once

// A deliberately small CNN: conv (no padding) / max+average pooling / fully
// connected layers, a softmax cross-entropy head, backprop and plain SGD.
// 64-bit reals throughout; one example at a time, gradients summed per batch.

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "decnn/dataset.hpp"
#include "decnn/errors.hpp"
#include "decnn/ip_encoding.hpp"

namespace decnn::cnn {

using Rng = std::mt19937_64;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != element_count(shape)) throw ContractError("tensor data does not match shape");
  }
  static Tensor zeros(std::vector<std::size_t> s) {
    const std::size_t n = element_count(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }
  [[nodiscard]] std::size_t size() const { return data.size(); }
};

/// Channel-major spatial shape of one example.
struct Shape3 {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  [[nodiscard]] std::size_t size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

enum class Activation { relu, tanh, identity };

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::identity: return z;
  }
  return z;
}

/// Derivative expressed through the activation's output.
inline double activation_slope(Activation a, double out) {
  switch (a) {
    case Activation::relu: return out > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

inline std::size_t window_count(std::size_t n, std::size_t window, std::size_t stride) {
  return n < window ? 0 : (n - window) / stride + 1;
}

struct ConvParams {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t filter = 1;
  std::size_t stride = 1;
  std::vector<double> weights;  // out_channels x (in_channels * filter * filter)
  std::vector<double> bias;     // out_channels

  [[nodiscard]] std::size_t patch_size() const { return in_channels * filter * filter; }
};

struct FcParams {
  std::size_t inputs = 1;
  std::size_t outputs = 1;
  std::vector<double> weights;  // outputs x inputs
  std::vector<double> bias;     // outputs
};

namespace detail {

inline Shape3 shape3_of(const Tensor& x) {
  if (x.shape.size() != 3) throw ContractError("expected a CxHxW tensor");
  return {x.shape[0], x.shape[1], x.shape[2]};
}

/// col is (C*f*f) x (Ho*Wo), row-major.
inline void im2col(std::span<const double> x, Shape3 in, std::size_t f, std::size_t s,
                   std::size_t out_h, std::size_t out_w, std::vector<double>& col) {
  const std::size_t cols = out_h * out_w;
  col.resize(in.channels * f * f * cols);
  double* dst = col.data();
  for (std::size_t c = 0; c < in.channels; ++c)
    for (std::size_t ky = 0; ky < f; ++ky)
      for (std::size_t kx = 0; kx < f; ++kx)
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const double* src = x.data() + (c * in.height + oy * s + ky) * in.width + kx;
          for (std::size_t ox = 0; ox < out_w; ++ox) *dst++ = src[ox * s];
        }
}

inline void col2im_add(std::span<const double> col, Shape3 in, std::size_t f, std::size_t s,
                       std::size_t out_h, std::size_t out_w, std::span<double> dx) {
  const double* src = col.data();
  for (std::size_t c = 0; c < in.channels; ++c)
    for (std::size_t ky = 0; ky < f; ++ky)
      for (std::size_t kx = 0; kx < f; ++kx)
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          double* dst = dx.data() + (c * in.height + oy * s + ky) * in.width + kx;
          for (std::size_t ox = 0; ox < out_w; ++ox) dst[ox * s] += *src++;
        }
}

inline Shape3 conv_output_shape(Shape3 in, const ConvParams& p) {
  if (in.channels != p.in_channels) throw ContractError("conv input channel mismatch");
  if (in.height < p.filter || in.width < p.filter)
    throw ContractError("conv filter larger than input");
  return {p.out_channels, window_count(in.height, p.filter, p.stride),
          window_count(in.width, p.filter, p.stride)};
}

inline void conv_forward_into(std::span<const double> x, Shape3 in, const ConvParams& p,
                              Activation act, std::vector<double>& col, std::vector<double>& out) {
  const Shape3 o = conv_output_shape(in, p);
  im2col(x, in, p.filter, p.stride, o.height, o.width, col);
  const std::size_t k = p.patch_size(), cols = o.height * o.width;
  out.resize(p.out_channels * cols);
  MatrixMap z(out.data(), static_cast<Eigen::Index>(p.out_channels), static_cast<Eigen::Index>(cols));
  z.noalias() = ConstMatrixMap(p.weights.data(), static_cast<Eigen::Index>(p.out_channels),
                               static_cast<Eigen::Index>(k)) *
                ConstMatrixMap(col.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols));
  for (std::size_t m = 0; m < p.out_channels; ++m)
    for (std::size_t j = 0; j < cols; ++j) {
      double& v = out[m * cols + j];
      v = activate(act, v + p.bias[m]);
    }
}

inline Shape3 pool_output_shape(Shape3 in, std::size_t kernel, std::size_t stride) {
  if (in.height < kernel || in.width < kernel) throw ContractError("pool kernel larger than input");
  return {in.channels, window_count(in.height, kernel, stride), window_count(in.width, kernel, stride)};
}

/// For max pooling `argmax` receives the flat input index chosen per output.
inline void pool_forward_into(std::span<const double> x, Shape3 in, std::size_t kernel,
                              std::size_t stride, PoolType type, std::vector<double>& out,
                              std::vector<std::size_t>* argmax) {
  const Shape3 o = pool_output_shape(in, kernel, stride);
  out.assign(o.size(), 0.0);
  if (argmax) argmax->assign(o.size(), 0);
  const double inv_area = 1.0 / static_cast<double>(kernel * kernel);
  for (std::size_t c = 0; c < in.channels; ++c)
    for (std::size_t oy = 0; oy < o.height; ++oy)
      for (std::size_t ox = 0; ox < o.width; ++ox) {
        const std::size_t oi = (c * o.height + oy) * o.width + ox;
        double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
        std::size_t best_at = 0;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::size_t ii = (c * in.height + oy * stride + ky) * in.width + ox * stride + kx;
            const double v = x[ii];
            sum += v;
            if (v > best) {
              best = v;
              best_at = ii;
            }
          }
        if (type == PoolType::max) {
          out[oi] = best;
          if (argmax) (*argmax)[oi] = best_at;
        } else {
          out[oi] = sum * inv_area;
        }
      }
}

inline void fc_forward_into(std::span<const double> x, const FcParams& p, Activation act,
                            std::vector<double>& out) {
  if (x.size() != p.inputs) throw ContractError("fc input size mismatch");
  out.resize(p.outputs);
  VectorMap z(out.data(), static_cast<Eigen::Index>(p.outputs));
  z.noalias() = ConstMatrixMap(p.weights.data(), static_cast<Eigen::Index>(p.outputs),
                               static_cast<Eigen::Index>(p.inputs)) *
                ConstVectorMap(x.data(), static_cast<Eigen::Index>(p.inputs));
  for (std::size_t i = 0; i < p.outputs; ++i) out[i] = activate(act, out[i] + p.bias[i]);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-op forwards

/// Valid convolution (no padding) followed by bias and activation.
inline Tensor conv_forward(const Tensor& x, const ConvParams& p, Activation act = Activation::relu) {
  const Shape3 in = detail::shape3_of(x);
  const Shape3 o = detail::conv_output_shape(in, p);
  std::vector<double> col, out;
  detail::conv_forward_into(x.data, in, p, act, col, out);
  return Tensor({o.channels, o.height, o.width}, std::move(out));
}

inline Tensor pool_forward(const Tensor& x, std::size_t kernel, std::size_t stride, PoolType type) {
  const Shape3 in = detail::shape3_of(x);
  const Shape3 o = detail::pool_output_shape(in, kernel, stride);
  std::vector<double> out;
  detail::pool_forward_into(x.data, in, kernel, stride, type, out, nullptr);
  return Tensor({o.channels, o.height, o.width}, std::move(out));
}

/// Affine map of the flattened input, then the activation (identity for logits).
inline Tensor fc_forward(const Tensor& x, const FcParams& p, Activation act = Activation::relu) {
  std::vector<double> out;
  detail::fc_forward_into(x.data, p, act, out);
  return Tensor({p.outputs}, std::move(out));
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += p[i] = std::exp(logits[i] - peak);
  for (double& v : p) v /= total;
  return p;
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

inline LossAndGrad softmax_xent(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw ContractError("label outside class range");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double z : logits) total += std::exp(z - peak);
  const double log_norm = peak + std::log(total);
  LossAndGrad out;
  out.loss = log_norm - logits[label];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out.grad[i] = std::exp(logits[i] - log_norm);
  out.grad[label] -= 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Network

/// Parameter gradients in the order of Network::parameter_blocks().
struct Gradients {
  std::vector<std::vector<double>> blocks;

  void zero() {
    for (auto& b : blocks) std::fill(b.begin(), b.end(), 0.0);
  }
  void scale(double s) {
    for (auto& b : blocks)
      for (double& v : b) v *= s;
  }
};

struct TrainOptions {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
};

struct TrainStats {
  bool diverged = false;
  double last_epoch_loss = 0.0;
  std::size_t steps = 0;
};

class Network {
 public:
  struct ConvLayer {
    ConvParams params;
    Shape3 in_shape, out_shape;
    std::vector<double> col, out;
  };
  struct PoolLayer {
    std::size_t kernel = 1, stride = 1;
    PoolType type = PoolType::max;
    Shape3 in_shape, out_shape;
    std::vector<double> out;
    std::vector<std::size_t> argmax;
  };
  struct FcLayer {
    FcParams params;
    bool is_output = false;
    std::vector<double> in, out;
  };
  using Layer = std::variant<ConvLayer, PoolLayer, FcLayer>;

  /// Builds hidden layers from genes and appends the fixed output layer
  /// (fully connected, `classes` logits). Throws ContractError when the shapes
  /// do not chain; callers validate first.
  static Network build(std::span<const LayerGene> hidden, Shape3 input, std::size_t classes, Rng& rng,
                       Activation act = Activation::relu) {
    Network net(input, classes, act);
    for (const auto& gene : hidden) net.append(gene);
    net.append_output();
    net.initialize(rng);
    return net;
  }

  [[nodiscard]] Shape3 input_shape() const { return input_; }
  [[nodiscard]] std::size_t classes() const { return classes_; }
  [[nodiscard]] Activation activation() const { return act_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }

  /// Output shape of every layer, hidden layers first, the logits last.
  /// Fully-connected outputs report as {n, 1, 1}.
  [[nodiscard]] std::vector<Shape3> shape_trace() const {
    std::vector<Shape3> trace;
    for (const auto& layer : layers_) {
      if (const auto* c = std::get_if<ConvLayer>(&layer)) trace.push_back(c->out_shape);
      else if (const auto* p = std::get_if<PoolLayer>(&layer)) trace.push_back(p->out_shape);
      else trace.push_back({std::get<FcLayer>(layer).params.outputs, 1, 1});
    }
    return trace;
  }

  /// Multiply-accumulate operations of one forward pass.
  [[nodiscard]] std::size_t macs() const {
    std::size_t total = 0;
    for (const auto& layer : layers_) {
      if (const auto* c = std::get_if<ConvLayer>(&layer))
        total += c->out_shape.size() * c->params.patch_size();
      else if (const auto* f = std::get_if<FcLayer>(&layer))
        total += f->params.inputs * f->params.outputs;
    }
    return total;
  }

  [[nodiscard]] std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> blocks;
    for (auto& layer : layers_) {
      if (auto* c = std::get_if<ConvLayer>(&layer)) {
        blocks.emplace_back(c->params.weights);
        blocks.emplace_back(c->params.bias);
      } else if (auto* f = std::get_if<FcLayer>(&layer)) {
        blocks.emplace_back(f->params.weights);
        blocks.emplace_back(f->params.bias);
      }
    }
    return blocks;
  }

  [[nodiscard]] std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto b : parameter_blocks()) n += b.size();
    return n;
  }

  [[nodiscard]] Gradients zero_gradients() {
    Gradients g;
    for (auto b : parameter_blocks()) g.blocks.emplace_back(b.size(), 0.0);
    return g;
  }

  /// Forward pass over one example; caches what backward needs. Returns logits.
  std::span<const double> forward(std::span<const double> x) {
    if (x.size() != input_.size()) throw ContractError("input size does not match network");
    std::span<const double> cur = x;
    for (auto& layer : layers_) {
      if (auto* c = std::get_if<ConvLayer>(&layer)) {
        detail::conv_forward_into(cur, c->in_shape, c->params, act_, c->col, c->out);
        cur = c->out;
      } else if (auto* p = std::get_if<PoolLayer>(&layer)) {
        detail::pool_forward_into(cur, p->in_shape, p->kernel, p->stride, p->type, p->out,
                                  p->type == PoolType::max ? &p->argmax : nullptr);
        cur = p->out;
      } else {
        auto& f = std::get<FcLayer>(layer);
        f.in.assign(cur.begin(), cur.end());
        detail::fc_forward_into(f.in, f.params, f.is_output ? Activation::identity : act_, f.out);
        cur = f.out;
      }
    }
    return cur;
  }

  Tensor forward(const Tensor& x) {
    const auto logits = forward(std::span<const double>(x.data));
    return Tensor({classes_}, {logits.begin(), logits.end()});
  }

  /// Backpropagates d loss / d logits through the cached forward pass and adds
  /// the parameter gradients into `acc`.
  void backward_accumulate(std::span<const double> dlogits, Gradients& acc) {
    std::vector<double> grad(dlogits.begin(), dlogits.end()), next;
    std::size_t block = acc.blocks.size();
    for (std::size_t li = layers_.size(); li-- > 0;) {
      auto& layer = layers_[li];
      const bool need_input_grad = li > 0;
      if (auto* c = std::get_if<ConvLayer>(&layer)) {
        const auto& p = c->params;
        const std::size_t cols = c->out_shape.height * c->out_shape.width, k = p.patch_size();
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= activation_slope(act_, c->out[i]);
        const ConstMatrixMap dz(grad.data(), static_cast<Eigen::Index>(p.out_channels),
                                static_cast<Eigen::Index>(cols));
        const ConstMatrixMap col(c->col.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols));
        block -= 2;
        MatrixMap(acc.blocks[block].data(), static_cast<Eigen::Index>(p.out_channels),
                  static_cast<Eigen::Index>(k))
            .noalias() += dz * col.transpose();
        VectorMap(acc.blocks[block + 1].data(), static_cast<Eigen::Index>(p.out_channels)) +=
            dz.rowwise().sum();
        if (need_input_grad) {
          std::vector<double> dcol(k * cols);
          MatrixMap(dcol.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols)).noalias() =
              ConstMatrixMap(p.weights.data(), static_cast<Eigen::Index>(p.out_channels),
                             static_cast<Eigen::Index>(k))
                  .transpose() *
              dz;
          next.assign(c->in_shape.size(), 0.0);
          detail::col2im_add(dcol, c->in_shape, p.filter, p.stride, c->out_shape.height,
                             c->out_shape.width, next);
        }
      } else if (auto* p = std::get_if<PoolLayer>(&layer)) {
        if (need_input_grad) {
          next.assign(p->in_shape.size(), 0.0);
          if (p->type == PoolType::max) {
            for (std::size_t i = 0; i < grad.size(); ++i) next[p->argmax[i]] += grad[i];
          } else {
            const double share = 1.0 / static_cast<double>(p->kernel * p->kernel);
            const Shape3 in = p->in_shape, o = p->out_shape;
            for (std::size_t c = 0; c < o.channels; ++c)
              for (std::size_t oy = 0; oy < o.height; ++oy)
                for (std::size_t ox = 0; ox < o.width; ++ox) {
                  const double g = grad[(c * o.height + oy) * o.width + ox] * share;
                  for (std::size_t ky = 0; ky < p->kernel; ++ky)
                    for (std::size_t kx = 0; kx < p->kernel; ++kx)
                      next[(c * in.height + oy * p->stride + ky) * in.width + ox * p->stride + kx] += g;
                }
          }
        }
      } else {
        auto& f = std::get<FcLayer>(layer);
        const auto& fp = f.params;
        if (!f.is_output)
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= activation_slope(act_, f.out[i]);
        const ConstVectorMap dz(grad.data(), static_cast<Eigen::Index>(fp.outputs));
        const ConstVectorMap in(f.in.data(), static_cast<Eigen::Index>(fp.inputs));
        block -= 2;
        MatrixMap(acc.blocks[block].data(), static_cast<Eigen::Index>(fp.outputs),
                  static_cast<Eigen::Index>(fp.inputs))
            .noalias() += dz * in.transpose();
        VectorMap(acc.blocks[block + 1].data(), static_cast<Eigen::Index>(fp.outputs)) += dz;
        if (need_input_grad) {
          next.resize(fp.inputs);
          VectorMap(next.data(), static_cast<Eigen::Index>(fp.inputs)).noalias() =
              ConstMatrixMap(fp.weights.data(), static_cast<Eigen::Index>(fp.outputs),
                             static_cast<Eigen::Index>(fp.inputs))
                  .transpose() *
              dz;
        }
      }
      if (need_input_grad) grad.swap(next);
    }
  }

  Gradients backward(std::span<const double> dlogits) {
    Gradients g = zero_gradients();
    backward_accumulate(dlogits, g);
    return g;
  }

  /// p <- p - lr * g for every parameter.
  void sgd_step(const Gradients& grads, double lr) {
    auto blocks = parameter_blocks();
    if (grads.blocks.size() != blocks.size()) throw ContractError("gradient layout mismatch");
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (grads.blocks[b].size() != blocks[b].size()) throw ContractError("gradient layout mismatch");
      for (std::size_t i = 0; i < blocks[b].size(); ++i) blocks[b][i] -= lr * grads.blocks[b][i];
    }
  }

  std::size_t predict(std::span<const double> x) {
    const auto logits = forward(x);
    return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  }

  /// Rebuilds the layer structure recorded by describe_layers(); parameters are zero.
  static Network from_structure(Shape3 input, std::size_t classes, Activation act,
                                std::span<const LayerGene> hidden) {
    Network net(input, classes, act);
    for (const auto& gene : hidden) net.append(gene);
    net.append_output();
    return net;
  }

  [[nodiscard]] std::vector<LayerGene> hidden_genes() const {
    std::vector<LayerGene> genes;
    for (const auto& layer : layers_) {
      if (const auto* c = std::get_if<ConvLayer>(&layer)) {
        genes.push_back(ConvGene{static_cast<int>(c->params.filter), static_cast<int>(c->params.out_channels),
                                 static_cast<int>(c->params.stride)});
      } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
        genes.push_back(PoolGene{static_cast<int>(p->kernel), static_cast<int>(p->stride), p->type});
      } else if (const auto& f = std::get<FcLayer>(layer); !f.is_output) {
        genes.push_back(FcGene{static_cast<int>(f.params.outputs)});
      }
    }
    return genes;
  }

 private:
  Network(Shape3 input, std::size_t classes, Activation act)
      : input_(input), classes_(classes), act_(act), current_(input) {}

  void append(const LayerGene& gene) {
    if (flattened_ && !std::holds_alternative<FcGene>(gene))
      throw ContractError("spatial layer after fully-connected layer");
    if (const auto* c = std::get_if<ConvGene>(&gene)) {
      ConvLayer layer;
      layer.params.in_channels = current_.channels;
      layer.params.out_channels = static_cast<std::size_t>(c->feature_maps);
      layer.params.filter = static_cast<std::size_t>(c->filter_size);
      layer.params.stride = static_cast<std::size_t>(c->stride);
      layer.in_shape = current_;
      layer.out_shape = detail::conv_output_shape(current_, layer.params);
      layer.params.weights.assign(layer.params.out_channels * layer.params.patch_size(), 0.0);
      layer.params.bias.assign(layer.params.out_channels, 0.0);
      current_ = layer.out_shape;
      layers_.emplace_back(std::move(layer));
    } else if (const auto* p = std::get_if<PoolGene>(&gene)) {
      PoolLayer layer;
      layer.kernel = static_cast<std::size_t>(p->kernel_size);
      layer.stride = static_cast<std::size_t>(p->stride);
      layer.type = p->pool_type;
      layer.in_shape = current_;
      layer.out_shape = detail::pool_output_shape(current_, layer.kernel, layer.stride);
      current_ = layer.out_shape;
      layers_.emplace_back(std::move(layer));
    } else {
      append_fc(static_cast<std::size_t>(std::get<FcGene>(gene).neurons), false);
    }
  }

  void append_output() { append_fc(classes_, true); }

  void append_fc(std::size_t outputs, bool is_output) {
    FcLayer layer;
    layer.params.inputs = current_.size();
    layer.params.outputs = outputs;
    layer.params.weights.assign(layer.params.inputs * outputs, 0.0);
    layer.params.bias.assign(outputs, 0.0);
    layer.is_output = is_output;
    current_ = {outputs, 1, 1};
    flattened_ = true;
    layers_.emplace_back(std::move(layer));
  }

  /// Zero-mean Gaussian weights scaled by fan-in, zero biases.
  void initialize(Rng& rng) {
    const double gain = act_ == Activation::relu ? 2.0 : 1.0;
    for (auto& layer : layers_) {
      std::vector<double>* w = nullptr;
      std::size_t fan_in = 1;
      if (auto* c = std::get_if<ConvLayer>(&layer)) {
        w = &c->params.weights;
        fan_in = c->params.patch_size();
      } else if (auto* f = std::get_if<FcLayer>(&layer)) {
        w = &f->params.weights;
        fan_in = f->params.inputs;
      }
      if (!w) continue;
      std::normal_distribution<double> gauss(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
      for (double& v : *w) v = gauss(rng);
    }
  }

  Shape3 input_;
  std::size_t classes_;
  Activation act_;
  Shape3 current_;
  bool flattened_ = false;
  std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Training

inline Shape3 input_shape_of(const LabeledDataset& data) {
  return {data.channels, data.rows, data.cols};
}

/// `epochs` passes of shuffled mini-batch SGD on the mean cross-entropy.
/// Stops early and reports divergence on the first non-finite loss.
inline TrainStats train(Network& net, const LabeledDataset& data, const TrainOptions& opt, Rng& rng) {
  if (data.empty()) throw ContractError("training data is empty");
  if (opt.batch_size == 0) throw ContractError("batch size must be positive");
  TrainStats stats;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads = net.zero_gradients();
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const auto logits = net.forward(data.image(i));
        auto [loss, dlogits] = softmax_xent(logits, static_cast<std::size_t>(data.labels[i]));
        if (!std::isfinite(loss)) {
          stats.diverged = true;
          return stats;
        }
        epoch_loss += loss;
        net.backward_accumulate(dlogits, grads);
      }
      grads.scale(1.0 / static_cast<double>(end - start));
      net.sgd_step(grads, opt.learning_rate);
      ++stats.steps;
    }
    stats.last_epoch_loss = epoch_loss / static_cast<double>(order.size());
  }
  return stats;
}

/// Fraction of examples whose arg-max logit equals the label.
inline double accuracy(Network& net, const LabeledDataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (net.predict(data.image(i)) == static_cast<std::size_t>(data.labels[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Checkpoints: a text header describing the layer structure, then every
// parameter block as 64-bit little-endian reals.

namespace detail {

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFF) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
  const Shape3 in = net.input_shape();
  const auto hidden = net.hidden_genes();
  out << "decnn-checkpoint 1\n"
      << "input " << in.channels << ' ' << in.height << ' ' << in.width << '\n'
      << "classes " << net.classes() << '\n'
      << "activation " << detail::activation_name(net.activation()) << '\n'
      << "layers " << hidden.size() << '\n';
  for (const auto& gene : hidden) out << format_ip(encode_layer(gene)) << '\n';
  out << "params " << net.parameter_count() << '\n';
  for (auto block : net.parameter_blocks())
    for (double v : block) {
      const std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  if (!out) throw FormatError("failed writing checkpoint: " + path);
}

inline Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path);
  const auto expect = [&](const char* key) {
    std::string word;
    if (!(in >> word) || word != key) throw FormatError(std::string("checkpoint: expected '") + key + "'");
  };
  expect("decnn-checkpoint");
  int version = 0;
  in >> version;
  if (version != 1) throw FormatError("checkpoint: unsupported version");
  Shape3 shape;
  std::size_t classes = 0, layer_count = 0, param_count = 0;
  std::string act_name;
  expect("input");
  in >> shape.channels >> shape.height >> shape.width;
  expect("classes");
  in >> classes;
  expect("activation");
  in >> act_name;
  expect("layers");
  in >> layer_count;
  std::vector<LayerGene> hidden;
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::string ip;
    in >> ip;
    try {
      hidden.push_back(decode_interface(parse_ip(ip)));
    } catch (const std::exception& e) {
      throw FormatError(std::string("checkpoint layer: ") + e.what());
    }
  }
  expect("params");
  in >> param_count;
  if (!in || in.get() != '\n') throw FormatError("checkpoint: malformed header");
  Activation act = Activation::relu;
  if (act_name == "tanh") act = Activation::tanh;
  else if (act_name == "identity") act = Activation::identity;
  else if (act_name != "relu") throw FormatError("checkpoint: unknown activation " + act_name);

  Network net = Network::from_structure(shape, classes, act, hidden);
  if (net.parameter_count() != param_count) throw FormatError("checkpoint: parameter count mismatch");
  for (auto block : net.parameter_blocks())
    for (double& v : block) {
      std::uint64_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw FormatError("checkpoint truncated");
      v = std::bit_cast<double>(detail::to_little_endian(bits));
    }
  return net;
}

}  // namespace decnn::cnn
