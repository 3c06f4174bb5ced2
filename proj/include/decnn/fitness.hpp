#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "decnn/dataset_io.hpp"
#include "decnn/de_engine.hpp"
#include "decnn/micro_cnn.hpp"
#include "decnn/types.hpp"

namespace decnn {

inline std::vector<LayerGene> decode_genome(const Genome& g) {
  std::vector<LayerGene> layers;
  layers.reserve(g.size());
  for (double d : g.dims) layers.push_back(decode_interface(to_interface(d)));
  return layers;
}

struct InputShape {
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t channels = 1;
};

/// Per-layer output shape; fully-connected layers report {neurons, 1, 1}.
struct LayerShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  bool flat = false;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct ShapeTrace {
  bool valid = true;
  std::optional<std::size_t> failing_layer;  // zero-based
  std::string reason;
  std::vector<LayerShape> shapes;            // one per layer that was simulated successfully
};

/// Layer-by-layer shape simulation. Convolution and pooling use no padding;
/// nothing spatial may follow a fully-connected layer.
inline ShapeTrace validate_architecture(const std::vector<LayerGene>& layers, InputShape input) {
  ShapeTrace trace;
  std::size_t h = input.height, w = input.width, c = input.channels;
  bool flat = false;
  const auto fail = [&](std::size_t i, std::string why) {
    trace.valid = false;
    trace.failing_layer = i;
    trace.reason = "layer " + std::to_string(i + 1) + " " + describe(layers[i]) + ": " + std::move(why);
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (const auto* fc = std::get_if<FcGene>(&layer)) {
      flat = true;
      h = w = 1;
      c = static_cast<std::size_t>(fc->neurons);
      trace.shapes.push_back({1, 1, c, true});
      continue;
    }
    if (flat) {
      fail(i, "spatial layer after a fully-connected layer");
      return trace;
    }
    std::size_t window = 0, stride = 0;
    if (const auto* conv = std::get_if<ConvGene>(&layer)) {
      window = static_cast<std::size_t>(conv->filter_size);
      stride = static_cast<std::size_t>(conv->stride);
      c = static_cast<std::size_t>(conv->feature_maps);
    } else {
      const auto& pool = std::get<PoolGene>(layer);
      window = static_cast<std::size_t>(pool.kernel_size);
      stride = static_cast<std::size_t>(pool.stride);
    }
    if (h < window || w < window) {
      fail(i, "window " + std::to_string(window) + " exceeds " + std::to_string(h) + "x" + std::to_string(w) +
                  " input");
      return trace;
    }
    h = (h - window) / stride + 1;
    w = (w - window) / stride + 1;
    trace.shapes.push_back({h, w, c, false});
  }
  return trace;
}

/// Forward-pass multiply-accumulates of a valid architecture plus the output
/// layer, computed from shapes alone. Matches cnn::Network::macs().
inline std::size_t forward_macs(const std::vector<LayerGene>& layers, InputShape input, std::size_t classes) {
  const ShapeTrace trace = validate_architecture(layers, input);
  if (!trace.valid) throw ContractError("forward_macs needs a valid architecture: " + trace.reason);
  std::size_t total = 0, prev = input.height * input.width * input.channels, prev_c = input.channels;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerShape& s = trace.shapes[i];
    const std::size_t out = s.height * s.width * s.channels;
    if (const auto* conv = std::get_if<ConvGene>(&layers[i]))
      total += out * prev_c * static_cast<std::size_t>(conv->filter_size * conv->filter_size);
    else if (std::holds_alternative<FcGene>(layers[i]))
      total += prev * out;
    prev = out;
    prev_c = s.channels;
  }
  return total + prev * classes;
}

// ---------------------------------------------------------------------------
// CNN-training evaluator

struct EvalConfig {
  std::size_t epochs = 5;
  double fitness_fraction = 0.1;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::size_t train_subset = 2000;  // examples drawn for train + fitness; 0 = all
  std::size_t test_subset = 0;      // 0 = full test set
  std::size_t max_macs = 0;         // forward-pass cost cap per example; 0 = none
  std::uint64_t seed = 0;
  cnn::Activation activation = cnn::Activation::relu;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(fitness_fraction > 0.0 && fitness_fraction <= 1.0))
      throw ConfigError("fitness fraction must lie in (0, 1]");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  }
};

namespace detail {

/// splitmix64 finalizer; mixes genome contents into a per-candidate seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Seed derived only from the base seed and the decoded architecture, so a
/// candidate trains identically no matter when or on which thread it runs.
inline std::uint64_t candidate_seed(std::uint64_t base, const std::vector<LayerGene>& layers) {
  std::uint64_t h = detail::mix64(base);
  for (const auto& layer : layers) h = detail::mix64(h ^ encode_layer(layer).value());
  return detail::mix64(h ^ layers.size());
}

struct TrainedModel {
  FitnessReport report;
  std::optional<cnn::Network> network;
};

/// Builds the decoded network with the fixed output layer, trains it for
/// `epochs` on `train` and scores accuracy on `score_on`. Invalid, over-budget
/// and diverged candidates score exactly 0.
inline TrainedModel train_and_score(const std::vector<LayerGene>& layers, const LabeledDataset& train,
                                    const LabeledDataset& score_on, const EvalConfig& config,
                                    std::uint64_t seed) {
  TrainedModel model;
  const InputShape input{train.rows, train.cols, train.channels};
  const ShapeTrace trace = validate_architecture(layers, input);
  if (!trace.valid) {
    model.report = FitnessReport::invalid(layers, trace.reason);
    return model;
  }
  if (config.max_macs) {
    const std::size_t macs = forward_macs(layers, input, train.classes);
    if (macs > config.max_macs) {
      model.report = FitnessReport::invalid(
          layers, "forward cost " + std::to_string(macs) + " MACs exceeds cap " + std::to_string(config.max_macs));
      return model;
    }
  }
  cnn::Rng rng(seed);
  cnn::Network net = cnn::Network::build(layers, cnn::input_shape_of(train), train.classes, rng, config.activation);
  const cnn::TrainStats stats =
      cnn::train(net, train, {config.epochs, config.batch_size, config.learning_rate}, rng);
  if (stats.diverged) {
    model.report = FitnessReport::invalid(layers, "diverged");
    return model;
  }
  model.report.architecture = layers;
  model.report.fitness = cnn::accuracy(net, score_on);
  model.network = std::move(net);
  return model;
}

/// Partial training on D_train, accuracy on D_fitness. Holds only shared,
/// read-only data; safe to call concurrently.
class CnnEvaluator {
 public:
  CnnEvaluator(std::shared_ptr<const Split> split, EvalConfig config)
      : split_(std::move(split)), config_(config) {
    config_.validate();
    if (!split_ || split_->train.empty() || split_->fitness.empty())
      throw ConfigError("CNN evaluator needs non-empty training and fitness sets");
  }

  FitnessReport operator()(const Genome& g) const {
    const auto layers = decode_genome(g);
    return train_and_score(layers, split_->train, split_->fitness, config_,
                           candidate_seed(config_.seed, layers))
        .report;
  }

  [[nodiscard]] const EvalConfig& config() const { return config_; }
  [[nodiscard]] const Split& split() const { return *split_; }

 private:
  std::shared_ptr<const Split> split_;
  EvalConfig config_;
};

// ---------------------------------------------------------------------------
// Surrogate landscapes

/// 1 / (1 + d), d = mean |g_j - t_j| / 8191 over the common prefix + |len(g) - len(t)|.
inline double surrogate_target(const Genome& g, const Genome& target) {
  const std::size_t common = std::min(g.size(), target.size());
  double diff = 0.0;
  for (std::size_t j = 0; j < common; ++j) diff += std::abs(g[j] - target[j]);
  const double mean = common ? diff / static_cast<double>(common) / kDimMax : 0.0;
  const double length_gap =
      std::abs(static_cast<double>(g.size()) - static_cast<double>(target.size()));
  return 1.0 / (1.0 + mean + length_gap);
}

inline double surrogate_length(const Genome& g, std::size_t ideal) {
  if (ideal < 1) throw ContractError("ideal length must be >= 1");
  return 1.0 / (1.0 + std::abs(static_cast<double>(g.size()) - static_cast<double>(ideal)));
}

class TargetEvaluator {
 public:
  explicit TargetEvaluator(Genome target) : target_(std::move(target)) {}
  FitnessReport operator()(const Genome& g) const { return FitnessReport::scored(surrogate_target(g, target_)); }
  [[nodiscard]] const Genome& target() const { return target_; }

 private:
  Genome target_;
};

class LengthEvaluator {
 public:
  explicit LengthEvaluator(std::size_t ideal) : ideal_(ideal) {
    if (ideal < 1) throw ConfigError("ideal length must be >= 1");
  }
  FitnessReport operator()(const Genome& g) const { return FitnessReport::scored(surrogate_length(g, ideal_)); }

 private:
  std::size_t ideal_;
};

}  // namespace decnn
