#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace decnn {

/// N images of channels x rows x cols pixels in [0, 1], stored contiguously,
/// with one integer label per image.
struct LabeledDataset {
  std::size_t rows = 28;
  std::size_t cols = 28;
  std::size_t channels = 1;
  std::size_t classes = 10;
  std::vector<double> pixels;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] bool empty() const { return labels.empty(); }
  [[nodiscard]] std::size_t image_size() const { return rows * cols * channels; }
  [[nodiscard]] std::span<const double> image(std::size_t i) const {
    return {pixels.data() + i * image_size(), image_size()};
  }

  /// Copies the listed examples, in order, into a new dataset.
  [[nodiscard]] LabeledDataset select(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.rows = rows;
    out.cols = cols;
    out.channels = channels;
    out.classes = classes;
    out.pixels.reserve(indices.size() * image_size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
      const auto img = image(i);
      out.pixels.insert(out.pixels.end(), img.begin(), img.end());
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

}  // namespace decnn
