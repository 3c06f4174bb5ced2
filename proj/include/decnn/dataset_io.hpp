#pragma once

// Loaders for the 28x28 benchmark images (plain-text "amat" rows and binary
// IDX containers), stratified train/fitness splitting and synthetic blobs.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "decnn/dataset.hpp"
#include "decnn/errors.hpp"

namespace decnn {

/// Throws FormatError unless every pixel lies in [0, 1] and every label in range.
inline void check_dataset(const LabeledDataset& d, const std::string& origin) {
  if (d.pixels.size() != d.size() * d.image_size())
    throw FormatError(origin + ": pixel buffer does not match image count");
  for (double p : d.pixels)
    if (!(p >= 0.0 && p <= 1.0)) throw FormatError(origin + ": pixel outside [0, 1]");
  for (int l : d.labels)
    if (l < 0 || static_cast<std::size_t>(l) >= d.classes)
      throw FormatError(origin + ": label " + std::to_string(l) + " outside class range");
}

/// Reads an amat file: one example per line, `rows*cols` pixel reals then the label.
/// `classes` = 0 infers the class count as max label + 1.
inline LabeledDataset load_amat(const std::string& path, std::size_t classes = 0,
                                std::size_t rows = 28, std::size_t cols = 28) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  LabeledDataset d;
  d.rows = rows;
  d.cols = cols;
  d.channels = 1;
  const std::size_t width = rows * cols;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  row.reserve(width + 1);
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    row.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
      if (p == end) break;
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || (next < end && *next != ' ' && *next != '\t' && *next != '\r'))
        throw ParseError(path + ":" + std::to_string(line_no) + ": non-numeric token");
      row.push_back(v);
      p = next;
    }
    if (row.empty()) continue;
    if (row.size() != width + 1)
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(width + 1) +
                       " columns, found " + std::to_string(row.size()));
    const double label = row.back();
    if (label < 0.0 || label != std::floor(label))
      throw ParseError(path + ":" + std::to_string(line_no) + ": label is not a non-negative integer");
    for (std::size_t i = 0; i < width; ++i) d.pixels.push_back(std::clamp(row[i], 0.0, 1.0));
    d.labels.push_back(static_cast<int>(label));
    max_label = std::max(max_label, d.labels.back());
  }
  d.classes = classes ? classes : static_cast<std::size_t>(max_label + 1);
  check_dataset(d, path);
  return d;
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(std::span<const unsigned char> bytes, std::size_t at) {
  return std::uint32_t{bytes[at]} << 24 | std::uint32_t{bytes[at + 1]} << 16 |
         std::uint32_t{bytes[at + 2]} << 8 | std::uint32_t{bytes[at + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

/// Reads an IDX image/label pair (big-endian headers, unsigned byte payload).
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                               std::size_t classes = 10) {
  const auto images = detail::read_file(images_path);
  const auto labels = detail::read_file(labels_path);
  if (images.size() < 16) throw FormatError(images_path + ": truncated IDX header");
  if (labels.size() < 8) throw FormatError(labels_path + ": truncated IDX header");
  if (detail::read_be32(images, 0) != kIdxImageMagic) throw FormatError(images_path + ": bad magic");
  if (detail::read_be32(labels, 0) != kIdxLabelMagic) throw FormatError(labels_path + ": bad magic");

  const std::size_t n = detail::read_be32(images, 4);
  const std::size_t rows = detail::read_be32(images, 8);
  const std::size_t cols = detail::read_be32(images, 12);
  const std::size_t n_labels = detail::read_be32(labels, 4);
  if (n != n_labels)
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                      std::to_string(n_labels) + " labels");
  if (images.size() < 16 + n * rows * cols) throw FormatError(images_path + ": truncated image data");
  if (labels.size() < 8 + n) throw FormatError(labels_path + ": truncated label data");

  LabeledDataset d;
  d.rows = rows;
  d.cols = cols;
  d.channels = 1;
  d.classes = classes;
  d.pixels.resize(n * rows * cols);
  for (std::size_t i = 0; i < d.pixels.size(); ++i) d.pixels[i] = images[16 + i] / 255.0;
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = labels[8 + i];
  check_dataset(d, images_path);
  return d;
}

/// Training data for fitness evaluation plus the held-out sets.
struct Split {
  LabeledDataset train;
  LabeledDataset fitness;
  LabeledDataset test;
};

namespace detail {

/// Splits `total` across classes in proportion to `counts` (largest remainder),
/// so each share is within 1 of exact proportionality.
inline std::vector<std::size_t> proportional_shares(const std::vector<std::size_t>& counts,
                                                    std::size_t total) {
  const std::size_t population = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::vector<std::size_t> shares(counts.size(), 0);
  if (population == 0) return shares;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double exact = static_cast<double>(total) * static_cast<double>(counts[c]) /
                         static_cast<double>(population);
    shares[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += shares[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    const std::size_t c = remainders[k].second;
    if (shares[c] < counts[c]) {
      ++shares[c];
      ++assigned;
    }
  }
  return shares;
}

/// Per-class index lists, each shuffled.
inline std::vector<std::vector<std::size_t>> shuffled_by_class(const LabeledDataset& d, std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> by_class(d.classes);
  for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
  for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);
  return by_class;
}

}  // namespace detail

/// Stratified random subset of `count` examples (the whole set when count >= N).
inline LabeledDataset stratified_sample(const LabeledDataset& d, std::size_t count, std::uint64_t seed) {
  if (count >= d.size()) return d;
  std::mt19937_64 rng(seed);
  const auto by_class = detail::shuffled_by_class(d, rng);
  std::vector<std::size_t> counts;
  for (const auto& idx : by_class) counts.push_back(idx.size());
  const auto shares = detail::proportional_shares(counts, count);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < by_class.size(); ++c)
    chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(shares[c]));
  std::sort(chosen.begin(), chosen.end());
  return d.select(chosen);
}

/// Stratified, seeded partition of (a subset of) `d` into disjoint training and
/// fitness sets. `subset_size` = 0 keeps all N examples; otherwise that many are
/// drawn first. The fitness set receives round(fitness_fraction * subset) of them.
inline Split make_split(const LabeledDataset& d, double fitness_fraction, std::size_t subset_size,
                        std::uint64_t seed) {
  if (!(fitness_fraction > 0.0 && fitness_fraction < 1.0))
    throw ConfigError("fitness fraction must lie in (0, 1)");
  const std::size_t subset = subset_size == 0 ? d.size() : subset_size;
  if (subset > d.size())
    throw ConfigError("subset size " + std::to_string(subset) + " exceeds dataset size " +
                      std::to_string(d.size()));
  const auto fitness_count = static_cast<std::size_t>(std::llround(fitness_fraction * static_cast<double>(subset)));
  if (fitness_count == 0 || fitness_count >= subset)
    throw ConfigError("split leaves an empty training or fitness set");

  std::mt19937_64 rng(seed);
  const auto by_class = detail::shuffled_by_class(d, rng);
  std::vector<std::size_t> counts;
  for (const auto& idx : by_class) counts.push_back(idx.size());
  const auto subset_shares = detail::proportional_shares(counts, subset);
  const auto fitness_shares = detail::proportional_shares(subset_shares, fitness_count);

  std::vector<std::size_t> train_idx, fitness_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    const auto& idx = by_class[c];
    fitness_idx.insert(fitness_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(fitness_shares[c]));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(fitness_shares[c]),
                     idx.begin() + static_cast<std::ptrdiff_t>(subset_shares[c]));
  }
  std::shuffle(train_idx.begin(), train_idx.end(), rng);
  std::shuffle(fitness_idx.begin(), fitness_idx.end(), rng);

  Split split;
  split.train = d.select(train_idx);
  split.fitness = d.select(fitness_idx);
  return split;
}

/// Synthetic 28x28 images: each class is a bright Gaussian spot at its own
/// fixed location (evenly spaced on a ring), jittered by a pixel or so per
/// example, plus faint noise.
inline LabeledDataset synth_blobs(std::size_t classes, std::size_t per_class, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synth_blobs needs at least 2 classes");
  constexpr std::size_t side = 28;
  constexpr double pi = 3.14159265358979323846;
  LabeledDataset d;
  d.rows = d.cols = side;
  d.channels = 1;
  d.classes = classes;
  d.pixels.reserve(classes * per_class * side * side);
  d.labels.reserve(classes * per_class);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.75);
  std::uniform_real_distribution<double> noise(0.0, 0.1);
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < classes; ++c) {
      const double angle = 2.0 * pi * static_cast<double>(c) / static_cast<double>(classes);
      const double cy = 13.5 + 8.0 * std::sin(angle) + jitter(rng);
      const double cx = 13.5 + 8.0 * std::cos(angle) + jitter(rng);
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
          const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 2.5 * 2.5)) + noise(rng);
          d.pixels.push_back(std::min(v, 1.0));
        }
      d.labels.push_back(static_cast<int>(c));
    }
  return d;
}

}  // namespace decnn
