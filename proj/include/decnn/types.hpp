#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "decnn/ip_encoding.hpp"

namespace decnn {

inline constexpr double kDimMin = 0.0;
inline constexpr double kDimMax = static_cast<double>(InterfaceValue::max_value);

inline double clamp_dim(double x) { return std::clamp(x, kDimMin, kDimMax); }

/// Variable-length vector of real interface scalars, one per hidden layer.
/// Dimensions stay real during evolution and are rounded only when decoded.
struct Genome {
  std::vector<double> dims;

  Genome() = default;
  explicit Genome(std::vector<double> d) : dims(std::move(d)) {}
  Genome(std::initializer_list<double> d) : dims(d) {}

  [[nodiscard]] std::size_t size() const { return dims.size(); }
  [[nodiscard]] bool empty() const { return dims.empty(); }
  double operator[](std::size_t i) const { return dims[i]; }
  double& operator[](std::size_t i) { return dims[i]; }

  friend bool operator==(const Genome&, const Genome&) = default;
};

/// Nearest canonical interface value for a real dimension.
inline InterfaceValue to_interface(double dim) {
  return canonicalize(InterfaceValue(static_cast<int>(std::lround(clamp_dim(dim)))));
}

inline std::vector<std::string> to_ip_list(const Genome& g) {
  std::vector<std::string> out;
  out.reserve(g.size());
  for (double d : g.dims) out.push_back(format_ip(to_interface(d)));
  return out;
}

inline Genome from_ip_list(const std::vector<std::string>& ips) {
  Genome g;
  g.dims.reserve(ips.size());
  for (const auto& ip : ips) g.dims.push_back(parse_ip(ip).value());
  return g;
}

/// Result of one fitness evaluation.
struct FitnessReport {
  double fitness = 0.0;
  std::vector<LayerGene> architecture;
  bool valid = true;
  std::optional<std::string> failure_reason;

  static FitnessReport scored(double f) {
    FitnessReport r;
    r.fitness = f;
    return r;
  }
  static FitnessReport invalid(std::vector<LayerGene> arch, std::string reason) {
    FitnessReport r;
    r.architecture = std::move(arch);
    r.valid = false;
    r.failure_reason = std::move(reason);
    return r;
  }
};

struct Individual {
  Genome genome;
  std::optional<double> fitness;
};

}  // namespace decnn
