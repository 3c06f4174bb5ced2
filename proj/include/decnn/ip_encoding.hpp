#pragma once

// IP-address style codec: every CNN layer is one 13-bit interface value
// written as a 2-byte dotted address "H.L".
//
//   Conv   0.0  - 15.255   base 0     payload filter(3) | maps(7) | stride(2)
//   FC     16.0 - 23.255   base 4096  payload neurons(11)
//   Pool   24.0 - 31.255   base 6144  placeholder(6) | kernel(2) | stride(2) | type(1)
//
// Each field stores (attribute - 1). Pool placeholder bits are written as zero
// and ignored on decode.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "decnn/errors.hpp"

namespace decnn {

enum class LayerType { conv, fully_connected, pool };

enum class PoolType : int { max = 1, average = 2 };

struct ConvGene {
  int filter_size = 1;
  int feature_maps = 1;
  int stride = 1;
  friend bool operator==(const ConvGene&, const ConvGene&) = default;
};

struct PoolGene {
  int kernel_size = 1;
  int stride = 1;
  PoolType pool_type = PoolType::max;
  friend bool operator==(const PoolGene&, const PoolGene&) = default;
};

struct FcGene {
  int neurons = 1;
  friend bool operator==(const FcGene&, const FcGene&) = default;
};

using LayerGene = std::variant<ConvGene, PoolGene, FcGene>;

struct AttributeRange {
  int lo;
  int hi;
};

namespace ranges {
inline constexpr AttributeRange conv_filter{1, 8};
inline constexpr AttributeRange conv_maps{1, 128};
inline constexpr AttributeRange conv_stride{1, 4};
inline constexpr AttributeRange pool_kernel{1, 4};
inline constexpr AttributeRange pool_stride{1, 4};
inline constexpr AttributeRange pool_type{1, 2};
inline constexpr AttributeRange fc_neurons{1, 2048};
}  // namespace ranges

/// Canonical 13-bit integer form of a 2-byte interface address.
class InterfaceValue {
 public:
  static constexpr std::uint16_t max_value = 8191;

  constexpr InterfaceValue() = default;
  constexpr explicit InterfaceValue(int v) : value_(checked(v)) {}

  [[nodiscard]] constexpr std::uint16_t value() const { return value_; }
  [[nodiscard]] constexpr int high_byte() const { return value_ >> 8; }
  [[nodiscard]] constexpr int low_byte() const { return value_ & 0xFF; }

  friend constexpr bool operator==(InterfaceValue, InterfaceValue) = default;
  friend constexpr auto operator<=>(InterfaceValue, InterfaceValue) = default;

 private:
  static constexpr std::uint16_t checked(int v) {
    if (v < 0 || v > max_value)
      throw RangeError("interface value " + std::to_string(v) + " outside [0, 8191]");
    return static_cast<std::uint16_t>(v);
  }

  std::uint16_t value_ = 0;
};

struct Subnet {
  LayerType layer_type;
  int base_value;
  int payload_bits;
  int placeholder_bits;

  [[nodiscard]] constexpr int size() const { return 1 << (payload_bits + placeholder_bits); }
  [[nodiscard]] constexpr int first() const { return base_value; }
  [[nodiscard]] constexpr int last() const { return base_value + size() - 1; }
  friend constexpr bool operator==(const Subnet&, const Subnet&) = default;
};

namespace subnets {
inline constexpr Subnet conv{LayerType::conv, 0, 12, 0};
inline constexpr Subnet fully_connected{LayerType::fully_connected, 4096, 11, 0};
inline constexpr Subnet pool{LayerType::pool, 6144, 5, 6};
}  // namespace subnets

inline constexpr Subnet subnet_for(LayerType type) {
  switch (type) {
    case LayerType::conv: return subnets::conv;
    case LayerType::fully_connected: return subnets::fully_connected;
    case LayerType::pool: return subnets::pool;
  }
  return subnets::conv;
}

inline constexpr Subnet subnet_of(InterfaceValue v) {
  const int x = v.value();
  if (x < subnets::fully_connected.first()) return subnets::conv;
  if (x < subnets::pool.first()) return subnets::fully_connected;
  return subnets::pool;
}

inline constexpr LayerType layer_type_of(const LayerGene& gene) {
  switch (gene.index()) {
    case 0: return LayerType::conv;
    case 1: return LayerType::pool;
    default: return LayerType::fully_connected;
  }
}

namespace detail {

inline int checked_field(int value, AttributeRange range, const char* name) {
  if (value < range.lo || value > range.hi)
    throw RangeError(std::string(name) + " = " + std::to_string(value) + " outside [" +
                     std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
  return value - 1;
}

}  // namespace detail

inline InterfaceValue encode_layer(const LayerGene& gene) {
  using detail::checked_field;
  struct Packer {
    int operator()(const ConvGene& g) const {
      const int f = checked_field(g.filter_size, ranges::conv_filter, "conv filter_size");
      const int m = checked_field(g.feature_maps, ranges::conv_maps, "conv feature_maps");
      const int s = checked_field(g.stride, ranges::conv_stride, "conv stride");
      return subnets::conv.base_value + (f << 9 | m << 2 | s);
    }
    int operator()(const PoolGene& g) const {
      const int k = checked_field(g.kernel_size, ranges::pool_kernel, "pool kernel_size");
      const int s = checked_field(g.stride, ranges::pool_stride, "pool stride");
      const int t = checked_field(static_cast<int>(g.pool_type), ranges::pool_type, "pool type");
      return subnets::pool.base_value + (k << 3 | s << 1 | t);
    }
    int operator()(const FcGene& g) const {
      return subnets::fully_connected.base_value +
             checked_field(g.neurons, ranges::fc_neurons, "fc neurons");
    }
  };
  return InterfaceValue(std::visit(Packer{}, gene));
}

inline LayerGene decode_interface(InterfaceValue v) {
  const Subnet net = subnet_of(v);
  const int offset = v.value() - net.base_value;
  switch (net.layer_type) {
    case LayerType::conv:
      return ConvGene{(offset >> 9 & 0x7) + 1, (offset >> 2 & 0x7F) + 1, (offset & 0x3) + 1};
    case LayerType::fully_connected:
      return FcGene{(offset & 0x7FF) + 1};
    case LayerType::pool:
      return PoolGene{(offset >> 3 & 0x3) + 1, (offset >> 1 & 0x3) + 1,
                      static_cast<PoolType>((offset & 0x1) + 1)};
  }
  throw RangeError("unreachable subnet");
}

inline LayerGene decode_interface(int v) { return decode_interface(InterfaceValue(v)); }

/// Clears the pooling placeholder bits; every other value is already canonical.
inline InterfaceValue canonicalize(InterfaceValue v) { return encode_layer(decode_interface(v)); }

inline std::string format_ip(InterfaceValue v) {
  return std::to_string(v.high_byte()) + "." + std::to_string(v.low_byte());
}

inline InterfaceValue parse_ip(std::string_view text) {
  const auto fail = [&](const char* why) -> ParseError {
    return ParseError("bad IP text '" + std::string(text) + "': " + why);
  };
  const auto dot = text.find('.');
  if (dot == std::string_view::npos || text.find('.', dot + 1) != std::string_view::npos)
    throw fail("expected exactly one '.'");
  const auto parse_byte = [&](std::string_view part) {
    if (part.empty() || part.size() > 3) throw fail("byte must have 1-3 digits");
    for (char ch : part)
      if (ch < '0' || ch > '9') throw fail("non-numeric byte");
    int b = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), b);
    if (ec != std::errc{} || ptr != part.data() + part.size()) throw fail("non-numeric byte");
    if (b > 255) throw fail("byte above 255");
    return b;
  };
  const int value = parse_byte(text.substr(0, dot)) * 256 + parse_byte(text.substr(dot + 1));
  if (value > InterfaceValue::max_value) throw fail("address above 31.255");
  return InterfaceValue(value);
}

inline const char* layer_type_name(LayerType t) {
  switch (t) {
    case LayerType::conv: return "conv";
    case LayerType::fully_connected: return "fc";
    case LayerType::pool: return "pool";
  }
  return "?";
}

/// Human-readable form, e.g. "conv(f=2,m=32,s=2)"; parse_layer accepts the
/// shorter "conv:2,32,2", "pool:3,2,max" and "fc:1024" forms.
inline std::string describe(const LayerGene& gene) {
  struct Printer {
    std::string operator()(const ConvGene& g) const {
      return "conv(f=" + std::to_string(g.filter_size) + ",m=" + std::to_string(g.feature_maps) +
             ",s=" + std::to_string(g.stride) + ")";
    }
    std::string operator()(const PoolGene& g) const {
      return std::string(g.pool_type == PoolType::max ? "maxpool" : "avgpool") +
             "(k=" + std::to_string(g.kernel_size) + ",s=" + std::to_string(g.stride) + ")";
    }
    std::string operator()(const FcGene& g) const {
      return "fc(n=" + std::to_string(g.neurons) + ")";
    }
  };
  return std::visit(Printer{}, gene);
}

inline LayerGene parse_layer(std::string_view text) {
  const auto fail = [&](const char* why) -> ParseError {
    return ParseError("bad layer '" + std::string(text) + "': " + why);
  };
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw fail("expected '<kind>:<attrs>'");
  const std::string_view kind = text.substr(0, colon);
  std::string_view rest = text.substr(colon + 1);

  std::vector<std::string_view> fields;
  while (true) {
    const auto comma = rest.find(',');
    fields.push_back(rest.substr(0, comma));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  const auto number = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) throw fail("non-numeric field");
    return v;
  };

  LayerGene gene;
  if (kind == "conv") {
    if (fields.size() != 3) throw fail("conv takes filter,maps,stride");
    gene = ConvGene{number(fields[0]), number(fields[1]), number(fields[2])};
  } else if (kind == "pool") {
    if (fields.size() != 3) throw fail("pool takes kernel,stride,max|avg");
    PoolType type;
    if (fields[2] == "max" || fields[2] == "1") {
      type = PoolType::max;
    } else if (fields[2] == "avg" || fields[2] == "average" || fields[2] == "2") {
      type = PoolType::average;
    } else {
      throw fail("pool type must be max or avg");
    }
    gene = PoolGene{number(fields[0]), number(fields[1]), type};
  } else if (kind == "fc") {
    if (fields.size() != 1) throw fail("fc takes neurons");
    gene = FcGene{number(fields[0])};
  } else {
    throw fail("kind must be conv, pool or fc");
  }
  encode_layer(gene);  // range check
  return gene;
}

}  // namespace decnn
