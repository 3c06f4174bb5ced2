#pragma once

// One-sample and Welch two-sample t-tests with two-sided p-values.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>

#include "decnn/errors.hpp"

namespace decnn::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample (n - 1) variance, two-pass.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw ContractError("variance needs at least 2 values");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

namespace detail {

/// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractError("incomplete_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_fraction(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `df` (possibly fractional) degrees of freedom.
inline double two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ContractError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTest {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

inline TTest one_sample_t(std::span<const double> sample, double reference) {
  if (sample.size() < 2) throw ContractError("one-sample t-test needs at least 2 values");
  const double var = variance(sample);
  if (!(var > 0.0)) throw ContractError("one-sample t-test on a zero-variance sample");
  const double n = static_cast<double>(sample.size());
  TTest r;
  r.t = (mean(sample) - reference) / std::sqrt(var / n);
  r.df = n - 1.0;
  r.p = two_sided_p(r.t, r.df);
  return r;
}

/// Welch's unequal-variance test with Welch–Satterthwaite degrees of freedom.
inline TTest welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("Welch t-test needs at least 2 values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = variance(a) / na, vb = variance(b) / nb;
  const double se2 = va + vb;
  const double diff = mean(a) - mean(b);
  TTest r;
  if (!(se2 > 0.0)) {
    if (diff == 0.0) {
      r.df = na + nb - 2.0;
      return r;  // identical constant samples: t = 0, p = 1
    }
    throw ContractError("Welch t-test on zero-variance samples with different means");
  }
  r.t = diff / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = two_sided_p(r.t, r.df);
  return r;
}

}  // namespace decnn::stats
