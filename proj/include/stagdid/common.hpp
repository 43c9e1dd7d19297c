#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stagdid {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. The CLI maps these onto distinct exit codes.
struct PanelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A per-period statistic together with a flag recording whether its defining
// group sets were nonempty. An undefined component carries value 0 so it can
// participate in downstream sums (zero convention).
struct Component {
  double value = 0.0;
  bool defined = false;
};

namespace detail {
inline double pairwise_sum_impl(std::span<const double> xs) {
  if (xs.size() <= 32) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum_impl(xs.first(half)) + pairwise_sum_impl(xs.subspan(half));
}
}  // namespace detail

// Pairwise summation keeps rounding error O(log n); group counts can reach 1e5.
inline double pairwise_sum(std::span<const double> xs) {
  return detail::pairwise_sum_impl(xs);
}
inline double pairwise_sum(const std::vector<double>& xs) {
  return detail::pairwise_sum_impl(std::span<const double>(xs));
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

// Sample standard deviation, shifted by the first element so that a constant
// sequence yields exactly 0.
inline double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double shift = xs.front();
  std::vector<double> centered(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) centered[i] = xs[i] - shift;
  const double m = pairwise_sum(centered) / static_cast<double>(xs.size());
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dv = centered[i] - m;
    sq[i] = dv * dv;
  }
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(xs.size() - 1));
}

// Empirical quantile as an order statistic: the ceil(p*m)-th smallest value.
// Ties resolve to the higher order statistic, which is the conservative choice
// for bootstrap critical values.
inline double quantile_higher(std::vector<double> xs, double p) {
  if (xs.empty()) throw EstimatorError("quantile of empty sample");
  if (p < 0.0 || p > 1.0) throw EstimatorError("quantile level outside [0,1]");
  std::sort(xs.begin(), xs.end());
  const auto m = static_cast<double>(xs.size());
  std::size_t k = (p <= 0.0) ? 1 : static_cast<std::size_t>(std::ceil(p * m));
  k = std::min(std::max<std::size_t>(k, 1), xs.size());
  return xs[k - 1];
}

// FNV-1a, used to fingerprint input files in reports.
inline std::uint64_t fnv1a(std::span<const char> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}
inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(std::span<const char>(s.data(), s.size()));
}

}  // namespace stagdid
