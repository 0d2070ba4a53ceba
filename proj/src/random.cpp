#include "cosmos/random.hpp"

#include <cmath>
#include <stdexcept>

namespace cosmos {

std::uint64_t RngStream::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t x = state_;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
  // rejection sampling keeps the draw exactly uniform
  const std::uint64_t threshold = -n % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1-u keeps the log argument in (0, 1]
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double RngStream::gamma(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("gamma: alpha must be positive");
  if (alpha < 1.0) {
    // boost by one and scale back down
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  // Marsaglia-Tsang squeeze
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> RngStream::dirichlet(double alpha, std::size_t k) {
  if (k == 0) throw std::invalid_argument("dirichlet: k must be positive");
  std::vector<double> out(k);
  if (alpha >= 0.1) {
    double sum = 0.0;
    for (auto& g : out) {
      g = gamma(alpha);
      sum += g;
    }
    if (sum <= 0.0) {
      // vanishing draws; fall back to uniform
      for (auto& g : out) g = 1.0 / static_cast<double>(k);
      return out;
    }
    for (auto& g : out) g /= sum;
    return out;
  }
  // tiny alpha underflows in linear space; sample log-weights instead
  std::vector<double> lw(k);
  double maxlw = -1e308;
  for (std::size_t i = 0; i < k; ++i) {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    lw[i] = std::log(gamma(alpha + 1.0)) + std::log(u) / alpha;
    if (lw[i] > maxlw) maxlw = lw[i];
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = std::exp(lw[i] - maxlw);
    sum += out[i];
  }
  for (auto& g : out) g /= sum;
  return out;
}

}  // namespace cosmos
