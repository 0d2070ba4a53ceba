#include "cosmos/predictor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cosmos/random.hpp"
#include "objective_impl.hpp"

namespace cosmos {

std::vector<double> apply_temperature(std::span<const double> row, Temperature temp) {
  if (temp.t < 0.0) throw std::invalid_argument("apply_temperature: negative temperature");
  std::vector<double> out(row.begin(), row.end());
  if (temp.t == 1.0) return out;
  if (temp.t == 0.0) {
    const int top = argmax_lowest(row);
    std::fill(out.begin(), out.end(), 0.0);
    out[static_cast<std::size_t>(top)] = 1.0;
    return out;
  }
  // p^(1/t) renormalized, done in log space
  double mx = -1e308;
  for (std::size_t m = 0; m < out.size(); ++m) {
    out[m] = std::log(std::max(out[m], 0.0)) / temp.t;
    mx = std::max(mx, out[m]);
  }
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

PseudoLabelMatrix predict_pseudolabels(const Predictor& model,
                                       const std::vector<std::vector<double>>& pool,
                                       Temperature temp) {
  if (pool.empty()) throw std::invalid_argument("predict_pseudolabels: empty pool");
  PseudoLabelMatrix out(static_cast<int>(pool.size()), model.num_classes());
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const auto row = apply_temperature(model.predict_proba(pool[j]), temp);
    for (int m = 0; m < out.cols(); ++m) out.at(static_cast<int>(j), m) = row[static_cast<std::size_t>(m)];
  }
  out.validate_row_stochastic();
  return out;
}

double margin(std::span<const double> simplex_row) {
  if (simplex_row.size() < 2) throw std::invalid_argument("margin: need at least two classes");
  double top1 = -1e308, top2 = -1e308;
  for (double v : simplex_row) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return top1 - top2;
}

double regularizer_rb(const Predictor& model, std::span<const double> x, const RegConfig& reg,
                      LossKind loss, std::uint64_t point_index) {
  const auto neighbors = detail::sample_neighbors(x, reg, point_index);
  if (neighbors.empty()) return 0.0;
  const auto p_x = model.predict_proba(x);
  std::vector<double> logp_x(p_x.size());
  for (std::size_t m = 0; m < p_x.size(); ++m) logp_x[m] = std::log(std::max(p_x[m], 1e-300));
  double total = 0.0;
  for (const auto& xn : neighbors) {
    const auto p_n = model.predict_proba(xn);
    std::vector<double> logp_n(p_n.size());
    for (std::size_t m = 0; m < p_n.size(); ++m) logp_n[m] = std::log(std::max(p_n[m], 1e-300));
    total += detail::model_target_loss(loss, logp_n, logp_x, p_x);
  }
  return total;
}

double mean_regularizer(const Predictor& model, const std::vector<std::vector<double>>& pool,
                        const RegConfig& reg, LossKind loss) {
  if (pool.empty()) throw std::invalid_argument("mean_regularizer: empty pool");
  double total = 0.0;
  for (std::size_t j = 0; j < pool.size(); ++j)
    total += regularizer_rb(model, pool[j], reg, loss, j);
  return total / static_cast<double>(pool.size());
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("load_parameters: truncated stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_parameters(const Predictor& model, std::ostream& out) {
  const auto blocks = model.parameter_block_sizes();
  put_u32(out, static_cast<std::uint32_t>(blocks.size()));
  for (auto b : blocks) put_u32(out, b);
  for (double v : model.parameters())
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void load_parameters(Predictor& model, std::istream& in) {
  const auto expected = model.parameter_block_sizes();
  const auto count = get_u32(in);
  if (count != expected.size()) throw std::runtime_error("load_parameters: block count mismatch");
  std::size_t total = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto b = get_u32(in);
    if (b != expected[i]) throw std::runtime_error("load_parameters: block shape mismatch");
    total += b;
  }
  std::vector<double> params(total);
  for (auto& v : params) v = static_cast<double>(std::bit_cast<float>(get_u32(in)));
  model.set_parameters(params);
}

namespace detail {

std::vector<std::vector<double>> sample_neighbors(std::span<const double> x, const RegConfig& reg,
                                                  std::uint64_t point_index) {
  if (reg.kind == RegConfig::Transform::kNone || reg.num_neighbors <= 0) return {};
  if (reg.radius < 0.0) throw std::invalid_argument("regularizer: negative radius");
  RngStream rng(reg.seed, kRegularizerKey, point_index);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(reg.num_neighbors));
  for (int s = 0; s < reg.num_neighbors; ++s) {
    std::vector<double> dir(x.size());
    double norm2 = 0.0;
    for (auto& v : dir) {
      v = rng.normal();
      norm2 += v * v;
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-12) {
      std::fill(dir.begin(), dir.end(), 0.0);
      dir[0] = 1.0;
      norm = 1.0;
    }
    const double mag = reg.radius * (1.0 - rng.uniform());  // (0, d]
    std::vector<double> xn(x.begin(), x.end());
    for (std::size_t f = 0; f < xn.size(); ++f) xn[f] += mag * dir[f] / norm;
    out.push_back(std::move(xn));
  }
  return out;
}

std::vector<double> adam_minimize(Predictor& model, int epochs, double lr,
                                  const std::function<double(std::vector<double>*)>& objective) {
  if (epochs < 0) throw std::invalid_argument("fit: negative epoch count");
  if (!(lr > 0.0)) throw std::invalid_argument("fit: learning rate must be positive");
  const std::size_t dim = model.parameter_count();
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(epochs));
  std::vector<double> m(dim, 0.0), v(dim, 0.0), g(dim, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  for (int e = 0; e < epochs; ++e) {
    trace.push_back(objective(&g));
    auto params = model.parameters();
    const double bc1 = 1.0 - std::pow(beta1, e + 1);
    const double bc2 = 1.0 - std::pow(beta2, e + 1);
    for (std::size_t p = 0; p < dim; ++p) {
      m[p] = beta1 * m[p] + (1.0 - beta1) * g[p];
      v[p] = beta2 * v[p] + (1.0 - beta2) * g[p] * g[p];
      params[p] -= lr * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + eps);
    }
    model.set_parameters(params);
  }
  return trace;
}

}  // namespace detail

}  // namespace cosmos
