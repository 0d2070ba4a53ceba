#include "cosmos/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "cosmos/random.hpp"
#include "objective_impl.hpp"

namespace cosmos {

Mlp::Mlp(int feature_dim, int hidden_units, int num_classes, std::uint64_t init_seed)
    : feature_dim_(feature_dim), hidden_(hidden_units), num_classes_(num_classes) {
  if (feature_dim < 1) throw std::invalid_argument("Mlp: feature_dim must be >= 1");
  if (hidden_units < 1) throw std::invalid_argument("Mlp: hidden_units must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("Mlp: need at least 2 classes");

  const std::size_t w1 = static_cast<std::size_t>(hidden_) * feature_dim_;
  const std::size_t w2 = static_cast<std::size_t>(num_classes_) * hidden_;
  params_.assign(w1 + static_cast<std::size_t>(hidden_) + w2 + static_cast<std::size_t>(num_classes_), 0.0);

  RngStream rng(init_seed);
  const double std1 = std::sqrt(2.0 / static_cast<double>(feature_dim_));
  for (std::size_t i = 0; i < w1; ++i) params_[i] = std1 * rng.normal();
  const double std2 = std::sqrt(2.0 / static_cast<double>(hidden_));
  const std::size_t w2_off = w1 + static_cast<std::size_t>(hidden_);
  for (std::size_t i = 0; i < w2; ++i) params_[w2_off + i] = std2 * rng.normal();
  // biases stay zero
}

Mlp::ForwardCache Mlp::forward_cache(std::span<const double> x) const {
  ForwardCache cache;
  cache.hidden_act.resize(static_cast<std::size_t>(hidden_));
  cache.logp.resize(static_cast<std::size_t>(num_classes_));

  const std::size_t w1_off = 0;
  const std::size_t b1_off = static_cast<std::size_t>(hidden_) * feature_dim_;
  const std::size_t w2_off = b1_off + static_cast<std::size_t>(hidden_);
  const std::size_t b2_off = w2_off + static_cast<std::size_t>(num_classes_) * hidden_;

  for (int h = 0; h < hidden_; ++h) {
    double z = params_[b1_off + static_cast<std::size_t>(h)];
    const double* row = params_.data() + w1_off + static_cast<std::size_t>(h) * feature_dim_;
    for (int f = 0; f < feature_dim_; ++f) z += row[f] * x[static_cast<std::size_t>(f)];
    cache.hidden_act[static_cast<std::size_t>(h)] = z > 0.0 ? z : 0.0;
  }
  for (int m = 0; m < num_classes_; ++m) {
    double z = params_[b2_off + static_cast<std::size_t>(m)];
    const double* row = params_.data() + w2_off + static_cast<std::size_t>(m) * hidden_;
    for (int h = 0; h < hidden_; ++h) z += row[h] * cache.hidden_act[static_cast<std::size_t>(h)];
    cache.logp[static_cast<std::size_t>(m)] = z;
  }
  detail::logits_to_logp(cache.logp, cache.probs);
  return cache;
}

void Mlp::backprop(std::span<const double> x, const ForwardCache& cache,
                   std::span<const double> dz, std::vector<double>& grad) const {
  const std::size_t w1_off = 0;
  const std::size_t b1_off = static_cast<std::size_t>(hidden_) * feature_dim_;
  const std::size_t w2_off = b1_off + static_cast<std::size_t>(hidden_);
  const std::size_t b2_off = w2_off + static_cast<std::size_t>(num_classes_) * hidden_;

  std::vector<double> dh(static_cast<std::size_t>(hidden_), 0.0);
  for (int m = 0; m < num_classes_; ++m) {
    const double d = dz[static_cast<std::size_t>(m)];
    if (d == 0.0) continue;
    double* grow = grad.data() + w2_off + static_cast<std::size_t>(m) * hidden_;
    const double* wrow = params_.data() + w2_off + static_cast<std::size_t>(m) * hidden_;
    for (int h = 0; h < hidden_; ++h) {
      grow[h] += d * cache.hidden_act[static_cast<std::size_t>(h)];
      dh[static_cast<std::size_t>(h)] += d * wrow[h];
    }
    grad[b2_off + static_cast<std::size_t>(m)] += d;
  }
  for (int h = 0; h < hidden_; ++h) {
    if (cache.hidden_act[static_cast<std::size_t>(h)] <= 0.0) continue;  // rectifier gate
    const double d = dh[static_cast<std::size_t>(h)];
    if (d == 0.0) continue;
    double* grow = grad.data() + w1_off + static_cast<std::size_t>(h) * feature_dim_;
    for (int f = 0; f < feature_dim_; ++f) grow[f] += d * x[static_cast<std::size_t>(f)];
    grad[b1_off + static_cast<std::size_t>(h)] += d;
  }
}

std::vector<double> Mlp::predict_proba(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != feature_dim_)
    throw std::invalid_argument("predict_proba: feature dimension mismatch");
  return forward_cache(x).probs;
}

std::vector<double> Mlp::fit_hard(const Dataset& data, int epochs, double lr) {
  if (data.empty()) throw std::invalid_argument("fit_hard: empty dataset");
  return detail::adam_minimize(*this, epochs, lr,
                               [&](std::vector<double>* g) { return hard_objective(data, g); });
}

std::vector<double> Mlp::fit_soft(const std::vector<std::vector<double>>& inputs,
                                  const PseudoLabelMatrix& targets, std::span<const double> weights,
                                  double lambda, const RegConfig& reg, int epochs, double lr) {
  return detail::adam_minimize(*this, epochs, lr, [&](std::vector<double>* g) {
    return soft_objective(inputs, targets, weights, lambda, reg, LossKind::kKL, g);
  });
}

double Mlp::hard_objective(const Dataset& data, std::vector<double>* grad) const {
  return detail::hard_objective_impl(*this, data, grad);
}

double Mlp::soft_objective(const std::vector<std::vector<double>>& inputs,
                           const PseudoLabelMatrix& targets, std::span<const double> weights,
                           double lambda, const RegConfig& reg, LossKind loss,
                           std::vector<double>* grad) const {
  return detail::soft_objective_impl(*this, inputs, targets, weights, lambda, reg, loss, grad);
}

void Mlp::set_parameters(std::span<const double> params) {
  if (params.size() != params_.size()) throw std::invalid_argument("set_parameters: size mismatch");
  params_.assign(params.begin(), params.end());
}

std::vector<std::uint32_t> Mlp::parameter_block_sizes() const {
  return {static_cast<std::uint32_t>(hidden_ * feature_dim_), static_cast<std::uint32_t>(hidden_),
          static_cast<std::uint32_t>(num_classes_ * hidden_), static_cast<std::uint32_t>(num_classes_)};
}

std::unique_ptr<Predictor> Mlp::clone() const { return std::make_unique<Mlp>(*this); }

}  // namespace cosmos
