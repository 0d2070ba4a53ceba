#include "cosmos/softmax_regression.hpp"

#include <stdexcept>

#include "objective_impl.hpp"

namespace cosmos {

SoftmaxRegression::SoftmaxRegression(int feature_dim, int num_classes)
    : feature_dim_(feature_dim), num_classes_(num_classes) {
  if (feature_dim < 1) throw std::invalid_argument("SoftmaxRegression: feature_dim must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("SoftmaxRegression: need at least 2 classes");
  params_.assign(static_cast<std::size_t>(num_classes) * (static_cast<std::size_t>(feature_dim) + 1), 0.0);
}

SoftmaxRegression::ForwardCache SoftmaxRegression::forward_cache(std::span<const double> x) const {
  ForwardCache cache;
  cache.logp.resize(static_cast<std::size_t>(num_classes_));
  const double* w = params_.data();
  const double* bias = params_.data() + static_cast<std::size_t>(num_classes_) * feature_dim_;
  for (int m = 0; m < num_classes_; ++m) {
    double z = bias[m];
    const double* row = w + static_cast<std::size_t>(m) * feature_dim_;
    for (int f = 0; f < feature_dim_; ++f) z += row[f] * x[static_cast<std::size_t>(f)];
    cache.logp[static_cast<std::size_t>(m)] = z;
  }
  detail::logits_to_logp(cache.logp, cache.probs);
  return cache;
}

void SoftmaxRegression::backprop(std::span<const double> x, const ForwardCache&,
                                 std::span<const double> dz, std::vector<double>& grad) const {
  double* gw = grad.data();
  double* gb = grad.data() + static_cast<std::size_t>(num_classes_) * feature_dim_;
  for (int m = 0; m < num_classes_; ++m) {
    const double d = dz[static_cast<std::size_t>(m)];
    if (d == 0.0) continue;
    double* row = gw + static_cast<std::size_t>(m) * feature_dim_;
    for (int f = 0; f < feature_dim_; ++f) row[f] += d * x[static_cast<std::size_t>(f)];
    gb[m] += d;
  }
}

std::vector<double> SoftmaxRegression::predict_proba(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != feature_dim_)
    throw std::invalid_argument("predict_proba: feature dimension mismatch");
  return forward_cache(x).probs;
}

std::vector<double> SoftmaxRegression::fit_hard(const Dataset& data, int epochs, double lr) {
  if (data.empty()) throw std::invalid_argument("fit_hard: empty dataset");
  return detail::adam_minimize(*this, epochs, lr,
                               [&](std::vector<double>* g) { return hard_objective(data, g); });
}

std::vector<double> SoftmaxRegression::fit_soft(const std::vector<std::vector<double>>& inputs,
                                                const PseudoLabelMatrix& targets,
                                                std::span<const double> weights, double lambda,
                                                const RegConfig& reg, int epochs, double lr) {
  return detail::adam_minimize(*this, epochs, lr, [&](std::vector<double>* g) {
    return soft_objective(inputs, targets, weights, lambda, reg, LossKind::kKL, g);
  });
}

double SoftmaxRegression::hard_objective(const Dataset& data, std::vector<double>* grad) const {
  return detail::hard_objective_impl(*this, data, grad);
}

double SoftmaxRegression::soft_objective(const std::vector<std::vector<double>>& inputs,
                                         const PseudoLabelMatrix& targets,
                                         std::span<const double> weights, double lambda,
                                         const RegConfig& reg, LossKind loss,
                                         std::vector<double>* grad) const {
  return detail::soft_objective_impl(*this, inputs, targets, weights, lambda, reg, loss, grad);
}

void SoftmaxRegression::set_parameters(std::span<const double> params) {
  if (params.size() != params_.size())
    throw std::invalid_argument("set_parameters: size mismatch");
  params_.assign(params.begin(), params.end());
}

std::vector<std::uint32_t> SoftmaxRegression::parameter_block_sizes() const {
  return {static_cast<std::uint32_t>(num_classes_ * feature_dim_),
          static_cast<std::uint32_t>(num_classes_)};
}

std::unique_ptr<Predictor> SoftmaxRegression::clone() const {
  return std::make_unique<SoftmaxRegression>(*this);
}

}  // namespace cosmos
