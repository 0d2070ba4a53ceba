#pragma once

#include "cosmos/predictor.hpp"

namespace cosmos {

// Multinomial softmax regression: logits = W x + b. Convex under both the
// hard (cross-entropy) and soft (KL) objectives; zero-initialized.
class SoftmaxRegression final : public Predictor {
 public:
  SoftmaxRegression(int feature_dim, int num_classes);

  int feature_dim() const override { return feature_dim_; }
  int num_classes() const override { return num_classes_; }

  std::vector<double> predict_proba(std::span<const double> x) const override;
  std::vector<double> fit_hard(const Dataset& data, int epochs, double lr) override;
  std::vector<double> fit_soft(const std::vector<std::vector<double>>& inputs,
                               const PseudoLabelMatrix& targets, std::span<const double> weights,
                               double lambda, const RegConfig& reg, int epochs, double lr) override;

  double hard_objective(const Dataset& data, std::vector<double>* grad) const override;
  double soft_objective(const std::vector<std::vector<double>>& inputs,
                        const PseudoLabelMatrix& targets, std::span<const double> weights,
                        double lambda, const RegConfig& reg, LossKind loss,
                        std::vector<double>* grad) const override;

  std::size_t parameter_count() const override { return params_.size(); }
  std::vector<double> parameters() const override { return params_; }
  void set_parameters(std::span<const double> params) override;
  std::vector<std::uint32_t> parameter_block_sizes() const override;

  std::unique_ptr<Predictor> clone() const override;

  struct ForwardCache {
    std::vector<double> logp;
    std::vector<double> probs;
  };
  ForwardCache forward_cache(std::span<const double> x) const;
  void backprop(std::span<const double> x, const ForwardCache& cache, std::span<const double> dz,
                std::vector<double>& grad) const;

 private:
  // layout: W (M x F, row-major) then b (M)
  int feature_dim_;
  int num_classes_;
  std::vector<double> params_;
};

}  // namespace cosmos
