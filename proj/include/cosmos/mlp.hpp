#pragma once

#include "cosmos/predictor.hpp"

namespace cosmos {

// One-hidden-layer perceptron [F, H, M] with rectifier activation and a
// softmax output. Weights use He initialization, biases start at zero.
class Mlp final : public Predictor {
 public:
  Mlp(int feature_dim, int hidden_units, int num_classes, std::uint64_t init_seed);

  int feature_dim() const override { return feature_dim_; }
  int num_classes() const override { return num_classes_; }
  int hidden_units() const { return hidden_; }

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
    std::vector<double> hidden_act;
    std::vector<double> logp;
    std::vector<double> probs;
  };
  ForwardCache forward_cache(std::span<const double> x) const;
  void backprop(std::span<const double> x, const ForwardCache& cache, std::span<const double> dz,
                std::vector<double>& grad) const;

 private:
  // layout: W1 (H x F), b1 (H), W2 (M x H), b2 (M)
  int feature_dim_;
  int hidden_;
  int num_classes_;
  std::vector<double> params_;
};

}  // namespace cosmos
