#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "cosmos/dataset.hpp"
#include "cosmos/pseudo_labels.hpp"

namespace cosmos {

enum class LossKind { kKL, kCrossEntropy };

// Consistency regularizer configuration: each input x is compared against
// |S| = num_neighbors points sampled inside a radius-d ball around it
// (isotropic Gaussian direction, magnitude uniform in (0, d]).
struct RegConfig {
  enum class Transform { kGaussianBall, kNone };
  double radius = 0.1;       // d; protocol layer may resolve this from pool geometry
  int num_neighbors = 2;     // |S|; zero disables the term exactly
  Transform kind = Transform::kGaussianBall;
  std::uint64_t seed = 0;    // stream root for neighbor draws
};

struct Temperature {
  double t = 1.0;  // 1 = unscaled softmax, 0 = one-hot of argmax
};

// Model-agnostic interface: anything that can train on hard labels, train
// on soft targets, and emit simplex outputs can participate in the
// protocol. fit_* return the per-epoch objective trace (value measured at
// the start of each epoch, before the update).
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual int feature_dim() const = 0;
  virtual int num_classes() const = 0;

  virtual std::vector<double> predict_proba(std::span<const double> x) const = 0;

  // mean cross-entropy on hard labels, adaptive-moment updates
  virtual std::vector<double> fit_hard(const Dataset& data, int epochs, double lr) = 0;

  // distillation objective: mean over inputs of
  //   w(x) * [ loss(model(x), target(x)) + lambda * r_B(model)(x) ]
  // weights may be empty (all ones).
  virtual std::vector<double> fit_soft(const std::vector<std::vector<double>>& inputs,
                                       const PseudoLabelMatrix& targets,
                                       std::span<const double> weights, double lambda,
                                       const RegConfig& reg, int epochs, double lr) = 0;

  // Objective value and gradient w.r.t. the flat parameter vector, exposed
  // so independent finite-difference checks can probe the same code path
  // the optimizer uses.
  virtual double hard_objective(const Dataset& data, std::vector<double>* grad) const = 0;
  virtual double soft_objective(const std::vector<std::vector<double>>& inputs,
                                const PseudoLabelMatrix& targets,
                                std::span<const double> weights, double lambda,
                                const RegConfig& reg, LossKind loss,
                                std::vector<double>* grad) const = 0;

  virtual std::size_t parameter_count() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> params) = 0;
  virtual std::vector<std::uint32_t> parameter_block_sizes() const = 0;

  virtual std::unique_ptr<Predictor> clone() const = 0;
};

// Temperature scaling on a probability row: p^(1/t) renormalized, which
// equals softmax(logits / t). t = 0 returns the one-hot of the argmax.
std::vector<double> apply_temperature(std::span<const double> row, Temperature temp);

// Soft predictions of a model over the pool, one row per pool point.
PseudoLabelMatrix predict_pseudolabels(const Predictor& model,
                                       const std::vector<std::vector<double>>& pool,
                                       Temperature temp);

// Confidence margin: top-1 minus top-2 probability.
double margin(std::span<const double> simplex_row);

// Sum over sampled neighbors x' of loss(model(x'), model(x)). The draw
// stream is keyed by (reg.seed, point_index) so repeated evaluation is
// reproducible and matches what fit_soft uses internally.
double regularizer_rb(const Predictor& model, std::span<const double> x, const RegConfig& reg,
                      LossKind loss, std::uint64_t point_index = 0);

// Mean of regularizer_rb over a pool; used to probe smoothness post-hoc.
double mean_regularizer(const Predictor& model, const std::vector<std::vector<double>>& pool,
                        const RegConfig& reg, LossKind loss = LossKind::kKL);

// Flat binary parameter dump: u32 block count, u32 per-block value counts,
// then all values as little-endian IEEE-754 single precision.
void save_parameters(const Predictor& model, std::ostream& out);
void load_parameters(Predictor& model, std::istream& in);

namespace detail {

// Neighbor points for the regularizer at one input; deterministic in
// (reg.seed, point_index).
std::vector<std::vector<double>> sample_neighbors(std::span<const double> x, const RegConfig& reg,
                                                  std::uint64_t point_index);

// Full-batch adaptive-moment descent over a get/set parameter interface.
std::vector<double> adam_minimize(Predictor& model, int epochs, double lr,
                                  const std::function<double(std::vector<double>*)>& objective);

}  // namespace detail

}  // namespace cosmos
