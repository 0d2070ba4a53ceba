#pragma once

// Shared full-batch objective/gradient kernels, templated over a backend
// exposing forward_cache(x) -> {logp, probs, ...} and
// backprop(x, cache, d_logits, grad_accum).

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cosmos/dataset.hpp"
#include "cosmos/predictor.hpp"
#include "cosmos/pseudo_labels.hpp"

namespace cosmos::detail {

// loss(output, target) where the target row is a constant (a pseudo-label
// row, possibly with exact zeros): target logs clamp at 1e-12.
inline double const_target_loss(LossKind kind, std::span<const double> output_logp,
                                std::span<const double> target) {
  double loss = 0.0;
  for (std::size_t m = 0; m < target.size(); ++m) {
    const double t = target[m];
    if (kind == LossKind::kKL) {
      if (t > 0.0) loss += t * (std::log(std::max(t, 1e-12)) - output_logp[m]);
    } else {
      loss -= t * output_logp[m];
    }
  }
  return loss;
}

// loss(output, target) where the target is another model output; both logs
// come straight from logits so the value is exactly what the gradient
// differentiates.
inline double model_target_loss(LossKind kind, std::span<const double> output_logp,
                                std::span<const double> target_logp,
                                std::span<const double> target_p) {
  double loss = 0.0;
  for (std::size_t m = 0; m < target_p.size(); ++m) {
    if (kind == LossKind::kKL)
      loss += target_p[m] * (target_logp[m] - output_logp[m]);
    else
      loss -= target_p[m] * output_logp[m];
  }
  return loss;
}

template <typename Model>
double hard_objective_impl(const Model& model, const Dataset& data, std::vector<double>* grad) {
  if (data.empty()) throw std::invalid_argument("hard objective: empty dataset");
  if (data.feature_dim() != model.feature_dim())
    throw std::invalid_argument("hard objective: feature dimension mismatch");
  if (data.num_classes() != model.num_classes())
    throw std::invalid_argument("hard objective: class count mismatch");

  const int num_classes = model.num_classes();
  const double inv_batch = 1.0 / static_cast<double>(data.size());
  if (grad) grad->assign(model.parameter_count(), 0.0);

  double loss = 0.0;
  std::vector<double> dz(static_cast<std::size_t>(num_classes));
  for (const auto& ex : data.examples()) {
    const auto cache = model.forward_cache(ex.features);
    loss -= cache.logp[static_cast<std::size_t>(ex.label)];
    if (grad) {
      for (int m = 0; m < num_classes; ++m)
        dz[static_cast<std::size_t>(m)] = cache.probs[static_cast<std::size_t>(m)] * inv_batch;
      dz[static_cast<std::size_t>(ex.label)] -= inv_batch;
      model.backprop(ex.features, cache, dz, *grad);
    }
  }
  return loss * inv_batch;
}

template <typename Model>
double soft_objective_impl(const Model& model, const std::vector<std::vector<double>>& inputs,
                           const PseudoLabelMatrix& targets, std::span<const double> weights,
                           double lambda, const RegConfig& reg, LossKind kind,
                           std::vector<double>* grad) {
  if (inputs.empty()) throw std::invalid_argument("soft objective: empty input set");
  if (static_cast<int>(inputs.size()) != targets.rows())
    throw std::invalid_argument("soft objective: inputs/targets row mismatch");
  if (targets.cols() != model.num_classes())
    throw std::invalid_argument("soft objective: target width mismatch");
  if (!weights.empty() && weights.size() != inputs.size())
    throw std::invalid_argument("soft objective: weight count mismatch");
  if (lambda < 0.0) throw std::invalid_argument("soft objective: negative lambda");

  const int num_classes = model.num_classes();
  const double inv_batch = 1.0 / static_cast<double>(inputs.size());
  if (grad) grad->assign(model.parameter_count(), 0.0);

  const bool reg_active =
      lambda > 0.0 && reg.kind != RegConfig::Transform::kNone && reg.num_neighbors > 0;

  double loss = 0.0;
  std::vector<double> dz_out(static_cast<std::size_t>(num_classes));
  std::vector<double> dz_nbr(static_cast<std::size_t>(num_classes));
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const double scale = (weights.empty() ? 1.0 : weights[j]) * inv_batch;
    const auto cache = model.forward_cache(inputs[j]);
    const auto target = targets.row(static_cast<int>(j));

    loss += scale * const_target_loss(kind, cache.logp, target);
    if (grad)
      for (int m = 0; m < num_classes; ++m)
        dz_out[static_cast<std::size_t>(m)] =
            scale * (cache.probs[static_cast<std::size_t>(m)] - target[static_cast<std::size_t>(m)]);

    if (reg_active) {
      const auto neighbors = sample_neighbors(inputs[j], reg, j);
      for (const auto& xn : neighbors) {
        const auto ncache = model.forward_cache(xn);
        loss += scale * lambda * model_target_loss(kind, ncache.logp, cache.logp, cache.probs);
        if (grad) {
          // neighbor-output side: same shape as a soft cross-entropy step
          for (int m = 0; m < num_classes; ++m)
            dz_nbr[static_cast<std::size_t>(m)] =
                scale * lambda *
                (ncache.probs[static_cast<std::size_t>(m)] - cache.probs[static_cast<std::size_t>(m)]);
          model.backprop(xn, ncache, dz_nbr, *grad);
          // target side flows through the softmax Jacobian at x
          double dot = 0.0;
          for (int m = 0; m < num_classes; ++m) {
            const double v = (kind == LossKind::kKL)
                                 ? cache.logp[static_cast<std::size_t>(m)] - ncache.logp[static_cast<std::size_t>(m)]
                                 : -ncache.logp[static_cast<std::size_t>(m)];
            dot += cache.probs[static_cast<std::size_t>(m)] * v;
          }
          for (int m = 0; m < num_classes; ++m) {
            const double v = (kind == LossKind::kKL)
                                 ? cache.logp[static_cast<std::size_t>(m)] - ncache.logp[static_cast<std::size_t>(m)]
                                 : -ncache.logp[static_cast<std::size_t>(m)];
            dz_out[static_cast<std::size_t>(m)] +=
                scale * lambda * cache.probs[static_cast<std::size_t>(m)] * (v - dot);
          }
        }
      }
    }
    if (grad) model.backprop(inputs[j], cache, dz_out, *grad);
  }
  return loss;
}

// logp = z - logsumexp(z), computed in place alongside probs.
inline void logits_to_logp(std::vector<double>& z, std::vector<double>& probs) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  probs.resize(z.size());
  for (std::size_t m = 0; m < z.size(); ++m) {
    z[m] -= lse;
    probs[m] = std::exp(z[m]);
  }
}

}  // namespace cosmos::detail
