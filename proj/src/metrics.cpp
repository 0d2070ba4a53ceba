#include "cosmos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "cosmos/random.hpp"

namespace cosmos {

double err(const PseudoLabelMatrix& predictions, std::span<const int> labels) {
  if (predictions.rows() == 0) throw std::invalid_argument("err: empty prediction set");
  if (static_cast<std::size_t>(predictions.rows()) != labels.size())
    throw std::invalid_argument("err: label count mismatch");
  int wrong = 0;
  for (int r = 0; r < predictions.rows(); ++r)
    if (argmax_lowest(predictions.row(r)) != labels[static_cast<std::size_t>(r)]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(predictions.rows());
}

double err(const Predictor& model, const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("err: empty evaluation set");
  int wrong = 0;
  for (const auto& ex : data.examples())
    if (argmax_lowest(model.predict_proba(ex.features)) != ex.label) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

double err_masked(const PseudoLabelMatrix& predictions, std::span<const int> labels,
                  const std::vector<bool>& mask) {
  if (static_cast<std::size_t>(predictions.rows()) != labels.size() ||
      mask.size() != labels.size())
    throw std::invalid_argument("err_masked: size mismatch");
  int wrong = 0, total = 0;
  for (int r = 0; r < predictions.rows(); ++r) {
    if (!mask[static_cast<std::size_t>(r)]) continue;
    ++total;
    if (argmax_lowest(predictions.row(r)) != labels[static_cast<std::size_t>(r)]) ++wrong;
  }
  if (total == 0) throw std::invalid_argument("err_masked: empty supported set");
  return static_cast<double>(wrong) / static_cast<double>(total);
}

double err_topk(const PseudoLabelMatrix& predictions, std::span<const int> labels, int k) {
  if (predictions.rows() == 0) throw std::invalid_argument("err_topk: empty prediction set");
  if (k < 1 || k > predictions.cols()) throw std::invalid_argument("err_topk: bad k");
  int wrong = 0;
  std::vector<int> order(static_cast<std::size_t>(predictions.cols()));
  for (int r = 0; r < predictions.rows(); ++r) {
    const auto row = predictions.row(r);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)];
    });
    bool hit = false;
    for (int i = 0; i < k; ++i)
      if (order[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(r)]) hit = true;
    if (!hit) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(predictions.rows());
}

double personalization_risk(const std::vector<const Predictor*>& cluster_models,
                            std::span<const int> cluster_of,
                            const std::vector<Dataset>& eval_sets) {
  if (eval_sets.empty()) throw std::invalid_argument("personalization_risk: no clients");
  if (cluster_of.size() != eval_sets.size())
    throw std::invalid_argument("personalization_risk: assignment size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < eval_sets.size(); ++i) {
    if (eval_sets[i].empty())
      throw std::invalid_argument("personalization_risk: client " + std::to_string(i) +
                                  " has no evaluation set");
    const int k = cluster_of[i];
    if (k < 0 || k >= static_cast<int>(cluster_models.size()))
      throw std::invalid_argument("personalization_risk: bad cluster index");
    total += err(*cluster_models[static_cast<std::size_t>(k)], eval_sets[i]);
  }
  return total / static_cast<double>(eval_sets.size());
}

std::vector<bool> support_mask(const std::vector<int>& client_classes, const SealedLabels& sealed) {
  std::vector<bool> mask(sealed.labels.size(), false);
  bool any = false;
  for (std::size_t j = 0; j < sealed.labels.size(); ++j) {
    for (int c : client_classes)
      if (sealed.labels[j] == c) {
        mask[j] = true;
        any = true;
        break;
      }
  }
  if (!any && !sealed.labels.empty())
    std::cerr << "warning: support mask is empty (no pool point carries a supported class)\n";
  return mask;
}

bool LemmaReport::all_hold() const {
  for (const auto& rec : records)
    if (!rec.inconclusive && !rec.holds) return false;
  return true;
}

LemmaReport lemma1_check(const std::vector<PseudoLabelMatrix>& client_labels,
                         const std::vector<PseudoLabelMatrix>& cluster_aggregates,
                         const ClusterAssignment& assignment, const SealedLabels& sealed,
                         const std::vector<std::vector<bool>>& support_masks) {
  const std::size_t n = client_labels.size();
  if (assignment.cluster_of.size() != n || support_masks.size() != n)
    throw std::invalid_argument("lemma1_check: per-client input size mismatch");
  if (cluster_aggregates.size() != assignment.clusters.size())
    throw std::invalid_argument("lemma1_check: aggregate count mismatch");

  // measured in-cluster distance bound, per cluster
  std::vector<double> bounds(assignment.clusters.size(), 0.0);
  for (std::size_t k = 0; k < assignment.clusters.size(); ++k) {
    const auto& members = assignment.clusters[k];
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b)
        bounds[k] = std::max(bounds[k],
                             pairwise_distance(client_labels[static_cast<std::size_t>(members[a])],
                                               client_labels[static_cast<std::size_t>(members[b])]));
  }

  LemmaReport report;
  report.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LemmaRecord rec;
    rec.client = static_cast<int>(i);
    rec.cluster = assignment.cluster_of[i];
    rec.bound_b = bounds[static_cast<std::size_t>(rec.cluster)];

    const auto& mask = support_masks[i];
    const auto& mine = client_labels[i];
    double gamma = 1e308;
    int supported = 0;
    for (int r = 0; r < mine.rows(); ++r) {
      if (!mask[static_cast<std::size_t>(r)]) continue;
      ++supported;
      const double m = margin(mine.row(r));
      if (m <= 0.0)
        ++rec.zero_margin_rows;
      else
        gamma = std::min(gamma, m);
    }
    rec.supported = supported;
    if (supported == 0 || supported == rec.zero_margin_rows) {
      rec.inconclusive = true;
      report.records.push_back(rec);
      continue;
    }
    rec.gamma_hat = gamma;
    rec.lhs = err_masked(cluster_aggregates[static_cast<std::size_t>(rec.cluster)], sealed.labels, mask);
    rec.rhs = err_masked(mine, sealed.labels, mask) +
              2.0 * rec.bound_b / (rec.gamma_hat * static_cast<double>(supported));
    rec.holds = rec.lhs <= rec.rhs + kLemmaSlack;
    report.records.push_back(rec);
  }
  return report;
}

LemmaTrialOutcome run_lemma_trials(const LemmaTrialOptions& options) {
  LemmaTrialOutcome outcome;
  for (int trial = 0; trial < options.trials; ++trial) {
    RngStream rng(options.seed, 7777, static_cast<std::uint64_t>(trial));
    const int num_classes =
        options.class_choices[static_cast<std::size_t>(rng.below(options.class_choices.size()))];
    const int pool = options.pool_min +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(options.pool_max - options.pool_min + 1)));
    const double gamma = rng.uniform(options.gamma_min, options.gamma_max);
    const int peers = static_cast<int>(rng.below(static_cast<std::uint64_t>(options.max_peers + 1)));

    // focal client rows blended toward a one-hot so every margin is >= gamma
    PseudoLabelMatrix base(pool, num_classes);
    std::vector<int> tops(static_cast<std::size_t>(pool));
    std::vector<int> labels(static_cast<std::size_t>(pool));
    for (int r = 0; r < pool; ++r) {
      if (options.force_zero_margin) {
        for (int c = 0; c < num_classes; ++c)
          base.at(r, c) = 1.0 / static_cast<double>(num_classes);
        tops[static_cast<std::size_t>(r)] = 0;
      } else {
        auto q = rng.dirichlet(1.0, static_cast<std::size_t>(num_classes));
        const int top = argmax_lowest(q);
        for (int c = 0; c < num_classes; ++c)
          base.at(r, c) = (1.0 - gamma) * q[static_cast<std::size_t>(c)] + (c == top ? gamma : 0.0);
        tops[static_cast<std::size_t>(r)] = top;
      }
      labels[static_cast<std::size_t>(r)] =
          rng.uniform() < 0.7 ? tops[static_cast<std::size_t>(r)]
                              : static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
    }

    std::vector<PseudoLabelMatrix> mats;
    mats.push_back(base);
    for (int p = 0; p < peers; ++p) {
      PseudoLabelMatrix peer = base;
      if (!options.force_zero_margin && num_classes > 1) {
        for (int r = 0; r < pool; ++r) {
          const int top = tops[static_cast<std::size_t>(r)];
          int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1)));
          if (other >= top) ++other;
          const double eps = rng.uniform(0.0, gamma / 4.0);
          peer.at(r, top) -= eps;
          peer.at(r, other) += eps;
        }
      }
      mats.push_back(std::move(peer));
    }

    const int members = static_cast<int>(mats.size());
    PseudoLabelMatrix aggregate(pool, num_classes);
    for (int r = 0; r < pool; ++r)
      for (int c = 0; c < num_classes; ++c) {
        double sum = 0.0;
        for (const auto& m : mats) sum += m.at(r, c);
        aggregate.at(r, c) = sum / static_cast<double>(members);
      }

    ClusterAssignment assignment;
    assignment.clusters.push_back({});
    for (int i = 0; i < members; ++i) {
      assignment.clusters[0].push_back(i);
      assignment.cluster_of.push_back(0);
    }
    assignment.center_of.push_back(0);

    SealedLabels sealed{labels};
    std::vector<std::vector<bool>> masks(static_cast<std::size_t>(members),
                                         std::vector<bool>(static_cast<std::size_t>(pool), true));

    const auto report = lemma1_check(mats, {aggregate}, assignment, sealed, masks);
    ++outcome.trials_run;
    for (const auto& rec : report.records) {
      if (rec.inconclusive) {
        ++outcome.inconclusive;
        continue;
      }
      ++outcome.records_checked;
      if (!rec.holds) {
        ++outcome.violations;
        if (!outcome.first_violation) {
          LemmaCounterexample ce;
          ce.trial = static_cast<std::uint64_t>(trial);
          ce.client_labels = mats;
          ce.aggregate = aggregate;
          ce.labels = labels;
          ce.record = rec;
          outcome.first_violation = std::move(ce);
        }
      }
    }
  }
  return outcome;
}

double RoundMetrics::mean_server_accuracy() const {
  double total = 0.0;
  int count = 0;
  for (const auto& c : clients)
    if (std::isfinite(c.acc_server_model)) {
      total += c.acc_server_model;
      ++count;
    }
  return count ? total / count : 0.0;
}

double RoundMetrics::mean_client_accuracy() const {
  double total = 0.0;
  int count = 0;
  for (const auto& c : clients)
    if (std::isfinite(c.acc_client_model)) {
      total += c.acc_client_model;
      ++count;
    }
  return count ? total / count : 0.0;
}

}  // namespace cosmos
