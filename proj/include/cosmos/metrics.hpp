#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cosmos/clustering.hpp"
#include "cosmos/dataset.hpp"
#include "cosmos/partition.hpp"
#include "cosmos/predictor.hpp"
#include "cosmos/pseudo_labels.hpp"

namespace cosmos {

// Hard-label prediction error: fraction of argmax mismatches.
double err(const PseudoLabelMatrix& predictions, std::span<const int> labels);
double err(const Predictor& model, const Dataset& data);

// err restricted to the rows where mask is true.
double err_masked(const PseudoLabelMatrix& predictions, std::span<const int> labels,
                  const std::vector<bool>& mask);

// Top-k variant (k = 1 is the default everywhere).
double err_topk(const PseudoLabelMatrix& predictions, std::span<const int> labels, int k);

// Mean over clients of the error of the cluster model each client is
// assigned to, measured on that client's held-out split.
double personalization_risk(const std::vector<const Predictor*>& cluster_models,
                            std::span<const int> cluster_of,
                            const std::vector<Dataset>& eval_sets);

// Pool points whose sealed label belongs to the given class set; the
// observable proxy for the client-supported portion of the pool.
std::vector<bool> support_mask(const std::vector<int>& client_classes, const SealedLabels& sealed);

// Aggregation error bound check, one record per client:
//   lhs = Err over U_i of the cluster aggregate
//   rhs = Err over U_i of the client's own labels + 2B / (gamma * |U_i|)
// with B the measured in-cluster distance bound and gamma the smallest
// positive row margin of the client's labels on U_i.
struct LemmaRecord {
  int client = 0;
  int cluster = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double gamma_hat = 0.0;
  double bound_b = 0.0;
  int supported = 0;         // |U_i|
  int zero_margin_rows = 0;  // rows excluded from gamma_hat
  bool holds = false;
  bool inconclusive = false;  // empty U_i or no positive-margin rows
};

struct LemmaReport {
  std::vector<LemmaRecord> records;
  bool all_hold() const;  // over conclusive records only
};

inline constexpr double kLemmaSlack = 1e-9;

LemmaReport lemma1_check(const std::vector<PseudoLabelMatrix>& client_labels,
                         const std::vector<PseudoLabelMatrix>& cluster_aggregates,
                         const ClusterAssignment& assignment, const SealedLabels& sealed,
                         const std::vector<std::vector<bool>>& support_masks);

// Randomized verifier: builds margin-respecting cluster instances and runs
// the bound check on every client in each one.
struct LemmaTrialOptions {
  int trials = 1000;
  std::uint64_t seed = 0;
  double gamma_min = 0.05;
  double gamma_max = 0.9;
  std::vector<int> class_choices = {2, 5, 10};
  int pool_min = 10;
  int pool_max = 500;
  int max_peers = 4;
  bool force_zero_margin = false;  // degenerate instances; must come back inconclusive
};

struct LemmaCounterexample {
  std::uint64_t trial = 0;
  std::vector<PseudoLabelMatrix> client_labels;
  PseudoLabelMatrix aggregate;
  std::vector<int> labels;
  LemmaRecord record;
};

struct LemmaTrialOutcome {
  int trials_run = 0;
  int records_checked = 0;
  int violations = 0;
  int inconclusive = 0;
  std::optional<LemmaCounterexample> first_violation;
};

LemmaTrialOutcome run_lemma_trials(const LemmaTrialOptions& options);

// Per-round bookkeeping rows, one per client.
struct ClientRoundRecord {
  int client_id = 0;
  int cluster_id = -1;
  double acc_server_model = 0.0;
  double acc_client_model = 0.0;
  double err_on_ui = 0.0;
  double gamma_hat = 0.0;
  double lemma_lhs = 0.0;
  double lemma_rhs = 0.0;
  int lemma_holds = -1;  // 1 holds, 0 violated, -1 inconclusive/absent
  std::uint64_t uplink_bytes = 0;
  std::uint64_t downlink_bytes = 0;
};

struct RoundMetrics {
  int round = 0;
  std::vector<ClientRoundRecord> clients;
  std::vector<double> cluster_bounds;  // per-cluster max in-cluster distance
  std::uint64_t cumulative_uplink = 0;
  std::uint64_t cumulative_downlink = 0;

  double mean_server_accuracy() const;
  double mean_client_accuracy() const;
};

}  // namespace cosmos
