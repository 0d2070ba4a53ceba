#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "cosmos/clustering.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/partition.hpp"
#include "cosmos/predictor.hpp"

namespace cosmos {

enum class AggregationRule { kMean, kMedian, kMax };
enum class BackendKind { kSoftmax, kMlp };

struct ProtocolConfig {
  int rounds = 5;                   // T; round 1 is the pretrain-and-cluster phase
  int local_pretrain_epochs = 150;  // E0
  int local_finetune_epochs = 30;
  int server_distill_epochs = 150;
  int client_distill_epochs = 50;

  double lambda = 5.0;
  double temperature = 1.0;
  AggregationRule aggregation = AggregationRule::kMean;

  double b0 = std::numeric_limits<double>::infinity();
  int b0_target_k = 0;  // > 0: pick b0 from the round-1 distances instead

  double lr_hard = 1e-3;
  double lr_soft = 1e-4;
  RegConfig reg{.radius = -1.0, .num_neighbors = 2};  // radius < 0: 0.1 x median pool distance

  BackendKind client_backend = BackendKind::kSoftmax;
  int client_hidden = 32;
  BackendKind server_backend = BackendKind::kMlp;
  int server_hidden = 32;

  double eval_fraction = 0.2;        // held-out share of each client's local data
  bool distance_on_hard_labels = false;

  int workers = 1;
  std::uint64_t seed = 0;
  std::string dump_dir;  // when set, every exchanged message is written here
};

struct ClientState {
  int id = 0;
  std::unique_ptr<Predictor> model;
  Dataset train_data;
  Dataset eval_data;
  int group = -1;                 // evaluation-only bookkeeping
  PseudoLabelMatrix last_labels;  // most recent uplink
};

struct ServerState {
  ClusterAssignment assignment;
  std::vector<std::unique_ptr<Predictor>> cluster_models;
  std::vector<PseudoLabelMatrix> aggregates;      // cached per-cluster targets
  std::vector<PseudoLabelMatrix> downlink_cache;  // per-cluster server labels
};

// Per-client byte counters; every pseudo-label transfer charges exactly
// header + rows * cols * 4 bytes.
struct CommLedger {
  std::vector<std::uint64_t> uplink;
  std::vector<std::uint64_t> downlink;
  std::vector<std::uint64_t> round_uplink;
  std::vector<std::uint64_t> round_downlink;

  void reset(int num_clients);
  void begin_round();
  void record_uplink(int client, std::uint64_t bytes);
  void record_downlink(int client, std::uint64_t bytes);
  std::uint64_t total_uplink() const;
  std::uint64_t total_downlink() const;
};

// Entrywise aggregation of one cluster's matrices. Mean preserves the
// simplex; median and max renormalize each row (uniform if a row sums to
// zero, which can happen under median with disjoint one-hot inputs).
PseudoLabelMatrix aggregate_cluster(const std::vector<const PseudoLabelMatrix*>& labels,
                                    AggregationRule rule);

using ClientFactory = std::function<std::unique_ptr<Predictor>(int client_id)>;
using ServerFactory = std::function<std::unique_ptr<Predictor>(int cluster_id)>;

// Drives one experiment: round 1 pretrains, clusters, and distills both
// ways; rounds 2..T alternate local fine-tuning with the same two
// distillation steps. The cluster assignment is frozen after round 1.
class CosmosRun {
 public:
  CosmosRun(Partition partition, ProtocolConfig config);

  void set_client_factory(ClientFactory factory) { client_factory_ = std::move(factory); }
  void set_server_factory(ServerFactory factory) { server_factory_ = std::move(factory); }

  RoundMetrics run_ptc();
  RoundMetrics run_ifft_round(int round);  // round >= 2
  std::vector<RoundMetrics> run_all(const std::function<void(const RoundMetrics&)>& on_round = {});

  // Round-1 pretraining and pseudo-label exchange only; feeds the b0
  // calibration sweep without committing to a clustering.
  DistanceMatrix round_one_distances();

  const std::vector<ClientState>& clients() const { return clients_; }
  const ServerState& server() const { return server_; }
  const CommLedger& ledger() const { return ledger_; }
  const Partition& data() const { return partition_; }
  const ProtocolConfig& config() const { return config_; }
  double resolved_b0() const { return resolved_b0_; }
  double resolved_radius() const { return config_.reg.radius; }

  // Mean error of each client's assigned cluster model on its held-out split.
  double current_personalization_risk() const;

 private:
  void init_clients();
  void local_training(int round);
  void upload_labels();
  void cluster_round_one();
  void server_distillation(int round);
  void downlink_and_client_distillation();
  RoundMetrics collect_metrics(int round);
  DistanceMatrix current_distances() const;
  void dump_message(const std::string& name, const PseudoLabelMatrix& m) const;

  Partition partition_;
  ProtocolConfig config_;
  ClientFactory client_factory_;
  ServerFactory server_factory_;
  std::vector<ClientState> clients_;
  ServerState server_;
  CommLedger ledger_;
  std::vector<std::vector<bool>> support_masks_;
  std::vector<int> frozen_assignment_;  // round-1 map, asserted every round
  double resolved_b0_ = 0.0;
  int completed_rounds_ = 0;
};

// Control arm: every client trains only on its local split for the same
// total epoch budget; no communication, no server models.
std::vector<RoundMetrics> run_baseline_local_only(
    const Partition& partition, const ProtocolConfig& config,
    const std::function<void(const RoundMetrics&)>& on_round = {});

// Same pipeline with all clients forced into a single cluster.
std::vector<RoundMetrics> run_ablation_single_cluster(
    const Partition& partition, const ProtocolConfig& config,
    const std::function<void(const RoundMetrics&)>& on_round = {});

// 0.1 x median pairwise distance over the pool; the default perturbation
// radius when none is configured.
double default_reg_radius(const std::vector<std::vector<double>>& pool);

// Deterministic held-out split of one client's local data; the same split
// is used by every experiment arm.
std::pair<Dataset, Dataset> split_local_data(const Dataset& local, double eval_fraction,
                                             std::uint64_t seed, int client_id);

std::unique_ptr<Predictor> make_backend(BackendKind kind, int feature_dim, int hidden,
                                        int num_classes, std::uint64_t init_seed);

}  // namespace cosmos
