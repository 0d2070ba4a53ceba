#include "cosmos/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "cosmos/mlp.hpp"
#include "cosmos/parallel.hpp"
#include "cosmos/random.hpp"
#include "cosmos/softmax_regression.hpp"
#include "cosmos/wire.hpp"

namespace cosmos {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PseudoLabelMatrix to_hard_labels(const PseudoLabelMatrix& m) {
  PseudoLabelMatrix out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    const auto row = apply_temperature(m.row(r), Temperature{0.0});
    for (int c = 0; c < m.cols(); ++c) out.at(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace

void CommLedger::reset(int num_clients) {
  uplink.assign(static_cast<std::size_t>(num_clients), 0);
  downlink.assign(static_cast<std::size_t>(num_clients), 0);
  round_uplink.assign(static_cast<std::size_t>(num_clients), 0);
  round_downlink.assign(static_cast<std::size_t>(num_clients), 0);
}

void CommLedger::begin_round() {
  std::fill(round_uplink.begin(), round_uplink.end(), 0);
  std::fill(round_downlink.begin(), round_downlink.end(), 0);
}

void CommLedger::record_uplink(int client, std::uint64_t bytes) {
  uplink[static_cast<std::size_t>(client)] += bytes;
  round_uplink[static_cast<std::size_t>(client)] += bytes;
}

void CommLedger::record_downlink(int client, std::uint64_t bytes) {
  downlink[static_cast<std::size_t>(client)] += bytes;
  round_downlink[static_cast<std::size_t>(client)] += bytes;
}

std::uint64_t CommLedger::total_uplink() const {
  return std::accumulate(uplink.begin(), uplink.end(), std::uint64_t{0});
}

std::uint64_t CommLedger::total_downlink() const {
  return std::accumulate(downlink.begin(), downlink.end(), std::uint64_t{0});
}

PseudoLabelMatrix aggregate_cluster(const std::vector<const PseudoLabelMatrix*>& labels,
                                    AggregationRule rule) {
  if (labels.empty()) throw std::invalid_argument("aggregate_cluster: empty cluster");
  const int rows = labels.front()->rows();
  const int cols = labels.front()->cols();
  for (const auto* m : labels)
    if (m->rows() != rows || m->cols() != cols)
      throw std::invalid_argument("aggregate_cluster: shape mismatch");

  PseudoLabelMatrix out(rows, cols);
  std::vector<double> column(labels.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (std::size_t i = 0; i < labels.size(); ++i) column[i] = labels[i]->at(r, c);
      switch (rule) {
        case AggregationRule::kMean: {
          double sum = 0.0;
          for (double v : column) sum += v;
          out.at(r, c) = sum / static_cast<double>(column.size());
          break;
        }
        case AggregationRule::kMedian: {
          std::sort(column.begin(), column.end());
          const std::size_t mid = column.size() / 2;
          out.at(r, c) = column.size() % 2 ? column[mid] : 0.5 * (column[mid - 1] + column[mid]);
          break;
        }
        case AggregationRule::kMax: {
          out.at(r, c) = *std::max_element(column.begin(), column.end());
          break;
        }
      }
    }
    if (rule != AggregationRule::kMean) {
      double sum = 0.0;
      for (int c = 0; c < cols; ++c) sum += out.at(r, c);
      if (sum < 1e-12) {
        for (int c = 0; c < cols; ++c) out.at(r, c) = 1.0 / static_cast<double>(cols);
      } else {
        for (int c = 0; c < cols; ++c) out.at(r, c) /= sum;
      }
    }
  }
  out.validate_row_stochastic();
  return out;
}

double default_reg_radius(const std::vector<std::vector<double>>& pool) {
  if (pool.size() < 2) return 0.0;
  // exact median over all pairs at desk scale; cap the point count so the
  // pair set stays bounded on large pools
  const std::size_t n = std::min<std::size_t>(pool.size(), 1500);
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t f = 0; f < pool[i].size(); ++f) {
        const double diff = pool[i][f] - pool[j][f];
        d2 += diff * diff;
      }
      dists.push_back(std::sqrt(d2));
    }
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return 0.1 * *mid;
}

std::unique_ptr<Predictor> make_backend(BackendKind kind, int feature_dim, int hidden,
                                        int num_classes, std::uint64_t init_seed) {
  if (kind == BackendKind::kSoftmax)
    return std::make_unique<SoftmaxRegression>(feature_dim, num_classes);
  return std::make_unique<Mlp>(feature_dim, hidden, num_classes, init_seed);
}

CosmosRun::CosmosRun(Partition partition, ProtocolConfig config)
    : partition_(std::move(partition)), config_(std::move(config)) {
  if (config_.rounds < 1) throw std::invalid_argument("protocol: rounds must be >= 1");
  if (config_.lambda < 0.0) throw std::invalid_argument("protocol: lambda must be >= 0");
  if (config_.local_pretrain_epochs < 0 || config_.local_finetune_epochs < 0 ||
      config_.server_distill_epochs < 0 || config_.client_distill_epochs < 0)
    throw std::invalid_argument("protocol: epoch counts must be >= 0");
  if (partition_.pool.points.empty())
    throw std::invalid_argument("protocol: empty public pool");

  if (config_.reg.radius < 0.0) config_.reg.radius = default_reg_radius(partition_.pool.points);
  config_.reg.seed = config_.seed;

  const int n = static_cast<int>(partition_.client_datasets.size());
  client_factory_ = [this](int i) {
    return make_backend(config_.client_backend, partition_.feature_dim, config_.client_hidden,
                        partition_.num_classes, derive_seed(config_.seed, kClientKeyBase + i, 0));
  };
  server_factory_ = [this](int k) {
    return make_backend(config_.server_backend, partition_.feature_dim, config_.server_hidden,
                        partition_.num_classes, derive_seed(config_.seed, kServerKeyBase + k, 0));
  };

  support_masks_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int g = partition_.group_of_client[static_cast<std::size_t>(i)];
    support_masks_.push_back(
        support_mask(partition_.classes_of_group[static_cast<std::size_t>(g)], partition_.pool.sealed));
  }
  ledger_.reset(n);
}

std::pair<Dataset, Dataset> split_local_data(const Dataset& local, double eval_fraction,
                                             std::uint64_t seed, int client_id) {
  std::vector<std::size_t> order(local.size());
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(seed, kClientKeyBase + static_cast<std::uint64_t>(client_id), 1);
  rng.shuffle(order);
  std::size_t eval_count = static_cast<std::size_t>(
      std::llround(eval_fraction * static_cast<double>(local.size())));
  if (eval_count >= local.size() && !local.empty()) eval_count = local.size() - 1;

  Dataset train(local.num_classes(), local.feature_dim());
  Dataset eval(local.num_classes(), local.feature_dim());
  for (std::size_t s = 0; s < order.size(); ++s) {
    if (s < eval_count)
      eval.add(local[order[s]]);
    else
      train.add(local[order[s]]);
  }
  return {std::move(train), std::move(eval)};
}

void CosmosRun::init_clients() {
  const int n = static_cast<int>(partition_.client_datasets.size());
  clients_.clear();
  clients_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ClientState state;
    state.id = i;
    state.group = partition_.group_of_client[static_cast<std::size_t>(i)];
    state.model = client_factory_(i);
    auto [train, eval] = split_local_data(partition_.client_datasets[static_cast<std::size_t>(i)],
                                          config_.eval_fraction, config_.seed, i);
    state.train_data = std::move(train);
    state.eval_data = std::move(eval);
    clients_.push_back(std::move(state));
  }
}

void CosmosRun::local_training(int round) {
  const int epochs = round == 1 ? config_.local_pretrain_epochs : config_.local_finetune_epochs;
  std::vector<std::string> warnings(clients_.size());
  parallel_for(static_cast<int>(clients_.size()), config_.workers, [&](int i) {
    auto& client = clients_[static_cast<std::size_t>(i)];
    if (client.train_data.empty()) {
      warnings[static_cast<std::size_t>(i)] =
          "client " + std::to_string(i) + " has no local training data; skipping local step";
      return;
    }
    if (epochs == 0) return;
    const double before = err(*client.model, client.train_data);
    client.model->fit_hard(client.train_data, epochs, config_.lr_hard);
    const double after = err(*client.model, client.train_data);
    if (after > before + 1e-12)
      warnings[static_cast<std::size_t>(i)] =
          "client " + std::to_string(i) + " local error rose from " + std::to_string(before) +
          " to " + std::to_string(after) + " during round " + std::to_string(round);
  });
  for (const auto& w : warnings)
    if (!w.empty()) std::cerr << "warning: " << w << '\n';
}

void CosmosRun::upload_labels() {
  const Temperature temp{config_.temperature};
  parallel_for(static_cast<int>(clients_.size()), config_.workers, [&](int i) {
    auto& client = clients_[static_cast<std::size_t>(i)];
    client.last_labels = predict_pseudolabels(*client.model, partition_.pool.points, temp);
  });
  for (auto& client : clients_) {
    ledger_.record_uplink(client.id, message_bytes(static_cast<std::uint64_t>(client.last_labels.rows()),
                                                   static_cast<std::uint64_t>(client.last_labels.cols())));
    dump_message("round" + std::to_string(completed_rounds_ + 1) + "_client" +
                     std::to_string(client.id) + "_up.cplm",
                 client.last_labels);
  }
}

DistanceMatrix CosmosRun::current_distances() const {
  std::vector<PseudoLabelMatrix> mats;
  mats.reserve(clients_.size());
  for (const auto& client : clients_)
    mats.push_back(config_.distance_on_hard_labels ? to_hard_labels(client.last_labels)
                                                   : client.last_labels);
  return build_distance_matrix(mats);
}

void CosmosRun::cluster_round_one() {
  const DistanceMatrix distances = current_distances();
  resolved_b0_ = config_.b0_target_k > 0 ? calibrate_b0(distances, config_.b0_target_k) : config_.b0;
  server_.assignment = greedy_cluster(distances, resolved_b0_);
  frozen_assignment_ = server_.assignment.cluster_of;
  server_.cluster_models.resize(static_cast<std::size_t>(server_.assignment.num_clusters()));
  server_.aggregates.resize(server_.cluster_models.size());
  server_.downlink_cache.resize(server_.cluster_models.size());
}

void CosmosRun::server_distillation(int round) {
  const int k = server_.assignment.num_clusters();
  parallel_for(k, config_.workers, [&](int c) {
    std::vector<const PseudoLabelMatrix*> members;
    for (int i : server_.assignment.clusters[static_cast<std::size_t>(c)])
      members.push_back(&clients_[static_cast<std::size_t>(i)].last_labels);
    server_.aggregates[static_cast<std::size_t>(c)] = aggregate_cluster(members, config_.aggregation);

    auto& model = server_.cluster_models[static_cast<std::size_t>(c)];
    if (round == 1) model = server_factory_(c);  // later rounds fine-tune in place
    model->fit_soft(partition_.pool.points, server_.aggregates[static_cast<std::size_t>(c)], {},
                    config_.lambda, config_.reg, config_.server_distill_epochs, config_.lr_soft);
  });
}

void CosmosRun::downlink_and_client_distillation() {
  const Temperature temp{config_.temperature};
  const int k = server_.assignment.num_clusters();
  parallel_for(k, config_.workers, [&](int c) {
    server_.downlink_cache[static_cast<std::size_t>(c)] = predict_pseudolabels(
        *server_.cluster_models[static_cast<std::size_t>(c)], partition_.pool.points, temp);
  });
  for (int c = 0; c < k; ++c)
    dump_message("round" + std::to_string(completed_rounds_ + 1) + "_cluster" + std::to_string(c) +
                     "_down.cplm",
                 server_.downlink_cache[static_cast<std::size_t>(c)]);

  parallel_for(static_cast<int>(clients_.size()), config_.workers, [&](int i) {
    auto& client = clients_[static_cast<std::size_t>(i)];
    const auto& labels =
        server_.downlink_cache[static_cast<std::size_t>(server_.assignment.cluster_of[static_cast<std::size_t>(i)])];
    client.model->fit_soft(partition_.pool.points, labels, {}, config_.lambda, config_.reg,
                           config_.client_distill_epochs, config_.lr_soft);
  });
  for (auto& client : clients_) {
    const auto& labels =
        server_.downlink_cache[static_cast<std::size_t>(server_.assignment.cluster_of[static_cast<std::size_t>(client.id)])];
    ledger_.record_downlink(client.id, message_bytes(static_cast<std::uint64_t>(labels.rows()),
                                                     static_cast<std::uint64_t>(labels.cols())));
  }
}

RoundMetrics CosmosRun::collect_metrics(int round) {
  if (server_.assignment.cluster_of != frozen_assignment_)
    throw std::logic_error("protocol: cluster assignment changed after round 1");

  RoundMetrics metrics;
  metrics.round = round;

  std::vector<PseudoLabelMatrix> client_mats;
  client_mats.reserve(clients_.size());
  for (const auto& client : clients_) client_mats.push_back(client.last_labels);
  const DistanceMatrix distances = build_distance_matrix(client_mats);
  for (const auto& members : server_.assignment.clusters)
    metrics.cluster_bounds.push_back(cluster_bound(members, distances));

  const auto report = lemma1_check(client_mats, server_.aggregates, server_.assignment,
                                   partition_.pool.sealed, support_masks_);

  metrics.clients.reserve(clients_.size());
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    const auto& client = clients_[i];
    const auto& rec = report.records[i];
    ClientRoundRecord row;
    row.client_id = client.id;
    row.cluster_id = server_.assignment.cluster_of[i];
    const auto& h = *server_.cluster_models[static_cast<std::size_t>(row.cluster_id)];
    row.acc_server_model = client.eval_data.empty() ? kNaN : 1.0 - err(h, client.eval_data);
    row.acc_client_model = client.eval_data.empty() ? kNaN : 1.0 - err(*client.model, client.eval_data);
    row.err_on_ui = rec.supported > 0
                        ? err_masked(client.last_labels, partition_.pool.sealed.labels, support_masks_[i])
                        : kNaN;
    row.gamma_hat = rec.inconclusive ? kNaN : rec.gamma_hat;
    row.lemma_lhs = rec.inconclusive ? kNaN : rec.lhs;
    row.lemma_rhs = rec.inconclusive ? kNaN : rec.rhs;
    row.lemma_holds = rec.inconclusive ? -1 : (rec.holds ? 1 : 0);
    row.uplink_bytes = ledger_.round_uplink[i];
    row.downlink_bytes = ledger_.round_downlink[i];
    metrics.clients.push_back(row);
  }
  metrics.cumulative_uplink = ledger_.total_uplink();
  metrics.cumulative_downlink = ledger_.total_downlink();
  return metrics;
}

DistanceMatrix CosmosRun::round_one_distances() {
  if (completed_rounds_ != 0) throw std::logic_error("round_one_distances: run already started");
  init_clients();
  ledger_.begin_round();
  local_training(1);
  upload_labels();
  return current_distances();
}

RoundMetrics CosmosRun::run_ptc() {
  if (completed_rounds_ != 0) throw std::logic_error("run_ptc: already executed");
  init_clients();
  ledger_.begin_round();
  local_training(1);
  upload_labels();
  cluster_round_one();
  server_distillation(1);
  downlink_and_client_distillation();
  auto metrics = collect_metrics(1);
  completed_rounds_ = 1;
  return metrics;
}

RoundMetrics CosmosRun::run_ifft_round(int round) {
  if (completed_rounds_ < 1) throw std::logic_error("run_ifft_round: run_ptc first");
  if (round != completed_rounds_ + 1)
    throw std::logic_error("run_ifft_round: rounds must advance by one");
  ledger_.begin_round();
  local_training(round);
  upload_labels();
  server_distillation(round);
  downlink_and_client_distillation();
  auto metrics = collect_metrics(round);
  completed_rounds_ = round;
  return metrics;
}

std::vector<RoundMetrics> CosmosRun::run_all(
    const std::function<void(const RoundMetrics&)>& on_round) {
  std::vector<RoundMetrics> history;
  history.reserve(static_cast<std::size_t>(config_.rounds));
  history.push_back(run_ptc());
  if (on_round) on_round(history.back());
  for (int t = 2; t <= config_.rounds; ++t) {
    history.push_back(run_ifft_round(t));
    if (on_round) on_round(history.back());
  }
  return history;
}

double CosmosRun::current_personalization_risk() const {
  std::vector<const Predictor*> models;
  for (const auto& m : server_.cluster_models) models.push_back(m.get());
  std::vector<Dataset> evals;
  for (const auto& client : clients_) evals.push_back(client.eval_data);
  return personalization_risk(models, server_.assignment.cluster_of, evals);
}

void CosmosRun::dump_message(const std::string& name, const PseudoLabelMatrix& m) const {
  if (config_.dump_dir.empty()) return;
  std::filesystem::create_directories(config_.dump_dir);
  const auto bytes = encode_pseudo_labels(m);
  std::ofstream out(std::filesystem::path(config_.dump_dir) / name, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<RoundMetrics> run_baseline_local_only(
    const Partition& partition, const ProtocolConfig& config,
    const std::function<void(const RoundMetrics&)>& on_round) {
  // same deterministic splits and model seeds as the full protocol, but
  // every epoch is spent on the local dataset and nothing is exchanged
  const ProtocolConfig& cfg = config;
  struct Local {
    std::unique_ptr<Predictor> model;
    Dataset train_data;
    Dataset eval_data;
  };

  const Partition& part = partition;
  const int n = static_cast<int>(part.client_datasets.size());
  std::vector<Local> locals(static_cast<std::size_t>(n));
  std::vector<std::vector<bool>> masks;
  for (int i = 0; i < n; ++i) {
    const int g = part.group_of_client[static_cast<std::size_t>(i)];
    masks.push_back(support_mask(part.classes_of_group[static_cast<std::size_t>(g)], part.pool.sealed));
    locals[static_cast<std::size_t>(i)].model =
        make_backend(cfg.client_backend, part.feature_dim, cfg.client_hidden, part.num_classes,
                     derive_seed(cfg.seed, kClientKeyBase + static_cast<std::uint64_t>(i), 0));
    auto [train, eval] = split_local_data(part.client_datasets[static_cast<std::size_t>(i)],
                                          cfg.eval_fraction, cfg.seed, i);
    locals[static_cast<std::size_t>(i)].train_data = std::move(train);
    locals[static_cast<std::size_t>(i)].eval_data = std::move(eval);
  }

  std::vector<RoundMetrics> history;
  const Temperature temp{cfg.temperature};
  for (int round = 1; round <= cfg.rounds; ++round) {
    // same per-round epoch budget as the full protocol, all spent locally
    const int epochs = (round == 1 ? cfg.local_pretrain_epochs : cfg.local_finetune_epochs) +
                       cfg.client_distill_epochs;
    parallel_for(n, cfg.workers, [&](int i) {
      auto& local = locals[static_cast<std::size_t>(i)];
      if (!local.train_data.empty() && epochs > 0)
        local.model->fit_hard(local.train_data, epochs, cfg.lr_hard);
    });

    RoundMetrics metrics;
    metrics.round = round;
    for (int i = 0; i < n; ++i) {
      auto& local = locals[static_cast<std::size_t>(i)];
      ClientRoundRecord row;
      row.client_id = i;
      row.cluster_id = -1;
      // the deployed model is the client's own; both accuracy columns track it
      row.acc_client_model =
          local.eval_data.empty() ? kNaN : 1.0 - err(*local.model, local.eval_data);
      row.acc_server_model = row.acc_client_model;
      const auto labels = predict_pseudolabels(*local.model, part.pool.points, temp);
      int supported = 0;
      for (bool b : masks[static_cast<std::size_t>(i)]) supported += b ? 1 : 0;
      row.err_on_ui = supported > 0
                          ? err_masked(labels, part.pool.sealed.labels, masks[static_cast<std::size_t>(i)])
                          : kNaN;
      row.gamma_hat = kNaN;
      row.lemma_lhs = kNaN;
      row.lemma_rhs = kNaN;
      row.lemma_holds = -1;
      metrics.clients.push_back(row);
    }
    history.push_back(metrics);
    if (on_round) on_round(history.back());
  }
  return history;
}

std::vector<RoundMetrics> run_ablation_single_cluster(
    const Partition& partition, const ProtocolConfig& config,
    const std::function<void(const RoundMetrics&)>& on_round) {
  ProtocolConfig cfg = config;
  cfg.b0 = std::numeric_limits<double>::infinity();
  cfg.b0_target_k = 0;
  CosmosRun run(partition, cfg);
  return run.run_all(on_round);
}

}  // namespace cosmos
