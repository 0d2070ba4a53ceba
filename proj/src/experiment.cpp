#include "cosmos/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace cosmos {

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_b0(double b0) {
  if (std::isinf(b0)) return "inf";
  return format_double_exact(b0);
}

double parse_b0(const std::string& v) {
  if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  return std::stod(v);
}

}  // namespace

const char* aggregation_name(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::kMean: return "mean";
    case AggregationRule::kMedian: return "median";
    case AggregationRule::kMax: return "max";
  }
  return "mean";
}

AggregationRule parse_aggregation(const std::string& name) {
  if (name == "mean") return AggregationRule::kMean;
  if (name == "median") return AggregationRule::kMedian;
  if (name == "max") return AggregationRule::kMax;
  throw std::runtime_error("unknown aggregation rule '" + name + "' (mean|median|max)");
}

const char* backend_name(BackendKind kind) {
  return kind == BackendKind::kSoftmax ? "softmax" : "mlp";
}

BackendKind parse_backend(const std::string& name) {
  if (name == "softmax") return BackendKind::kSoftmax;
  if (name == "mlp") return BackendKind::kMlp;
  throw std::runtime_error("unknown backend '" + name + "' (softmax|mlp)");
}

const char* mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::kCosmos: return "cosmos";
    case RunMode::kLocalOnly: return "local_only";
    case RunMode::kSingleCluster: return "single_cluster";
  }
  return "cosmos";
}

RunMode parse_mode(const std::string& name) {
  if (name == "cosmos") return RunMode::kCosmos;
  if (name == "local_only") return RunMode::kLocalOnly;
  if (name == "single_cluster") return RunMode::kSingleCluster;
  throw std::runtime_error("unknown run mode '" + name + "' (cosmos|local_only|single_cluster)");
}

ExperimentSetup resolve_setup(const Config& config) {
  ExperimentSetup s;
  s.source = config.get_string("data", "source", s.source);
  if (s.source != "synthetic" && s.source != "csv")
    throw std::runtime_error("config: data.source must be synthetic or csv");
  s.num_classes = config.get_int("data", "num_classes", s.num_classes);
  s.feature_dim = config.get_int("data", "feature_dim", s.feature_dim);
  s.samples_per_class = config.get_int("data", "samples_per_class", s.samples_per_class);
  s.class_separation = config.get_double("data", "class_separation", s.class_separation);
  s.csv_path = config.get_string("data", "csv_path", s.csv_path);
  s.csv_has_header = config.get_bool("data", "csv_has_header", s.csv_has_header);

  s.pspec.num_clients = config.get_int("partition", "clients", 12);
  s.pspec.num_groups = config.get_int("partition", "groups", 3);
  s.pspec.dirichlet_alpha = config.get_double("partition", "dirichlet_alpha", 3.0);
  s.pspec.pool_fraction = config.get_double("partition", "pool_fraction", 0.03);
  s.pspec.public_fraction = config.get_double("partition", "public_fraction", 0.20);

  auto& p = s.protocol;
  p.rounds = config.get_int("protocol", "rounds", p.rounds);
  p.local_pretrain_epochs = config.get_int("protocol", "pretrain_epochs", 250);
  p.local_finetune_epochs = config.get_int("protocol", "finetune_epochs", 30);
  p.server_distill_epochs = config.get_int("protocol", "server_distill_epochs", 700);
  p.client_distill_epochs = config.get_int("protocol", "client_distill_epochs", 150);
  p.lambda = config.get_double("protocol", "lambda", p.lambda);
  p.temperature = config.get_double("protocol", "temperature", p.temperature);
  p.aggregation = parse_aggregation(config.get_string("protocol", "aggregation", "mean"));
  p.b0 = parse_b0(config.get_string("protocol", "b0", "inf"));
  p.b0_target_k = config.get_int("protocol", "b0_target_k", 3);
  p.lr_hard = config.get_double("protocol", "lr_hard", p.lr_hard);
  p.lr_soft = config.get_double("protocol", "lr_soft", p.lr_soft);
  const std::string radius = config.get_string("protocol", "reg_radius", "auto");
  p.reg.radius = radius == "auto" ? -1.0 : std::stod(radius);
  p.reg.num_neighbors = config.get_int("protocol", "reg_neighbors", p.reg.num_neighbors);
  p.reg.kind = config.get_string("protocol", "reg_transform", "gaussian_ball") == "none"
                   ? RegConfig::Transform::kNone
                   : RegConfig::Transform::kGaussianBall;
  p.eval_fraction = config.get_double("protocol", "eval_fraction", 0.4);
  p.distance_on_hard_labels =
      config.get_bool("protocol", "distance_on_hard_labels", p.distance_on_hard_labels);

  p.client_backend = parse_backend(config.get_string("models", "client_backend", "mlp"));
  p.client_hidden = config.get_int("models", "client_hidden", 24);
  p.server_backend = parse_backend(config.get_string("models", "server_backend", "mlp"));
  p.server_hidden = config.get_int("models", "server_hidden", 40);

  p.seed = config.get_u64("run", "seed", 0);
  s.pspec.seed = p.seed;
  p.workers = config.get_int("run", "workers", 1);
  p.dump_dir = config.get_string("run", "dump_dir", "");
  s.mode = parse_mode(config.get_string("run", "mode", "cosmos"));
  return s;
}

Config materialize(const ExperimentSetup& s) {
  Config c;
  c.set("data", "source", s.source);
  c.set("data", "num_classes", std::to_string(s.num_classes));
  c.set("data", "feature_dim", std::to_string(s.feature_dim));
  c.set("data", "samples_per_class", std::to_string(s.samples_per_class));
  c.set("data", "class_separation", format_double_exact(s.class_separation));
  if (!s.csv_path.empty()) {
    c.set("data", "csv_path", s.csv_path);
    c.set("data", "csv_has_header", s.csv_has_header ? "true" : "false");
  }

  c.set("partition", "clients", std::to_string(s.pspec.num_clients));
  c.set("partition", "groups", std::to_string(s.pspec.num_groups));
  c.set("partition", "dirichlet_alpha", format_double_exact(s.pspec.dirichlet_alpha));
  c.set("partition", "pool_fraction", format_double_exact(s.pspec.pool_fraction));
  c.set("partition", "public_fraction", format_double_exact(s.pspec.public_fraction));

  const auto& p = s.protocol;
  c.set("protocol", "rounds", std::to_string(p.rounds));
  c.set("protocol", "pretrain_epochs", std::to_string(p.local_pretrain_epochs));
  c.set("protocol", "finetune_epochs", std::to_string(p.local_finetune_epochs));
  c.set("protocol", "server_distill_epochs", std::to_string(p.server_distill_epochs));
  c.set("protocol", "client_distill_epochs", std::to_string(p.client_distill_epochs));
  c.set("protocol", "lambda", format_double_exact(p.lambda));
  c.set("protocol", "temperature", format_double_exact(p.temperature));
  c.set("protocol", "aggregation", aggregation_name(p.aggregation));
  c.set("protocol", "b0", format_b0(p.b0));
  c.set("protocol", "b0_target_k", std::to_string(p.b0_target_k));
  c.set("protocol", "lr_hard", format_double_exact(p.lr_hard));
  c.set("protocol", "lr_soft", format_double_exact(p.lr_soft));
  c.set("protocol", "reg_radius", p.reg.radius < 0.0 ? "auto" : format_double_exact(p.reg.radius));
  c.set("protocol", "reg_neighbors", std::to_string(p.reg.num_neighbors));
  c.set("protocol", "reg_transform",
        p.reg.kind == RegConfig::Transform::kNone ? "none" : "gaussian_ball");
  c.set("protocol", "eval_fraction", format_double_exact(p.eval_fraction));
  c.set("protocol", "distance_on_hard_labels", p.distance_on_hard_labels ? "true" : "false");

  c.set("models", "client_backend", backend_name(p.client_backend));
  c.set("models", "client_hidden", std::to_string(p.client_hidden));
  c.set("models", "server_backend", backend_name(p.server_backend));
  c.set("models", "server_hidden", std::to_string(p.server_hidden));

  c.set("run", "seed", std::to_string(p.seed));
  c.set("run", "workers", std::to_string(p.workers));
  c.set("run", "mode", mode_name(s.mode));
  if (!p.dump_dir.empty()) c.set("run", "dump_dir", p.dump_dir);
  return c;
}

Dataset build_dataset(const ExperimentSetup& s) {
  if (s.source == "csv") {
    if (s.csv_path.empty()) throw std::runtime_error("config: data.csv_path is required");
    return load_csv(s.csv_path, s.num_classes, s.csv_has_header);
  }
  return generate_synthetic(s.num_classes, s.feature_dim, s.samples_per_class, s.class_separation,
                            s.protocol.seed);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string format_double_exact(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  for (int precision : {9, 12, 15, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_metrics_header(std::ostream& out) {
  out << "round,client_id,cluster_id,acc_server_model,acc_client_model,err_on_Ui,"
         "uplink_bytes,downlink_bytes,lemma_lhs,lemma_rhs,lemma_holds\n";
}

void write_metrics_rows(std::ostream& out, const RoundMetrics& metrics) {
  for (const auto& c : metrics.clients) {
    out << metrics.round << ',' << c.client_id << ',' << c.cluster_id << ','
        << format_double(c.acc_server_model) << ',' << format_double(c.acc_client_model) << ','
        << format_double(c.err_on_ui) << ',' << c.uplink_bytes << ',' << c.downlink_bytes << ','
        << format_double(c.lemma_lhs) << ',' << format_double(c.lemma_rhs) << ',' << c.lemma_holds
        << '\n';
  }
}

RunOutputs run_experiment(const ExperimentSetup& setup, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const Dataset dataset = build_dataset(setup);
  Partition part = partition(dataset, setup.pspec);

  RunOutputs outputs;
  outputs.metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  outputs.manifest_path = (fs::path(out_dir) / "manifest.ini").string();
  outputs.summary_path = (fs::path(out_dir) / "summary.txt").string();

  Config manifest = materialize(setup);
  manifest.set("manifest", "version", kVersion);
  manifest.set("manifest", "started_at", timestamp_utc());
  manifest.set("manifest", "metrics", "metrics.csv");

  std::ofstream csv(outputs.metrics_path, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + outputs.metrics_path);
  write_metrics_header(csv);
  auto on_round = [&](const RoundMetrics& m) {
    write_metrics_rows(csv, m);
    csv.flush();  // keep a usable partial file if a later round fails
  };

  if (setup.mode == RunMode::kLocalOnly) {
    {
      std::ofstream mf(outputs.manifest_path, std::ios::binary);
      mf << manifest.serialize();
    }
    outputs.history = run_baseline_local_only(part, setup.protocol, on_round);
    outputs.num_clusters = 0;
    double risk = 0.0;
    for (const auto& c : outputs.history.back().clients) risk += 1.0 - c.acc_server_model;
    outputs.personalization_risk = risk / static_cast<double>(outputs.history.back().clients.size());
  } else {
    ProtocolConfig cfg = setup.protocol;
    if (setup.mode == RunMode::kSingleCluster) {
      cfg.b0 = std::numeric_limits<double>::infinity();
      cfg.b0_target_k = 0;
    }
    CosmosRun run(std::move(part), cfg);
    manifest.set("protocol", "reg_radius", format_double_exact(run.resolved_radius()));
    {
      std::ofstream mf(outputs.manifest_path, std::ios::binary);
      mf << manifest.serialize();
    }
    outputs.history = run.run_all(on_round);
    outputs.num_clusters = run.server().assignment.num_clusters();
    outputs.personalization_risk = run.current_personalization_risk();
    outputs.resolved_b0 = run.resolved_b0();
    outputs.resolved_radius = run.resolved_radius();
    outputs.total_uplink = run.ledger().total_uplink();
    outputs.total_downlink = run.ledger().total_downlink();
    manifest.set("manifest", "resolved_b0", format_b0(outputs.resolved_b0));
  }
  csv.close();

  manifest.set("manifest", "finished_at", timestamp_utc());
  {
    std::ofstream mf(outputs.manifest_path, std::ios::binary);
    mf << manifest.serialize();
  }

  std::ofstream summary(outputs.summary_path, std::ios::binary);
  summary << "mode: " << mode_name(setup.mode) << '\n';
  if (setup.mode != RunMode::kLocalOnly) {
    summary << "clusters (K): " << outputs.num_clusters << '\n';
    summary << "b0: " << format_b0(outputs.resolved_b0) << '\n';
  }
  for (const auto& m : outputs.history) {
    summary << "round " << m.round << ": mean_server_acc=" << format_double(m.mean_server_accuracy())
            << " mean_client_acc=" << format_double(m.mean_client_accuracy());
    if (!m.cluster_bounds.empty()) {
      double worst = 0.0;
      for (double b : m.cluster_bounds) worst = std::max(worst, b);
      summary << " max_cluster_bound=" << format_double(worst);
    }
    summary << '\n';
  }
  summary << "final personalization_risk: " << format_double(outputs.personalization_risk) << '\n';
  summary << "total uplink bytes: " << outputs.total_uplink << '\n';
  summary << "total downlink bytes: " << outputs.total_downlink << '\n';
  return outputs;
}

}  // namespace cosmos
