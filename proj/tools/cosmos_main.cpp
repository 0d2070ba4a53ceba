#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cosmos/clustering.hpp"
#include "cosmos/config.hpp"
#include "cosmos/experiment.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/protocol.hpp"
#include "cosmos/wire.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string default_out_dir(const std::string& flag_value, const cosmos::Config& cfg) {
  if (!flag_value.empty()) return flag_value;
  const std::string from_cfg = cfg.get_string("run", "out_dir", "");
  if (!from_cfg.empty()) return from_cfg;
  if (const char* env = std::getenv("COSMOS_OUT_DIR"); env && *env) return env;
  return "cosmos_out";
}

std::string format_b0_value(double b0) {
  if (std::isinf(b0)) return "inf";
  return cosmos::format_double(b0);
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir_flag) {
  cosmos::ExperimentSetup setup;
  std::string out_dir;
  try {
    cosmos::Config cfg =
        config_path.empty() ? cosmos::Config{} : cosmos::Config::parse_file(config_path);
    for (const auto& ov : overrides) cfg.apply_override(ov);
    setup = cosmos::resolve_setup(cfg);
    out_dir = default_out_dir(out_dir_flag, cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const auto outputs = cosmos::run_experiment(setup, out_dir);
    std::ifstream summary(outputs.summary_path);
    std::cout << summary.rdbuf();
    std::cout << "metrics: " << outputs.metrics_path << '\n';
    std::cout << "manifest: " << outputs.manifest_path << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_calibrate_b0(const std::string& config_path, int target_k,
                     const std::vector<std::string>& overrides, const std::string& out_dir_flag) {
  cosmos::ExperimentSetup setup;
  std::string out_dir;
  try {
    cosmos::Config cfg =
        config_path.empty() ? cosmos::Config{} : cosmos::Config::parse_file(config_path);
    for (const auto& ov : overrides) cfg.apply_override(ov);
    setup = cosmos::resolve_setup(cfg);
    out_dir = default_out_dir(out_dir_flag, cfg);
    if (target_k < 1 || target_k > setup.pspec.num_clients) {
      std::cerr << "target K must lie in [1, " << setup.pspec.num_clients << "]\n";
      return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const cosmos::Dataset dataset = cosmos::build_dataset(setup);
    cosmos::Partition part = cosmos::partition(dataset, setup.pspec);
    cosmos::CosmosRun run(std::move(part), setup.protocol);
    const cosmos::DistanceMatrix distances = run.round_one_distances();

    std::filesystem::create_directories(out_dir);
    const auto dist_path = std::filesystem::path(out_dir) / "distances.csv";
    std::ofstream dist_csv(dist_path, std::ios::binary);
    cosmos::write_distance_csv(distances, dist_csv);

    const auto sweep = cosmos::sweep_b0(distances);
    std::printf("%12s  %4s\n", "b0", "K");
    for (const auto& [b0, k] : sweep.table) std::printf("%12.6g  %4d\n", b0, k);

    const double b0 = cosmos::calibrate_b0(distances, target_k);
    std::printf("recommended b0 for K >= %d: %s\n", target_k, format_b0_value(b0).c_str());
    std::cout << "distance matrix: " << dist_path.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "calibration failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int cmd_commcost(std::uint64_t pool_size, std::uint64_t classes, int rounds, int clients,
                 int clusters, std::uint64_t precision) {
  try {
    const std::uint64_t payload = cosmos::comm_payload_bytes(pool_size, classes, precision);
    const std::uint64_t with_header = cosmos::kWireHeaderBytes + payload;
    std::printf("pseudo-label message: pool=%llu classes=%llu precision=%lluB\n",
                static_cast<unsigned long long>(pool_size), static_cast<unsigned long long>(classes),
                static_cast<unsigned long long>(precision));
    std::printf("  payload per message:      %llu bytes (%s MB)\n",
                static_cast<unsigned long long>(payload), cosmos::format_mib(payload).c_str());
    std::printf("  on the wire (with header): %llu bytes (%s MB)\n",
                static_cast<unsigned long long>(with_header),
                cosmos::format_mib(with_header).c_str());
    std::printf("  per client per round (up+down): %llu bytes (%s MB)\n",
                static_cast<unsigned long long>(2 * with_header),
                cosmos::format_mib(2 * with_header).c_str());
    if (rounds > 0 && clients > 0) {
      const std::uint64_t per_client = 2ull * static_cast<std::uint64_t>(rounds) * with_header;
      const std::uint64_t total = per_client * static_cast<std::uint64_t>(clients);
      std::printf("  per client over %d rounds: %llu bytes (%s MB)\n", rounds,
                  static_cast<unsigned long long>(per_client),
                  cosmos::format_mib(per_client).c_str());
      std::printf("  all %d clients, %d rounds: %llu bytes (%s MB)\n", clients, rounds,
                  static_cast<unsigned long long>(total), cosmos::format_mib(total).c_str());
    }
    if (clusters > 0)
      std::printf("  distinct server messages per round: %d (one per cluster)\n", clusters);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "commcost failed: " << e.what() << '\n';
    return kExitUsage;
  }
}

nlohmann::json matrix_to_json(const cosmos::PseudoLabelMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_verify_lemma(int trials, std::uint64_t seed, const std::string& out_dir_flag) {
  if (trials < 0) {
    std::cerr << "trials must be >= 0\n";
    return kExitUsage;
  }
  if (trials == 0) {
    std::cout << "warning: 0 trials requested; vacuous pass\n";
    return kExitOk;
  }
  try {
    cosmos::LemmaTrialOptions options;
    options.trials = trials;
    options.seed = seed;
    const auto outcome = cosmos::run_lemma_trials(options);
    std::printf("trials: %d  records checked: %d  inconclusive: %d  violations: %d\n",
                outcome.trials_run, outcome.records_checked, outcome.inconclusive,
                outcome.violations);
    if (outcome.violations == 0) {
      std::cout << "aggregation error bound held in every conclusive record\n";
      return kExitOk;
    }
    const std::string out_dir = default_out_dir(out_dir_flag, cosmos::Config{});
    std::filesystem::create_directories(out_dir);
    const auto path = std::filesystem::path(out_dir) / "counterexample.json";
    const auto& ce = *outcome.first_violation;
    nlohmann::json j;
    j["trial"] = ce.trial;
    j["client"] = ce.record.client;
    j["lhs"] = ce.record.lhs;
    j["rhs"] = ce.record.rhs;
    j["gamma_hat"] = ce.record.gamma_hat;
    j["bound_b"] = ce.record.bound_b;
    j["supported"] = ce.record.supported;
    j["labels"] = ce.labels;
    j["aggregate"] = matrix_to_json(ce.aggregate);
    j["client_labels"] = nlohmann::json::array();
    for (const auto& m : ce.client_labels) j["client_labels"].push_back(matrix_to_json(m));
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    std::cerr << "violation found; counterexample written to " << path.string() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "verification failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cosmos: clustered model-agnostic federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;

  auto add_override_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file");
    cmd->add_option("--out-dir", out_dir, "output directory (default: $COSMOS_OUT_DIR)");
    cmd->add_option("--set", overrides, "override a config value, e.g. --set protocol.lambda=2");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { overrides.push_back("run.seed=" + std::to_string(v)); },
        "root seed");
    cmd->add_option_function<int>(
        "--rounds", [&](int v) { overrides.push_back("protocol.rounds=" + std::to_string(v)); },
        "communication rounds T");
    cmd->add_option_function<int>(
        "--clients", [&](int v) { overrides.push_back("partition.clients=" + std::to_string(v)); },
        "number of clients N");
    cmd->add_option_function<double>(
        "--b0", [&](double v) { overrides.push_back("protocol.b0=" + format_b0_value(v)); },
        "clustering threshold");
    cmd->add_option_function<double>(
        "--lambda",
        [&](double v) { overrides.push_back("protocol.lambda=" + cosmos::format_double(v)); },
        "consistency regularizer weight");
    cmd->add_option_function<double>(
        "--temperature",
        [&](double v) { overrides.push_back("protocol.temperature=" + cosmos::format_double(v)); },
        "pseudo-label temperature");
    cmd->add_option_function<std::string>(
        "--agg", [&](std::string v) { overrides.push_back("protocol.aggregation=" + v); },
        "aggregation rule (mean|median|max)");
    cmd->add_option_function<int>(
        "--workers", [&](int v) { overrides.push_back("run.workers=" + std::to_string(v)); },
        "worker threads (never changes results)");
    cmd->add_option_function<std::string>(
        "--mode", [&](std::string v) { overrides.push_back("run.mode=" + v); },
        "cosmos|local_only|single_cluster");
  };

  auto* run = app.add_subcommand("run", "execute an experiment and write metrics.csv");
  add_override_flags(run);

  auto* calibrate = app.add_subcommand("calibrate-b0", "sweep b0 against the round-1 distances");
  int target_k = 0;
  calibrate->add_option("--target-k", target_k, "desired minimum cluster count")->required();
  add_override_flags(calibrate);

  auto* commcost = app.add_subcommand("commcost", "closed-form pseudo-label bandwidth table");
  std::uint64_t pool_size = 0, classes = 0, precision = 4;
  int cc_rounds = 0, cc_clients = 0, cc_clusters = 0;
  commcost->add_option("--pool-size", pool_size, "public pool size n")->required();
  commcost->add_option("--classes", classes, "class count M")->required();
  commcost->add_option("--rounds", cc_rounds, "rounds for totals");
  commcost->add_option("--clients", cc_clients, "clients for totals");
  commcost->add_option("--clusters", cc_clusters, "cluster count (informational)");
  commcost->add_option("--precision", precision, "bytes per value (default 4)");

  auto* verify = app.add_subcommand("verify-lemma", "randomized aggregation error bound check");
  int trials = 1000;
  std::uint64_t verify_seed = 0;
  verify->add_option("--trials", trials, "number of random instances");
  verify->add_option("--seed", verify_seed, "generator seed");
  verify->add_option("--out-dir", out_dir, "where to write a counterexample, if any");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (run->parsed()) return cmd_run(config_path, overrides, out_dir);
  if (calibrate->parsed()) return cmd_calibrate_b0(config_path, target_k, overrides, out_dir);
  if (commcost->parsed())
    return cmd_commcost(pool_size, classes, cc_rounds, cc_clients, cc_clusters, precision);
  if (verify->parsed()) return cmd_verify_lemma(trials, verify_seed, out_dir);
  return kExitUsage;
}
