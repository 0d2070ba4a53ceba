#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cosmos/config.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/partition.hpp"
#include "cosmos/protocol.hpp"

namespace cosmos {

enum class RunMode { kCosmos, kLocalOnly, kSingleCluster };

// Fully materialized experiment description: every default resolved, so a
// serialized setup reproduces the run bit for bit.
struct ExperimentSetup {
  std::string source = "synthetic";  // synthetic | csv
  int num_classes = 6;
  int feature_dim = 16;
  int samples_per_class = 250;
  double class_separation = 0.45;
  std::string csv_path;
  bool csv_has_header = false;

  PartitionSpec pspec;
  ProtocolConfig protocol;
  RunMode mode = RunMode::kCosmos;
};

ExperimentSetup resolve_setup(const Config& config);
Config materialize(const ExperimentSetup& setup);

Dataset build_dataset(const ExperimentSetup& setup);

const char* aggregation_name(AggregationRule rule);
AggregationRule parse_aggregation(const std::string& name);
const char* backend_name(BackendKind kind);
BackendKind parse_backend(const std::string& name);
const char* mode_name(RunMode mode);
RunMode parse_mode(const std::string& name);

// Stable float formatting for CSV cells ("%.9g"; NaN prints as "nan").
std::string format_double(double v);

// Shortest decimal form that parses back to exactly the same double; used
// for manifest values so a rerun reproduces the run bit for bit.
std::string format_double_exact(double v);

void write_metrics_header(std::ostream& out);
void write_metrics_rows(std::ostream& out, const RoundMetrics& metrics);

struct RunOutputs {
  std::vector<RoundMetrics> history;
  int num_clusters = 0;      // 0 for the local-only baseline
  double personalization_risk = 0.0;
  double resolved_b0 = 0.0;
  double resolved_radius = 0.0;
  std::uint64_t total_uplink = 0;
  std::uint64_t total_downlink = 0;
  std::string metrics_path;
  std::string manifest_path;
  std::string summary_path;
};

// Executes a full experiment: writes the manifest before training begins,
// streams metrics.csv one round at a time, and finishes with a summary.
RunOutputs run_experiment(const ExperimentSetup& setup, const std::string& out_dir);

}  // namespace cosmos
