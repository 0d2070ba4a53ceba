#pragma once

#include <cstdint>
#include <vector>

#include "cosmos/dataset.hpp"

namespace cosmos {

struct PartitionSpec {
  int num_clients = 0;
  double dirichlet_alpha = 5.0;
  int num_groups = 5;
  double pool_fraction = 0.10;
  double public_fraction = 0.20;
  std::uint64_t seed = 0;
};

// Labels of the public pool, kept in an evaluation-only side channel.
// Protocol code never takes this type; metrics code takes it explicitly.
struct SealedLabels {
  std::vector<int> labels;
};

struct PublicPool {
  std::vector<std::vector<double>> points;  // what the protocol sees
  SealedLabels sealed;
};

struct Partition {
  std::vector<Dataset> client_datasets;
  PublicPool pool;
  std::vector<int> group_of_client;
  std::vector<std::vector<int>> classes_of_group;
  int num_classes = 0;
  int feature_dim = 0;
};

// Non-IID split: hold out public_fraction of all examples as the unlabeled
// pool, assign classes and clients to groups round-robin, divide each
// class among its group's clients by a Dirichlet(alpha) draw, then pool
// pool_fraction of every client's samples, shuffle, and redistribute
// across all clients. Deterministic given the spec's seed.
Partition partition(const Dataset& dataset, const PartitionSpec& spec);

}  // namespace cosmos
