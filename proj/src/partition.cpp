#include "cosmos/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cosmos/random.hpp"

namespace cosmos {

namespace {

void validate(const Dataset& dataset, const PartitionSpec& spec) {
  if (dataset.empty()) throw std::invalid_argument("partition: dataset is empty");
  if (spec.num_clients < 1) throw std::invalid_argument("partition: num_clients must be >= 1");
  if (spec.num_groups < 1) throw std::invalid_argument("partition: num_groups must be >= 1");
  if (spec.num_clients < spec.num_groups)
    throw std::invalid_argument("partition: fewer clients than groups");
  if (!(spec.dirichlet_alpha > 0.0))
    throw std::invalid_argument("partition: dirichlet_alpha must be positive");
  if (spec.pool_fraction < 0.0 || spec.pool_fraction > 1.0)
    throw std::invalid_argument("partition: pool_fraction outside [0, 1]");
  if (spec.public_fraction < 0.0 || spec.public_fraction > 1.0)
    throw std::invalid_argument("partition: public_fraction outside [0, 1]");
  const auto counts = dataset.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] == 0)
      throw std::invalid_argument("partition: class " + std::to_string(c) + " has no samples");
}

}  // namespace

Partition partition(const Dataset& dataset, const PartitionSpec& spec) {
  validate(dataset, spec);

  const int num_classes = dataset.num_classes();
  const int n_clients = spec.num_clients;
  const int n_groups = spec.num_groups;
  RngStream rng(spec.seed, kDataKey, /*subkey=*/2);

  Partition out;
  out.num_classes = num_classes;
  out.feature_dim = dataset.feature_dim();

  // classes and clients are assigned to groups round-robin by index
  out.classes_of_group.assign(static_cast<std::size_t>(n_groups), {});
  std::vector<int> group_of_class(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    group_of_class[static_cast<std::size_t>(c)] = c % n_groups;
    out.classes_of_group[static_cast<std::size_t>(c % n_groups)].push_back(c);
  }
  out.group_of_client.resize(static_cast<std::size_t>(n_clients));
  std::vector<std::vector<int>> clients_of_group(static_cast<std::size_t>(n_groups));
  for (int i = 0; i < n_clients; ++i) {
    out.group_of_client[static_cast<std::size_t>(i)] = i % n_groups;
    clients_of_group[static_cast<std::size_t>(i % n_groups)].push_back(i);
  }

  // the public pool is drawn uniformly from the full dataset first, so it
  // reflects the global distribution
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const std::size_t pool_count = static_cast<std::size_t>(
      std::llround(spec.public_fraction * static_cast<double>(dataset.size())));

  out.pool.points.reserve(pool_count);
  out.pool.sealed.labels.reserve(pool_count);
  for (std::size_t i = 0; i < pool_count; ++i) {
    const Example& ex = dataset[order[i]];
    out.pool.points.push_back(ex.features);
    out.pool.sealed.labels.push_back(ex.label);
  }

  // remaining indices bucketed by class, preserving shuffled order
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = pool_count; i < order.size(); ++i)
    by_class[static_cast<std::size_t>(dataset[order[i]].label)].push_back(order[i]);

  // per class, a Dirichlet draw over the class's group members fixes the
  // slice boundaries
  std::vector<std::vector<std::size_t>> assigned(static_cast<std::size_t>(n_clients));
  for (int c = 0; c < num_classes; ++c) {
    const auto& samples = by_class[static_cast<std::size_t>(c)];
    const auto& members = clients_of_group[static_cast<std::size_t>(group_of_class[static_cast<std::size_t>(c)])];
    const auto props = rng.dirichlet(spec.dirichlet_alpha, members.size());
    std::size_t start = 0;
    double cum = 0.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      cum += props[j];
      std::size_t end = (j + 1 == members.size())
                            ? samples.size()
                            : static_cast<std::size_t>(std::llround(cum * static_cast<double>(samples.size())));
      if (end > samples.size()) end = samples.size();
      if (end < start) end = start;
      for (std::size_t s = start; s < end; ++s)
        assigned[static_cast<std::size_t>(members[j])].push_back(samples[s]);
      start = end;
    }
  }

  // limited cross-group exposure: siphon off a fraction of every client's
  // samples, shuffle, and deal them back round-robin
  if (spec.pool_fraction > 0.0) {
    std::vector<std::size_t> spill;
    for (int i = 0; i < n_clients; ++i) {
      auto& local = assigned[static_cast<std::size_t>(i)];
      const std::size_t take = static_cast<std::size_t>(
          std::llround(spec.pool_fraction * static_cast<double>(local.size())));
      if (take == 0) continue;
      rng.shuffle(local);
      for (std::size_t s = local.size() - take; s < local.size(); ++s) spill.push_back(local[s]);
      local.resize(local.size() - take);
    }
    rng.shuffle(spill);
    for (std::size_t s = 0; s < spill.size(); ++s)
      assigned[s % static_cast<std::size_t>(n_clients)].push_back(spill[s]);
  }

  out.client_datasets.reserve(static_cast<std::size_t>(n_clients));
  for (int i = 0; i < n_clients; ++i) {
    Dataset d(num_classes, dataset.feature_dim());
    d.reserve(assigned[static_cast<std::size_t>(i)].size());
    for (std::size_t idx : assigned[static_cast<std::size_t>(i)]) {
      d.add(dataset[idx]);
    }
    out.client_datasets.push_back(std::move(d));
  }
  return out;
}

}  // namespace cosmos
