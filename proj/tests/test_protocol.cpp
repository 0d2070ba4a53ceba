#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "cosmos/dataset.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/partition.hpp"
#include "cosmos/protocol.hpp"
#include "cosmos/wire.hpp"

using namespace cosmos;

namespace {

PseudoLabelMatrix matrix_from(std::initializer_list<std::initializer_list<double>> rows) {
  PseudoLabelMatrix m(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
  int r = 0;
  for (const auto& row : rows) {
    int c = 0;
    for (double v : row) m.at(r, c++) = v;
    ++r;
  }
  return m;
}

struct World {
  Partition part;
  ProtocolConfig cfg;
};

World make_world(std::uint64_t seed, double separation = 4.0, int rounds = 2) {
  const auto data = generate_synthetic(6, 8, 60, separation, seed);
  PartitionSpec spec;
  spec.num_clients = 6;
  spec.num_groups = 3;
  spec.dirichlet_alpha = 5.0;
  spec.pool_fraction = 0.10;
  spec.public_fraction = 0.20;
  spec.seed = seed;

  ProtocolConfig cfg;
  cfg.rounds = rounds;
  cfg.local_pretrain_epochs = 40;
  cfg.local_finetune_epochs = 10;
  cfg.server_distill_epochs = 40;
  cfg.client_distill_epochs = 20;
  cfg.lambda = 5.0;
  cfg.temperature = 1.0;
  cfg.b0_target_k = 3;
  cfg.server_hidden = 16;
  cfg.seed = seed;
  return {partition(data, spec), cfg};
}

bool records_equal(const ClientRoundRecord& a, const ClientRoundRecord& b,
                   bool include_sealed_metrics = true) {
  auto same = [](double x, double y) {
    if (std::isnan(x) && std::isnan(y)) return true;
    return x == y;
  };
  bool ok = a.client_id == b.client_id && a.cluster_id == b.cluster_id &&
            same(a.acc_server_model, b.acc_server_model) &&
            same(a.acc_client_model, b.acc_client_model) && a.uplink_bytes == b.uplink_bytes &&
            a.downlink_bytes == b.downlink_bytes;
  if (include_sealed_metrics)
    ok = ok && same(a.err_on_ui, b.err_on_ui) && same(a.lemma_lhs, b.lemma_lhs) &&
         same(a.lemma_rhs, b.lemma_rhs) && a.lemma_holds == b.lemma_holds;
  return ok;
}

}  // namespace

TEST_CASE("aggregating a single client is the identity") {
  const auto m = matrix_from({{0.6, 0.4}, {0.1, 0.9}});
  const auto out = aggregate_cluster({&m}, AggregationRule::kMean);
  CHECK(out == m);
}

TEST_CASE("mean aggregation averages entrywise") {
  const auto a = matrix_from({{1.0, 0.0}});
  const auto b = matrix_from({{0.0, 1.0}});
  const auto out = aggregate_cluster({&a, &b}, AggregationRule::kMean);
  CHECK(out.at(0, 0) == doctest::Approx(0.5));
  CHECK(out.at(0, 1) == doctest::Approx(0.5));

  const auto x = matrix_from({{0.6, 0.4}});
  const auto y = matrix_from({{0.5, 0.5}});
  const auto z = matrix_from({{0.1, 0.9}});
  const auto three = aggregate_cluster({&x, &y, &z}, AggregationRule::kMean);
  CHECK(three.at(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(three.at(0, 1) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("median and max aggregation renormalize their rows") {
  const auto a = matrix_from({{0.8, 0.2}});
  const auto b = matrix_from({{0.4, 0.6}});
  const auto c = matrix_from({{0.3, 0.7}});
  const auto med = aggregate_cluster({&a, &b, &c}, AggregationRule::kMedian);
  CHECK(med.at(0, 0) == doctest::Approx(0.4));  // medians (0.4, 0.6) already sum to 1
  const auto mx = aggregate_cluster({&a, &b, &c}, AggregationRule::kMax);
  CHECK(mx.at(0, 0) == doctest::Approx(0.8 / 1.5).epsilon(1e-12));
  CHECK(mx.is_row_stochastic());

  // disjoint one-hots: the entrywise median is all zero; fall back to uniform
  const auto e0 = matrix_from({{1.0, 0.0, 0.0}});
  const auto e1 = matrix_from({{0.0, 1.0, 0.0}});
  const auto e2 = matrix_from({{0.0, 0.0, 1.0}});
  const auto fallback = aggregate_cluster({&e0, &e1, &e2}, AggregationRule::kMedian);
  for (int i = 0; i < 3; ++i) CHECK(fallback.at(0, i) == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS_AS(aggregate_cluster({}, AggregationRule::kMean), std::invalid_argument);
}

TEST_CASE("the ledger charges header plus payload per transfer") {
  auto world = make_world(3);
  CosmosRun run(world.part, world.cfg);
  const auto history = run.run_all();
  REQUIRE(history.size() == 2);

  const auto n = static_cast<std::uint64_t>(world.part.pool.points.size());
  const std::uint64_t per_message = message_bytes(n, 6);
  for (const auto& round : history)
    for (const auto& c : round.clients) {
      CHECK(c.uplink_bytes == per_message);
      CHECK(c.downlink_bytes == per_message);
    }
  // closed form: rounds x clients x (one up + one down)
  CHECK(run.ledger().total_uplink() == 2 * 6 * per_message);
  CHECK(run.ledger().total_downlink() == 2 * 6 * per_message);
  CHECK(history.back().cumulative_uplink == 2 * 6 * per_message);
}

TEST_CASE("identical untrained clients collapse to one cluster") {
  auto world = make_world(5);
  world.cfg.local_pretrain_epochs = 0;  // zero-initialized softmax everywhere
  world.cfg.b0_target_k = 0;
  world.cfg.b0 = 0.0;
  world.cfg.rounds = 1;
  CosmosRun run(world.part, world.cfg);
  run.run_ptc();
  CHECK(run.server().assignment.num_clusters() == 1);
}

TEST_CASE("planted groups surface as clusters") {
  auto world = make_world(7, 6.0);
  world.cfg.rounds = 1;
  CosmosRun run(world.part, world.cfg);
  run.run_ptc();
  const auto& assignment = run.server().assignment;
  REQUIRE(assignment.num_clusters() == 3);
  for (std::size_t i = 0; i < assignment.cluster_of.size(); ++i)
    for (std::size_t j = 0; j < assignment.cluster_of.size(); ++j) {
      const bool same_group =
          world.part.group_of_client[i] == world.part.group_of_client[j];
      CHECK(same_group == (assignment.cluster_of[i] == assignment.cluster_of[j]));
    }
}

TEST_CASE("an all-zero-epoch round changes nothing") {
  auto world = make_world(9);
  world.cfg.rounds = 2;
  world.cfg.local_pretrain_epochs = 0;
  world.cfg.local_finetune_epochs = 0;
  world.cfg.client_distill_epochs = 0;
  world.cfg.server_distill_epochs = 0;
  world.cfg.b0_target_k = 0;  // untrained clients are identical: K is 1
  world.cfg.b0 = 0.0;
  CosmosRun run(world.part, world.cfg);
  const auto params_before = [&] {
    auto h1 = run.run_ptc();
    auto params = run.clients()[0].model->parameters();
    auto h2 = run.run_ifft_round(2);
    REQUIRE(h1.clients.size() == h2.clients.size());
    for (std::size_t i = 0; i < h1.clients.size(); ++i)
      CHECK(records_equal(h1.clients[i], h2.clients[i]));
    return params;
  }();
  CHECK(run.clients()[0].model->parameters() == params_before);
}

TEST_CASE("seeded runs are bitwise repeatable and worker-count independent") {
  auto world = make_world(11);
  CosmosRun a(world.part, world.cfg);
  const auto ha = a.run_all();

  CosmosRun b(world.part, world.cfg);
  const auto hb = b.run_all();

  auto parallel_cfg = world.cfg;
  parallel_cfg.workers = 3;
  CosmosRun c(world.part, parallel_cfg);
  const auto hc = c.run_all();

  REQUIRE(ha.size() == hb.size());
  REQUIRE(ha.size() == hc.size());
  for (std::size_t r = 0; r < ha.size(); ++r)
    for (std::size_t i = 0; i < ha[r].clients.size(); ++i) {
      CHECK(records_equal(ha[r].clients[i], hb[r].clients[i]));
      CHECK(records_equal(ha[r].clients[i], hc[r].clients[i]));
    }
  CHECK(a.clients()[0].model->parameters() == c.clients()[0].model->parameters());
}

TEST_CASE("the protocol path never reads the sealed labels") {
  auto world = make_world(13);
  auto poisoned = world.part;
  for (auto& label : poisoned.pool.sealed.labels) label = (label + 1) % 6;

  CosmosRun clean(world.part, world.cfg);
  const auto hc = clean.run_all();
  CosmosRun dirty(poisoned, world.cfg);
  const auto hd = dirty.run_all();

  CHECK(clean.server().assignment.cluster_of == dirty.server().assignment.cluster_of);
  CHECK(clean.ledger().total_uplink() == dirty.ledger().total_uplink());
  for (std::size_t r = 0; r < hc.size(); ++r)
    for (std::size_t i = 0; i < hc[r].clients.size(); ++i)
      CHECK(records_equal(hc[r].clients[i], hd[r].clients[i], /*include_sealed_metrics=*/false));
  for (std::size_t i = 0; i < clean.clients().size(); ++i) {
    CHECK(clean.clients()[i].model->parameters() == dirty.clients()[i].model->parameters());
    CHECK(clean.clients()[i].last_labels == dirty.clients()[i].last_labels);
  }
}

TEST_CASE("the cluster assignment is frozen after round one") {
  auto world = make_world(17);
  world.cfg.rounds = 3;
  CosmosRun run(world.part, world.cfg);
  const auto history = run.run_all();
  const auto& first = history.front();
  for (const auto& round : history)
    for (std::size_t i = 0; i < round.clients.size(); ++i)
      CHECK(round.clients[i].cluster_id == first.clients[i].cluster_id);
}

TEST_CASE("everything crossing the boundary is row-stochastic") {
  auto world = make_world(19);
  world.cfg.rounds = 1;
  CosmosRun run(world.part, world.cfg);
  run.run_ptc();
  for (const auto& client : run.clients()) CHECK(client.last_labels.is_row_stochastic());
  for (const auto& agg : run.server().aggregates) CHECK(agg.is_row_stochastic());
  for (const auto& down : run.server().downlink_cache) CHECK(down.is_row_stochastic());
}

TEST_CASE("the local-only baseline never communicates") {
  auto world = make_world(23);
  const auto history = run_baseline_local_only(world.part, world.cfg);
  REQUIRE(history.size() == 2);
  for (const auto& round : history)
    for (const auto& c : round.clients) {
      CHECK(c.uplink_bytes == 0);
      CHECK(c.downlink_bytes == 0);
      CHECK(c.cluster_id == -1);
      CHECK(c.lemma_holds == -1);
    }
}

TEST_CASE("untrained baseline accuracy matches an untrained protocol run") {
  auto world = make_world(29);
  auto zero = world.cfg;
  zero.local_pretrain_epochs = 0;
  zero.local_finetune_epochs = 0;
  zero.client_distill_epochs = 0;
  zero.server_distill_epochs = 0;
  zero.rounds = 1;
  zero.b0_target_k = 0;
  zero.b0 = 0.0;

  const auto baseline = run_baseline_local_only(world.part, zero);
  CosmosRun run(world.part, zero);
  const auto ptc = run.run_ptc();
  for (std::size_t i = 0; i < baseline[0].clients.size(); ++i)
    CHECK(baseline[0].clients[i].acc_client_model ==
          doctest::Approx(ptc.clients[i].acc_client_model));
}

TEST_CASE("local training alone solves well-separated local data") {
  auto world = make_world(31, 8.0);
  world.cfg.local_pretrain_epochs = 120;
  const auto history = run_baseline_local_only(world.part, world.cfg);
  CHECK(history.back().mean_client_accuracy() >= 0.9);
}

TEST_CASE("the single-cluster arm always finds exactly one cluster") {
  auto world = make_world(37, 6.0);
  world.cfg.rounds = 1;
  CosmosRun probe(world.part, world.cfg);
  probe.run_ptc();
  REQUIRE(probe.server().assignment.num_clusters() == 3);

  auto single_cfg = world.cfg;
  const auto history = run_ablation_single_cluster(world.part, single_cfg);
  for (const auto& round : history)
    for (const auto& c : round.clients) CHECK(c.cluster_id == 0);
}

TEST_CASE("clustering can run on hardened labels instead of soft ones") {
  // hard rows contribute exactly 0 or 2 per pool point, so every pairwise
  // distance quantizes to an even integer; note the quantization can merge
  // clients that soft labels keep apart, which is why soft is the default
  auto world = make_world(53, 8.0);
  world.cfg.rounds = 1;
  world.cfg.distance_on_hard_labels = true;
  CosmosRun run(world.part, world.cfg);
  const auto distances = run.round_one_distances();
  const int n_pool = static_cast<int>(world.part.pool.points.size());
  for (int i = 0; i < distances.size(); ++i)
    for (int j = 0; j < distances.size(); ++j) {
      const double d = distances.at(i, j);
      CHECK(d <= 2.0 * n_pool);
      CHECK(d / 2.0 == doctest::Approx(std::round(d / 2.0)).epsilon(1e-12));
    }

  CosmosRun soft(world.part, [&] {
    auto cfg = world.cfg;
    cfg.distance_on_hard_labels = false;
    return cfg;
  }());
  const auto soft_distances = soft.round_one_distances();
  bool any_difference = false;
  for (int i = 0; i < distances.size(); ++i)
    for (int j = i + 1; j < distances.size(); ++j)
      if (distances.at(i, j) != soft_distances.at(i, j)) any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("exchanged messages dump to disk in wire format") {
  namespace fs = std::filesystem;
  const std::string dir = "/tmp/cosmos_dump_test";
  fs::remove_all(dir);
  auto world = make_world(47);
  world.cfg.rounds = 1;
  world.cfg.dump_dir = dir;
  CosmosRun run(world.part, world.cfg);
  run.run_ptc();

  std::ifstream in(dir + "/round1_client0_up.cplm", std::ios::binary);
  REQUIRE(in.good());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const auto decoded = decode_pseudo_labels(bytes);
  const auto& original = run.clients()[0].last_labels;
  REQUIRE(decoded.rows() == original.rows());
  for (int r = 0; r < decoded.rows(); ++r)
    for (int c = 0; c < decoded.cols(); ++c)
      CHECK(decoded.at(r, c) == doctest::Approx(original.at(r, c)).epsilon(1e-6));
  CHECK(fs::exists(dir + "/round1_cluster0_down.cplm"));
  fs::remove_all(dir);
}

TEST_CASE("round sequencing is enforced") {
  auto world = make_world(41);
  CosmosRun run(world.part, world.cfg);
  CHECK_THROWS_AS(run.run_ifft_round(2), std::logic_error);
  run.run_ptc();
  CHECK_THROWS_AS(run.run_ifft_round(5), std::logic_error);
  CHECK_THROWS_AS(run.run_ptc(), std::logic_error);
  run.run_ifft_round(2);
}

TEST_CASE("invalid protocol configurations are rejected") {
  auto world = make_world(43);
  auto bad = world.cfg;
  bad.rounds = 0;
  CHECK_THROWS_AS(CosmosRun(world.part, bad), std::invalid_argument);
  bad = world.cfg;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(CosmosRun(world.part, bad), std::invalid_argument);
  bad = world.cfg;
  bad.local_pretrain_epochs = -1;
  CHECK_THROWS_AS(CosmosRun(world.part, bad), std::invalid_argument);
}
