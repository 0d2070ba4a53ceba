#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "cosmos/dataset.hpp"
#include "cosmos/metrics.hpp"
#include "cosmos/mlp.hpp"
#include "cosmos/predictor.hpp"
#include "cosmos/random.hpp"
#include "cosmos/softmax_regression.hpp"

using namespace cosmos;

namespace {

std::vector<std::vector<double>> random_points(int n, int dim, std::uint64_t seed) {
  RngStream rng(seed, 900);
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(n));
  for (auto& p : pts) {
    p.resize(static_cast<std::size_t>(dim));
    for (auto& v : p) v = rng.normal();
  }
  return pts;
}

PseudoLabelMatrix random_targets(int rows, int cols, std::uint64_t seed) {
  RngStream rng(seed, 901);
  PseudoLabelMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto p = rng.dirichlet(1.0, static_cast<std::size_t>(cols));
    for (int c = 0; c < cols; ++c) m.at(r, c) = p[static_cast<std::size_t>(c)];
  }
  return m;
}

double train_accuracy(const Predictor& model, const Dataset& data) {
  return 1.0 - err(model, data);
}

}  // namespace

TEST_CASE("temperature one is the identity and zero is a one-hot") {
  const std::vector<double> row{0.7, 0.2, 0.1};
  CHECK(apply_temperature(row, Temperature{1.0}) == row);
  CHECK(apply_temperature(row, Temperature{0.0}) == std::vector<double>{1.0, 0.0, 0.0});
  // argmax ties break toward the lowest index
  const std::vector<double> tie{0.4, 0.4, 0.2};
  CHECK(apply_temperature(tie, Temperature{0.0}) == std::vector<double>{1.0, 0.0, 0.0});
  CHECK_THROWS_AS(apply_temperature(row, Temperature{-0.5}), std::invalid_argument);
}

TEST_CASE("temperature scaling matches rescaled logits") {
  // model with logits (2, 0): weights [[2],[0]], zero bias
  SoftmaxRegression model(1, 2);
  model.set_parameters(std::vector<double>{2.0, 0.0, 0.0, 0.0});
  const std::vector<std::vector<double>> pool{{1.0}};
  const auto labels = predict_pseudolabels(model, pool, Temperature{2.0});
  const double e = std::exp(1.0);
  CHECK(labels.at(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
  CHECK(labels.at(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
  CHECK(labels.at(0, 0) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("temperature approaches the one-hot limit smoothly") {
  const std::vector<double> row{0.6, 0.3, 0.1};
  const auto sharp = apply_temperature(row, Temperature{1e-3});
  CHECK(sharp[0] > 1.0 - 1e-9);
  const auto flat = apply_temperature(row, Temperature{100.0});
  for (double v : flat) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-2));
}

TEST_CASE("a zero-initialized model emits the uniform row everywhere") {
  SoftmaxRegression model(3, 2);
  const auto pool = random_points(3, 3, 1);
  const auto labels = predict_pseudolabels(model, pool, Temperature{1.0});
  REQUIRE(labels.rows() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(labels.at(r, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(labels.at(r, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("margin reads top-1 minus top-2") {
  CHECK(margin(std::vector<double>{0.7, 0.2, 0.1}) == doctest::Approx(0.5));
  CHECK(margin(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(0.0));
  CHECK(margin(std::vector<double>{0.0, 1.0, 0.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(margin(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("pseudo-label rows stay on the simplex for all backends and temperatures") {
  const auto pool = random_points(20, 5, 2);
  SoftmaxRegression soft(5, 4);
  Mlp mlp(5, 8, 4, 77);
  // sharpen the models so rows are far from uniform
  const auto data = generate_synthetic(4, 5, 30, 3.0, 3);
  soft.fit_hard(data, 100, 0.05);
  mlp.fit_hard(data, 100, 0.01);
  for (const Predictor* model : {static_cast<const Predictor*>(&soft), static_cast<const Predictor*>(&mlp)}) {
    for (double t : {0.0, 0.25, 1.0, 4.0}) {
      const auto labels = predict_pseudolabels(*model, pool, Temperature{t});
      CHECK(labels.is_row_stochastic());
    }
  }
}

TEST_CASE("regularizer vanishes for constant models, empty samples, and zero radius") {
  SoftmaxRegression constant(3, 2);  // zero weights: same output everywhere
  RegConfig reg;
  reg.radius = 0.5;
  reg.num_neighbors = 3;
  reg.seed = 5;
  const std::vector<double> x{0.3, -1.0, 2.0};
  CHECK(regularizer_rb(constant, x, reg, LossKind::kKL) == doctest::Approx(0.0));

  SoftmaxRegression trained(3, 2);
  trained.set_parameters(std::vector<double>{1.0, -2.0, 0.5, -1.0, 2.0, -0.5, 0.1, -0.1});
  RegConfig none = reg;
  none.num_neighbors = 0;
  CHECK(regularizer_rb(trained, x, none, LossKind::kKL) == 0.0);

  RegConfig zero_radius = reg;
  zero_radius.radius = 0.0;
  CHECK(regularizer_rb(trained, x, zero_radius, LossKind::kKL) == doctest::Approx(0.0));

  RegConfig off = reg;
  off.kind = RegConfig::Transform::kNone;
  CHECK(regularizer_rb(trained, x, off, LossKind::kKL) == 0.0);

  // a sharp model on a wide ball should pay a positive price
  CHECK(regularizer_rb(trained, x, reg, LossKind::kKL) > 0.0);
}

TEST_CASE("soft objective and standalone regularizer agree") {
  Mlp model(4, 6, 3, 99);
  const auto pool = random_points(12, 4, 7);
  const auto targets = random_targets(12, 3, 8);
  RegConfig reg;
  reg.radius = 0.4;
  reg.num_neighbors = 2;
  reg.seed = 13;
  const double with_reg = model.soft_objective(pool, targets, {}, 2.5, reg, LossKind::kKL, nullptr);
  const double without = model.soft_objective(pool, targets, {}, 0.0, reg, LossKind::kKL, nullptr);
  const double mean_rb = mean_regularizer(model, pool, reg, LossKind::kKL);
  CHECK(with_reg - without == doctest::Approx(2.5 * mean_rb).epsilon(1e-9));
}

TEST_CASE("hard training separates a well-separated two-class set") {
  const auto data = generate_synthetic(2, 2, 10, 100.0, 7);
  SoftmaxRegression model(2, 2);
  const auto trace = model.fit_hard(data, 500, 0.1);
  CHECK(trace.size() == 500);
  CHECK(train_accuracy(model, data) == doctest::Approx(1.0));
  CHECK(trace.back() < trace.front());
}

TEST_CASE("zero epochs trains nothing") {
  const auto data = generate_synthetic(2, 3, 5, 10.0, 9);
  Mlp model(3, 4, 2, 123);
  const auto before = model.parameters();
  const auto trace = model.fit_hard(data, 0, 1e-3);
  CHECK(trace.empty());
  CHECK(model.parameters() == before);

  const auto pool = random_points(4, 3, 10);
  const auto targets = random_targets(4, 2, 11);
  const auto trace2 = model.fit_soft(pool, targets, {}, 0.0, RegConfig{}, 0, 1e-4);
  CHECK(trace2.empty());
  CHECK(model.parameters() == before);
}

TEST_CASE("hard training rejects an empty dataset") {
  SoftmaxRegression model(2, 2);
  Dataset empty(2, 2);
  CHECK_THROWS_AS(model.fit_hard(empty, 10, 0.1), std::invalid_argument);
}

TEST_CASE("the hidden layer cracks the xor arrangement") {
  Dataset data(2, 2);
  data.add({{0.0, 0.0}, 0});
  data.add({{1.0, 1.0}, 0});
  data.add({{0.0, 1.0}, 1});
  data.add({{1.0, 0.0}, 1});
  Mlp model(2, 8, 2, 11);
  model.fit_hard(data, 4000, 0.02);
  CHECK(train_accuracy(model, data) == doctest::Approx(1.0));
}

TEST_CASE("distilling a model onto its own outputs is a fixed point") {
  const auto data = generate_synthetic(3, 4, 20, 3.0, 13);
  SoftmaxRegression model(4, 3);
  model.fit_hard(data, 150, 0.05);
  std::vector<std::vector<double>> pool;
  for (const auto& ex : data.examples()) pool.push_back(ex.features);
  const auto self = predict_pseudolabels(model, pool, Temperature{1.0});
  const auto trace = model.fit_soft(pool, self, {}, 0.0, RegConfig{}, 50, 1e-4);
  REQUIRE(trace.size() == 50);
  CHECK(std::abs(trace.front()) < 1e-9);
  CHECK(trace.back() <= trace.front() + 1e-9);
}

TEST_CASE("convex distillation ends no worse than it started") {
  const auto pool = random_points(50, 6, 17);
  const auto targets = random_targets(50, 4, 19);
  SoftmaxRegression model(6, 4);
  const auto trace = model.fit_soft(pool, targets, {}, 0.0, RegConfig{}, 200, 1e-3);
  REQUIRE(trace.size() == 200);
  CHECK(trace.back() <= trace.front());
}

TEST_CASE("soft training validates its inputs") {
  SoftmaxRegression model(3, 2);
  const auto pool = random_points(5, 3, 23);
  const auto targets = random_targets(4, 2, 29);  // row mismatch
  CHECK_THROWS_AS(model.fit_soft(pool, targets, {}, 0.0, RegConfig{}, 5, 1e-3),
                  std::invalid_argument);
  const auto ok = random_targets(5, 2, 29);
  CHECK_THROWS_AS(model.fit_soft(pool, ok, {}, -1.0, RegConfig{}, 5, 1e-3), std::invalid_argument);
}

TEST_CASE("training with the consistency term leaves a smoother model") {
  const auto pool = random_points(60, 5, 31);
  const auto targets = random_targets(60, 3, 37);
  RegConfig train_reg;
  train_reg.radius = 0.6;
  train_reg.num_neighbors = 2;
  train_reg.seed = 41;

  Mlp plain(5, 12, 3, 500);
  Mlp smoothed(5, 12, 3, 500);  // same init seed
  plain.fit_soft(pool, targets, {}, 0.0, train_reg, 250, 1e-3);
  smoothed.fit_soft(pool, targets, {}, 5.0, train_reg, 250, 1e-3);

  RegConfig probe = train_reg;
  probe.seed = 4242;  // shared probe stream, distinct from training draws
  CHECK(mean_regularizer(smoothed, pool, probe) <= mean_regularizer(plain, pool, probe));
}

TEST_CASE("fit is deterministic given the init seed") {
  const auto data = generate_synthetic(3, 4, 15, 2.0, 43);
  Mlp a(4, 6, 3, 321), b(4, 6, 3, 321);
  const auto ta = a.fit_hard(data, 60, 1e-3);
  const auto tb = b.fit_hard(data, 60, 1e-3);
  CHECK(ta == tb);
  CHECK(a.parameters() == b.parameters());
}

TEST_CASE("parameter dumps round-trip through the binary format") {
  Mlp model(3, 5, 4, 55);
  const auto data = generate_synthetic(4, 3, 10, 2.0, 47);
  model.fit_hard(data, 40, 1e-3);

  std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
  save_parameters(model, buf);
  Mlp restored(3, 5, 4, 999);
  load_parameters(restored, buf);

  const auto x = random_points(1, 3, 53)[0];
  const auto p1 = model.predict_proba(x);
  const auto p2 = restored.predict_proba(x);
  for (std::size_t m = 0; m < p1.size(); ++m)
    CHECK(p1[m] == doctest::Approx(p2[m]).epsilon(1e-5));

  std::stringstream buf2(std::ios::in | std::ios::out | std::ios::binary);
  save_parameters(model, buf2);
  SoftmaxRegression other(3, 4);
  CHECK_THROWS_AS(load_parameters(other, buf2), std::runtime_error);
}

TEST_CASE("cloned predictors are independent copies") {
  SoftmaxRegression model(2, 2);
  model.set_parameters(std::vector<double>{1.0, 2.0, 3.0, 4.0, 0.1, 0.2});
  auto copy = model.clone();
  CHECK(copy->parameters() == model.parameters());
  model.set_parameters(std::vector<double>(6, 0.0));
  CHECK(copy->parameters() != model.parameters());
}
