#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "cosmos/dataset.hpp"

using namespace cosmos;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = std::string("/tmp/cosmos_test_") + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("synthetic generation hits the requested shape") {
  const auto data = generate_synthetic(2, 2, 10, 100.0, 7);
  CHECK(data.size() == 20);
  CHECK(data.num_classes() == 2);
  CHECK(data.feature_dim() == 2);
  const auto counts = data.class_counts();
  CHECK(counts[0] == 10);
  CHECK(counts[1] == 10);
}

TEST_CASE("synthetic generation is deterministic") {
  const auto a = generate_synthetic(5, 8, 50, 4.0, 1);
  const auto b = generate_synthetic(5, 8, 50, 4.0, 1);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].features == b[i].features);
  }
  const auto c = generate_synthetic(5, 8, 50, 4.0, 2);
  CHECK(a[0].features != c[0].features);
}

TEST_CASE("synthetic generation rejects bad dimensions") {
  CHECK_THROWS_AS(generate_synthetic(3, 4, 0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(1, 4, 5, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(3, 0, 5, 1.0, 1), std::invalid_argument);
}

TEST_CASE("dataset validates entries") {
  Dataset d(2, 3);
  CHECK_THROWS_AS(d.add({{1.0, 2.0}, 0}), std::invalid_argument);          // wrong dim
  CHECK_THROWS_AS(d.add({{1.0, 2.0, 3.0}, 2}), std::invalid_argument);     // label too big
  CHECK_THROWS_AS(d.add({{1.0, 2.0, 1.0 / 0.0}, 0}), std::invalid_argument);
  d.add({{1.0, 2.0, 3.0}, 1});
  CHECK(d.size() == 1);
}

TEST_CASE("csv loading parses plain rows") {
  const auto path = write_temp("ok.csv", "1.5,2.5,0\n0.25,-1,1\n3,4,1\n");
  const auto data = load_csv(path, 2);
  REQUIRE(data.size() == 3);
  CHECK(data.feature_dim() == 2);
  CHECK(data[0].label == 0);
  CHECK(data[1].label == 1);
  CHECK(data[2].label == 1);
  CHECK(data[0].features[0] == doctest::Approx(1.5));
  std::remove(path.c_str());
}

TEST_CASE("csv loading honors the header flag") {
  const auto path = write_temp("hdr.csv", "f1,f2,label\n1,2,0\n");
  CHECK_THROWS(load_csv(path, 2, false));
  const auto data = load_csv(path, 2, true);
  CHECK(data.size() == 1);
  std::remove(path.c_str());
}

TEST_CASE("csv loading reports the offending row") {
  const auto bad_label = write_temp("lbl.csv", "1,2,0\n3,4,5\n");
  try {
    load_csv(bad_label, 3);
    FAIL("expected a validation error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
    CHECK(std::string(e.what()).find("label 5") != std::string::npos);
  }
  std::remove(bad_label.c_str());

  const auto bad_cell = write_temp("cell.csv", "1,2,0\n1,x,1\n");
  try {
    load_csv(bad_cell, 2);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  std::remove(bad_cell.c_str());
}

TEST_CASE("csv loading rejects empty files") {
  const auto path = write_temp("empty.csv", "");
  CHECK_THROWS_AS(load_csv(path, 2), std::runtime_error);
  std::remove(path.c_str());
}
