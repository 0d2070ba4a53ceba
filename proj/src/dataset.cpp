#include "cosmos/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cosmos/random.hpp"

namespace cosmos {

Dataset::Dataset(int num_classes, int feature_dim)
    : num_classes_(num_classes), feature_dim_(feature_dim) {
  if (num_classes < 1) throw std::invalid_argument("Dataset: num_classes must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("Dataset: feature_dim must be >= 1");
}

void Dataset::add(Example ex) {
  if (static_cast<int>(ex.features.size()) != feature_dim_)
    throw std::invalid_argument("Dataset::add: feature dimension mismatch");
  if (ex.label < 0 || ex.label >= num_classes_)
    throw std::invalid_argument("Dataset::add: label out of range");
  for (double v : ex.features)
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset::add: non-finite feature");
  examples_.push_back(std::move(ex));
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (const auto& ex : examples_) counts[static_cast<std::size_t>(ex.label)]++;
  return counts;
}

Dataset generate_synthetic(int num_classes, int feature_dim, int samples_per_class,
                           double class_separation, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("generate_synthetic: need at least 2 classes");
  if (feature_dim < 1) throw std::invalid_argument("generate_synthetic: feature_dim must be >= 1");
  if (samples_per_class < 1)
    throw std::invalid_argument("generate_synthetic: samples_per_class must be >= 1");

  RngStream rng(seed, kDataKey, /*subkey=*/1);  // subkey 2 belongs to the partitioner
  std::vector<std::vector<double>> means(static_cast<std::size_t>(num_classes));
  for (auto& mean : means) {
    mean.resize(static_cast<std::size_t>(feature_dim));
    for (auto& v : mean) v = class_separation * rng.normal();
  }

  Dataset out(num_classes, feature_dim);
  out.reserve(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(samples_per_class));
  for (int m = 0; m < num_classes; ++m) {
    for (int s = 0; s < samples_per_class; ++s) {
      Example ex;
      ex.label = m;
      ex.features.resize(static_cast<std::size_t>(feature_dim));
      for (int f = 0; f < feature_dim; ++f)
        ex.features[static_cast<std::size_t>(f)] =
            means[static_cast<std::size_t>(m)][static_cast<std::size_t>(f)] + rng.normal();
      out.add(std::move(ex));
    }
  }
  return out;
}

Dataset load_csv(const std::string& path, int num_classes, bool has_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  int feature_dim = -1;
  bool first_data_row = true;

  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && has_header) continue;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");

    if (cells.size() < 2)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected features plus label column");
    if (feature_dim < 0) {
      feature_dim = static_cast<int>(cells.size()) - 1;
      out = Dataset(num_classes, feature_dim);
    } else if (static_cast<int>(cells.size()) - 1 != feature_dim) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": inconsistent column count");
    }

    Example ex;
    ex.features.resize(static_cast<std::size_t>(feature_dim));
    for (int f = 0; f < feature_dim; ++f) {
      try {
        std::size_t pos = 0;
        ex.features[static_cast<std::size_t>(f)] = std::stod(cells[static_cast<std::size_t>(f)], &pos);
        if (pos != cells[static_cast<std::size_t>(f)].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": malformed feature value '" + cells[static_cast<std::size_t>(f)] + "'");
      }
      if (!std::isfinite(ex.features[static_cast<std::size_t>(f)]))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-finite feature");
    }
    try {
      std::size_t pos = 0;
      ex.label = std::stoi(cells.back(), &pos);
      if (pos != cells.back().size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed label '" +
                               cells.back() + "'");
    }
    if (ex.label < 0 || ex.label >= num_classes)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": label " +
                               std::to_string(ex.label) + " outside [0, " +
                               std::to_string(num_classes) + ")");
    out.add(std::move(ex));
    first_data_row = false;
  }
  if (first_data_row) throw std::runtime_error("load_csv: " + path + " contains no data rows");
  return out;
}

}  // namespace cosmos
