#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cosmos {

struct Example {
  std::vector<double> features;
  int label = 0;
};

// Labeled feature-vector dataset; the unit all partitioning and training
// operates on. Labels are validated against num_classes on insertion.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int num_classes, int feature_dim);

  void add(Example ex);
  void reserve(std::size_t n) { examples_.reserve(n); }

  const Example& operator[](std::size_t i) const { return examples_[i]; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  int num_classes() const { return num_classes_; }
  int feature_dim() const { return feature_dim_; }
  const std::vector<Example>& examples() const { return examples_; }

  std::vector<std::size_t> class_counts() const;

 private:
  std::vector<Example> examples_;
  int num_classes_ = 0;
  int feature_dim_ = 0;
};

// Isotropic Gaussian blobs, one per class, with class means drawn from
// N(0, class_separation^2 I). Deterministic given the seed.
Dataset generate_synthetic(int num_classes, int feature_dim, int samples_per_class,
                           double class_separation, std::uint64_t seed);

// Comma-separated UTF-8 rows, feature columns followed by one integer
// label column. No header unless has_header is set.
Dataset load_csv(const std::string& path, int num_classes, bool has_header = false);

}  // namespace cosmos
