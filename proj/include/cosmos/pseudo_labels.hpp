#pragma once

#include <span>
#include <vector>

namespace cosmos {

// Row-stochastic n x M matrix of soft predictions over the public pool.
// The only artifact that crosses the client/server boundary.
class PseudoLabelMatrix {
 public:
  PseudoLabelMatrix() = default;
  PseudoLabelMatrix(int rows, int cols);

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<const double> row(int r) const {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<double> row(int r) {
    return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<double>& data() const { return data_; }

  bool is_row_stochastic(double tol = 1e-6) const;
  void validate_row_stochastic(double tol = 1e-6) const;  // throws on violation

  bool operator==(const PseudoLabelMatrix&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Index of the largest entry; ties resolve to the lowest index everywhere
// so downstream error counts are reproducible.
int argmax_lowest(std::span<const double> row);

}  // namespace cosmos
