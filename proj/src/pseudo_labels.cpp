#include "cosmos/pseudo_labels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cosmos {

PseudoLabelMatrix::PseudoLabelMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {
  if (rows < 0 || cols < 1)
    throw std::invalid_argument("PseudoLabelMatrix: invalid shape");
}

bool PseudoLabelMatrix::is_row_stochastic(double tol) const {
  for (int r = 0; r < rows_; ++r) {
    double sum = 0.0;
    for (int c = 0; c < cols_; ++c) {
      double v = at(r, c);
      if (!std::isfinite(v) || v < -1e-12) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

void PseudoLabelMatrix::validate_row_stochastic(double tol) const {
  if (!is_row_stochastic(tol))
    throw std::runtime_error("PseudoLabelMatrix: row failed simplex validation");
}

int argmax_lowest(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("argmax_lowest: empty row");
  int best = 0;
  for (int i = 1; i < static_cast<int>(row.size()); ++i)
    if (row[static_cast<std::size_t>(i)] > row[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace cosmos
