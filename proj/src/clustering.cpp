#include "cosmos/clustering.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace cosmos {

double pairwise_distance(const PseudoLabelMatrix& a, const PseudoLabelMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("pairwise_distance: shape mismatch");
  double total = 0.0;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) total += std::abs(da[i] - db[i]);
  return total;
}

DistanceMatrix build_distance_matrix(const std::vector<PseudoLabelMatrix>& matrices) {
  const int n = static_cast<int>(matrices.size());
  DistanceMatrix out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      out.set(i, j, pairwise_distance(matrices[static_cast<std::size_t>(i)],
                                      matrices[static_cast<std::size_t>(j)]));
  return out;
}

ClusterAssignment greedy_cluster(const DistanceMatrix& distances, double b0) {
  const int n = distances.size();
  if (n < 1) throw std::invalid_argument("greedy_cluster: empty distance matrix");
  if (b0 < 0.0) throw std::invalid_argument("greedy_cluster: negative threshold");

  ClusterAssignment out;
  out.cluster_of.assign(static_cast<std::size_t>(n), -1);
  std::vector<bool> remaining(static_cast<std::size_t>(n), true);
  int left = n;

  while (left > 0) {
    // client with the most b0-close remaining neighbors; ties to lowest index
    int best = -1;
    int best_count = -1;
    for (int i = 0; i < n; ++i) {
      if (!remaining[static_cast<std::size_t>(i)]) continue;
      int count = 0;
      for (int j = 0; j < n; ++j)
        if (j != i && remaining[static_cast<std::size_t>(j)] && distances.at(i, j) <= b0) ++count;
      if (count > best_count) {
        best_count = count;
        best = i;
      }
    }

    std::vector<int> members;
    members.push_back(best);
    for (int j = 0; j < n; ++j)
      if (j != best && remaining[static_cast<std::size_t>(j)] && distances.at(best, j) <= b0)
        members.push_back(j);
    std::sort(members.begin(), members.end());

    const int k = out.num_clusters();
    for (int m : members) {
      out.cluster_of[static_cast<std::size_t>(m)] = k;
      remaining[static_cast<std::size_t>(m)] = false;
      --left;
    }
    out.clusters.push_back(std::move(members));
    out.center_of.push_back(best);
  }
  return out;
}

double cluster_bound(const std::vector<int>& members, const DistanceMatrix& distances) {
  double bound = 0.0;
  for (std::size_t a = 0; a < members.size(); ++a)
    for (std::size_t b = a + 1; b < members.size(); ++b)
      bound = std::max(bound, distances.at(members[a], members[b]));
  return bound;
}

double within_cluster_bound(const ClusterAssignment& assignment, const DistanceMatrix& distances) {
  double bound = 0.0;
  for (const auto& members : assignment.clusters)
    bound = std::max(bound, cluster_bound(members, distances));
  return bound;
}

B0Sweep sweep_b0(const DistanceMatrix& distances) {
  const int n = distances.size();
  std::vector<double> grid;
  grid.push_back(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) grid.push_back(distances.at(i, j));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  B0Sweep sweep;
  sweep.table.reserve(grid.size());
  for (double b0 : grid)
    sweep.table.emplace_back(b0, greedy_cluster(distances, b0).num_clusters());
  return sweep;
}

double calibrate_b0(const DistanceMatrix& distances, int target_k) {
  if (target_k < 1 || target_k > distances.size())
    throw std::invalid_argument("calibrate_b0: target outside [1, N]");

  const int n = distances.size();
  std::vector<double> grid;
  grid.push_back(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) grid.push_back(distances.at(i, j));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<ClusterAssignment> assignments;
  assignments.reserve(grid.size());
  for (double b0 : grid) assignments.push_back(greedy_cluster(distances, b0));

  // The cluster count is only near-monotone in the threshold, so a bare
  // "largest b0 with K >= target" can land on an isolated breakpoint just
  // past a separation gap. Segment the sweep into maximal runs with an
  // unchanged assignment and score each by the width of the threshold
  // interval it covers; a genuine gap dominates every spurious plateau.
  // Prefer the widest run hitting the target exactly, then any K >= target,
  // and return the largest grid value of the winning run.
  auto widest_run = [&](bool exact) -> std::size_t {
    double best_width = -1.0;
    std::size_t best_last = grid.size();
    std::size_t start = 0;
    while (start < grid.size()) {
      std::size_t last = start;
      while (last + 1 < grid.size() && assignments[last + 1].clusters == assignments[start].clusters)
        ++last;
      const int k = assignments[start].num_clusters();
      if (exact ? k == target_k : k >= target_k) {
        const double width = (last + 1 < grid.size())
                                 ? grid[last + 1] - grid[start]
                                 : std::numeric_limits<double>::infinity();
        if (width >= best_width) {
          best_width = width;
          best_last = last;
        }
      }
      start = last + 1;
    }
    return best_last;
  };
  std::size_t winner = widest_run(/*exact=*/true);
  if (winner == grid.size()) winner = widest_run(/*exact=*/false);
  if (winner < grid.size()) return grid[winner];

  int lo = assignments.front().num_clusters(), hi = lo;
  for (const auto& a : assignments) {
    lo = std::min(lo, a.num_clusters());
    hi = std::max(hi, a.num_clusters());
  }
  throw std::runtime_error("calibrate_b0: target K=" + std::to_string(target_k) +
                           " unreachable; achievable range is [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
}

void write_distance_csv(const DistanceMatrix& distances, std::ostream& out) {
  for (int i = 0; i < distances.size(); ++i) {
    for (int j = 0; j < distances.size(); ++j) {
      if (j) out << ',';
      out << distances.at(i, j);
    }
    out << '\n';
  }
}

}  // namespace cosmos
