#pragma once

#include <iosfwd>
#include <vector>

#include "cosmos/pseudo_labels.hpp"

namespace cosmos {

// Symmetric nonnegative client-distance matrix with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(int n) : n_(n), d_(static_cast<std::size_t>(n) * n, 0.0) {}

  double at(int i, int j) const { return d_[static_cast<std::size_t>(i) * n_ + j]; }
  void set(int i, int j, double v) {
    d_[static_cast<std::size_t>(i) * n_ + j] = v;
    d_[static_cast<std::size_t>(j) * n_ + i] = v;
  }
  int size() const { return n_; }

 private:
  int n_ = 0;
  std::vector<double> d_;
};

// Total elementwise L1 distance between two pseudo-label matrices.
double pairwise_distance(const PseudoLabelMatrix& a, const PseudoLabelMatrix& b);

DistanceMatrix build_distance_matrix(const std::vector<PseudoLabelMatrix>& matrices);

// Clusters found greedily: the founding client of each cluster is within
// b0 of every member, and the cluster count emerges from the data.
struct ClusterAssignment {
  std::vector<std::vector<int>> clusters;  // creation order; members ascending
  std::vector<int> cluster_of;             // client -> cluster index
  std::vector<int> center_of;              // cluster -> founding client

  int num_clusters() const { return static_cast<int>(clusters.size()); }
};

// Repeatedly pick the client with the most b0-close remaining neighbors
// (ties to the lowest client index) and carve out that neighborhood.
ClusterAssignment greedy_cluster(const DistanceMatrix& distances, double b0);

// Largest pairwise distance observed inside any cluster; the empirical
// stand-in for the in-cluster disagreement bound.
double within_cluster_bound(const ClusterAssignment& assignment, const DistanceMatrix& distances);
double cluster_bound(const std::vector<int>& members, const DistanceMatrix& distances);

// (b0, K) sweep over the breakpoint grid of a distance matrix, plus the
// largest b0 keeping at least target_k clusters.
struct B0Sweep {
  std::vector<std::pair<double, int>> table;  // ascending b0 -> K
};
B0Sweep sweep_b0(const DistanceMatrix& distances);
double calibrate_b0(const DistanceMatrix& distances, int target_k);

// Row-major CSV dump for debugging.
void write_distance_csv(const DistanceMatrix& distances, std::ostream& out);

}  // namespace cosmos
