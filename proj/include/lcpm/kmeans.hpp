#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lcpm {

struct KmeansResult {
  std::vector<int> labels;       // per point, 0..k-1
  Eigen::MatrixXd centroids;     // d x k
  std::vector<double> objective_trace;  // within-cluster SSE per iteration
  int iterations = 0;
};

// Lloyd's algorithm with maximin seeding: the first centroid is a uniform
// seeded pick, each further one the point farthest from its nearest chosen
// centroid. Empty clusters are reseeded with the worst-fit point, so the
// objective trace is non-increasing.
KmeansResult kmeans_euclid(const Eigen::MatrixXd& points /* d x n */, int k,
                           std::uint64_t seed, int max_iters = 300,
                           double shift_tol = 1e-6);

}  // namespace lcpm
