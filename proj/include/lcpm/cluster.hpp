#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace lcpm {

enum class CenterMode {
  kDba,        // barycenter averaging under DTW (default)
  kMedoid,     // member minimizing the sum of squared distances
  kEuclidean,  // pointwise mean (equal-length sequences only)
};

struct ClusterOptions {
  int max_iters = 50;
  CenterMode center_mode = CenterMode::kDba;
  int dba_iters = 10;
  // Warm-start centers; fewer than k are extended by seeded k-means++
  // picks, more than k is an error.
  std::vector<Eigen::MatrixXd> initial_centers;
  int jobs = 1;
};

struct ClusterModel {
  int k = 0;
  std::vector<Eigen::MatrixXd> centers;
  std::vector<int> assignment;         // per input item
  std::vector<double> dist_to_center;  // DTW to the assigned center
  double lambda_w = 0.0;  // within-cluster sum of squared DTW distances
  std::vector<double> objective_trace;  // lambda_w after each assignment
  int update_rejections = 0;  // center updates rolled back as non-improving
  int iterations = 0;
};

// K-means over variable-length multivariate sequences with DTW as the
// metric. Assignment ties break toward the lower cluster index; empty
// clusters are reseeded with the worst-fit item; center updates that
// would increase a cluster's cost are rolled back, so the objective trace
// is non-increasing. Deterministic for a fixed seed and input order.
ClusterModel kmeans_dtw(const std::vector<Eigen::MatrixXd>& items, int k,
                        std::uint64_t seed, const ClusterOptions& options = {});

struct ElbowRow {
  int k = 0;
  double lambda_w = 0.0;
  std::optional<double> change_rate;
  std::optional<double> smoothed_change_rate;
};

// Runs kmeans_dtw for each k of the (ascending) range, warm-starting each
// size from the previous solution so lambda_w is non-increasing in k.
// change_rate is the relative drop from the previous row; the smoothed
// column is a least-squares quadratic fit of the change rate over k.
std::vector<ElbowRow> elbow_curve(const std::vector<Eigen::MatrixXd>& items,
                                  const std::vector<int>& k_range,
                                  std::uint64_t seed,
                                  const ClusterOptions& options = {});

// Least-squares polynomial smoothing used for the elbow change rate:
// fits degree min(2, n-1) over (x, y) and evaluates the fit at each x.
std::vector<double> quadratic_smooth(const std::vector<double>& xs,
                                     const std::vector<double>& ys);

}  // namespace lcpm
