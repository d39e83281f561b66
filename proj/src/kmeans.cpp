#include "lcpm/kmeans.hpp"

#include <limits>
#include <random>

#include "lcpm/errors.hpp"

namespace lcpm {

namespace {

int nearest_centroid(const Eigen::MatrixXd& centroids,
                     const Eigen::VectorXd& x, double* dist_sq_out) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < centroids.cols(); ++c) {
    double d = (x - centroids.col(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist_sq_out != nullptr) *dist_sq_out = best_d;
  return best;
}

}  // namespace

KmeansResult kmeans_euclid(const Eigen::MatrixXd& points, int k,
                           std::uint64_t seed, int max_iters,
                           double shift_tol) {
  const int n = static_cast<int>(points.cols());
  const int d = static_cast<int>(points.rows());
  if (k < 1) throw ValidationError("k-means requires k >= 1");
  if (n < k) throw ValidationError("k-means requires at least k points");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centroids(d, k);
  centroids.col(0) =
      points.col(std::uniform_int_distribution<int>(0, n - 1)(rng));
  std::vector<double> min_dist(n);
  for (int c = 1; c < k; ++c) {
    int far = 0;
    double far_d = -1.0;
    for (int i = 0; i < n; ++i) {
      double dist = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) {
        dist = std::min(dist, (points.col(i) - centroids.col(j)).squaredNorm());
      }
      if (dist > far_d) {
        far_d = dist;
        far = i;
      }
    }
    centroids.col(c) = points.col(far);
  }

  KmeansResult result;
  result.labels.assign(n, -1);

  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment.
    bool changed = false;
    double sse = 0.0;
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      double dist = 0.0;
      int c = nearest_centroid(centroids, points.col(i), &dist);
      if (c != result.labels[i]) changed = true;
      result.labels[i] = c;
      counts[c]++;
      sse += dist;
    }

    // Reseed empty clusters with the point farthest from its centroid.
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[result.labels[i]] < 2) continue;
        double dist = (points.col(i) - centroids.col(result.labels[i])).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      if (far < 0) break;  // all clusters singletons
      counts[result.labels[far]]--;
      sse -= far_d;
      result.labels[far] = c;
      counts[c] = 1;
      centroids.col(c) = points.col(far);
      changed = true;
    }

    result.objective_trace.push_back(sse);
    result.iterations = iter + 1;

    // Update.
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(d, k);
    for (int i = 0; i < n; ++i) next.col(result.labels[i]) += points.col(i);
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      next.col(c) /= static_cast<double>(counts[c]);
      shift = std::max(shift, (next.col(c) - centroids.col(c)).norm());
    }
    centroids = next;
    if (!changed || shift < shift_tol) break;
  }

  result.centroids = centroids;
  return result;
}

}  // namespace lcpm
