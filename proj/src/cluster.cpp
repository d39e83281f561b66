#include "lcpm/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "lcpm/dtw.hpp"
#include "lcpm/errors.hpp"
#include "lcpm/parallel.hpp"

namespace lcpm {

namespace {

// k-means++ seeding under DTW: each further center is drawn with
// probability proportional to the squared distance to the nearest center
// already chosen.
std::vector<Eigen::MatrixXd> seed_centers(
    const std::vector<Eigen::MatrixXd>& items, int k, std::mt19937_64& rng,
    std::vector<Eigen::MatrixXd> centers) {
  const int n = static_cast<int>(items.size());
  if (centers.empty()) {
    centers.push_back(items[std::uniform_int_distribution<int>(0, n - 1)(rng)]);
  }
  std::vector<double> nearest_sq(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) {
        best = std::min(best, dtw_distance(items[i], c));
      }
      nearest_sq[i] = best * best;
      total += nearest_sq[i];
    }
    int pick;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += nearest_sq[i];
        if (r <= acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = std::uniform_int_distribution<int>(0, n - 1)(rng);
    }
    centers.push_back(items[pick]);
  }
  return centers;
}

Eigen::MatrixXd update_center(const std::vector<Eigen::MatrixXd>& members,
                              const Eigen::MatrixXd& current,
                              const ClusterOptions& options) {
  switch (options.center_mode) {
    case CenterMode::kDba:
      return dba_center(members, current, options.dba_iters);
    case CenterMode::kMedoid: {
      std::size_t best = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < members.size(); ++i) {
        double cost = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j) {
          double d = dtw_distance(members[i], members[j]);
          cost += d * d;
        }
        if (cost < best_cost) {
          best_cost = cost;
          best = i;
        }
      }
      return members[best];
    }
    case CenterMode::kEuclidean: {
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(current.rows(), current.cols());
      for (const auto& m : members) {
        if (m.cols() != current.cols()) {
          throw ValidationError(
              "euclidean centers require equal-length sequences");
        }
        mean += m;
      }
      return mean / static_cast<double>(members.size());
    }
  }
  throw ValidationError("unknown center mode");
}

}  // namespace

ClusterModel kmeans_dtw(const std::vector<Eigen::MatrixXd>& items, int k,
                        std::uint64_t seed, const ClusterOptions& options) {
  const int n = static_cast<int>(items.size());
  if (k < 1) throw ValidationError("kmeans_dtw requires k >= 1");
  if (n < k) {
    throw ValidationError("kmeans_dtw requires at least k items (" +
                          std::to_string(n) + " < " + std::to_string(k) + ")");
  }
  if (static_cast<int>(options.initial_centers.size()) > k) {
    throw ValidationError("more initial centers than clusters");
  }

  std::mt19937_64 rng(seed);
  ClusterModel model;
  model.k = k;
  model.centers = seed_centers(items, k, rng, options.initial_centers);
  model.assignment.assign(n, -1);
  model.dist_to_center.assign(n, 0.0);

  for (int iter = 0; iter < options.max_iters; ++iter) {
    // Assignment: nearest center by DTW, ties to the lower index.
    std::vector<int> next_assign(n);
    std::vector<double> next_dist(n);
    parallel_for(n, options.jobs, [&](int i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = dtw_distance(items[i], model.centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      next_assign[i] = best;
      next_dist[i] = best_d;
    });

    // Reseed empty clusters with the worst-fit item.
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) counts[next_assign[i]]++;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[next_assign[i]] < 2) continue;
        if (next_dist[i] > far_d) {
          far_d = next_dist[i];
          far = i;
        }
      }
      if (far < 0) break;
      counts[next_assign[far]]--;
      counts[c] = 1;
      next_assign[far] = c;
      next_dist[far] = 0.0;
      model.centers[c] = items[far];
    }

    double lambda = 0.0;
    for (int i = 0; i < n; ++i) lambda += next_dist[i] * next_dist[i];
    model.objective_trace.push_back(lambda);
    model.iterations = iter + 1;

    bool unchanged = next_assign == model.assignment;
    model.assignment = std::move(next_assign);
    model.dist_to_center = std::move(next_dist);
    if (unchanged || iter + 1 == options.max_iters) break;

    // Update step, rolled back per cluster when it does not improve.
    for (int c = 0; c < k; ++c) {
      std::vector<Eigen::MatrixXd> members;
      for (int i = 0; i < n; ++i) {
        if (model.assignment[i] == c) members.push_back(items[i]);
      }
      if (members.empty()) continue;
      Eigen::MatrixXd candidate = update_center(members, model.centers[c], options);
      double before = 0.0, after = 0.0;
      for (const auto& m : members) {
        double db = dtw_distance(m, model.centers[c]);
        double da = dtw_distance(m, candidate);
        before += db * db;
        after += da * da;
      }
      if (after <= before) {
        model.centers[c] = std::move(candidate);
      } else {
        model.update_rejections++;
      }
    }
  }

  model.lambda_w = model.objective_trace.back();
  return model;
}

std::vector<ElbowRow> elbow_curve(const std::vector<Eigen::MatrixXd>& items,
                                  const std::vector<int>& k_range,
                                  std::uint64_t seed,
                                  const ClusterOptions& options) {
  if (k_range.empty()) throw ValidationError("elbow_curve requires a k range");
  for (std::size_t i = 0; i < k_range.size(); ++i) {
    if (k_range[i] < 1 || k_range[i] > static_cast<int>(items.size())) {
      throw ValidationError("elbow k values must lie in [1, #items]");
    }
    if (i > 0 && k_range[i] <= k_range[i - 1]) {
      throw ValidationError("elbow k range must be strictly increasing");
    }
  }

  std::vector<ElbowRow> rows;
  std::vector<Eigen::MatrixXd> carry;
  for (std::size_t idx = 0; idx < k_range.size(); ++idx) {
    ClusterOptions opts = options;
    // Warm-start from the previous solution so adding a center can only
    // lower the objective.
    opts.initial_centers = carry;
    ClusterModel model = kmeans_dtw(items, k_range[idx], seed + idx, opts);
    carry = model.centers;
    ElbowRow row;
    row.k = k_range[idx];
    row.lambda_w = model.lambda_w;
    if (idx > 0 && rows[idx - 1].lambda_w > 0.0) {
      row.change_rate =
          (rows[idx - 1].lambda_w - model.lambda_w) / rows[idx - 1].lambda_w;
    }
    rows.push_back(row);
  }

  // Quadratic least-squares fit of the change rate over k.
  std::vector<std::size_t> defined;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].change_rate.has_value()) {
      defined.push_back(i);
      xs.push_back(rows[i].k);
      ys.push_back(*rows[i].change_rate);
    }
  }
  if (!defined.empty()) {
    std::vector<double> smoothed = quadratic_smooth(xs, ys);
    for (std::size_t r = 0; r < defined.size(); ++r) {
      rows[defined[r]].smoothed_change_rate = smoothed[r];
    }
  }
  return rows;
}

std::vector<double> quadratic_smooth(const std::vector<double>& xs,
                                     const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw ValidationError("quadratic_smooth needs one y per x");
  }
  if (xs.empty()) return {};
  const int degree = std::min<int>(2, static_cast<int>(xs.size()) - 1);
  Eigen::MatrixXd vand(xs.size(), degree + 1);
  Eigen::VectorXd target(xs.size());
  for (std::size_t r = 0; r < xs.size(); ++r) {
    double p = 1.0;
    for (int c = 0; c <= degree; ++c) {
      vand(static_cast<Eigen::Index>(r), c) = p;
      p *= xs[r];
    }
    target(static_cast<Eigen::Index>(r)) = ys[r];
  }
  Eigen::VectorXd coef = vand.colPivHouseholderQr().solve(target);
  std::vector<double> out(xs.size());
  for (std::size_t r = 0; r < xs.size(); ++r) {
    double value = 0.0, p = 1.0;
    for (int c = 0; c <= degree; ++c) {
      value += coef(c) * p;
      p *= xs[r];
    }
    out[r] = value;
  }
  return out;
}

}  // namespace lcpm
