#include "lcpm/dtw.hpp"

#include <algorithm>
#include <limits>

#include "lcpm/errors.hpp"

namespace lcpm {

double dtw_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int la = static_cast<int>(a.cols());
  const int lb = static_cast<int>(b.cols());
  if (la < 1 || lb < 1) throw ValidationError("dtw requires non-empty sequences");

  std::vector<double> prev(lb), cur(lb);
  for (int j = 0; j < lb; ++j) {
    double c = (a.col(0) - b.col(j)).norm();
    prev[j] = c + (j > 0 ? prev[j - 1] : 0.0);
  }
  for (int i = 1; i < la; ++i) {
    for (int j = 0; j < lb; ++j) {
      double c = (a.col(i) - b.col(j)).norm();
      double best = prev[j];  // advance a
      if (j > 0) {
        best = std::min(best, cur[j - 1]);   // advance b
        best = std::min(best, prev[j - 1]);  // advance both
      }
      cur[j] = c + best;
    }
    std::swap(prev, cur);
  }
  return prev[lb - 1];
}

std::vector<std::pair<int, int>> dtw_path(const Eigen::MatrixXd& a,
                                          const Eigen::MatrixXd& b) {
  const int la = static_cast<int>(a.cols());
  const int lb = static_cast<int>(b.cols());
  if (la < 1 || lb < 1) throw ValidationError("dtw requires non-empty sequences");

  Eigen::MatrixXd acc(la, lb);
  for (int i = 0; i < la; ++i) {
    for (int j = 0; j < lb; ++j) {
      double c = (a.col(i) - b.col(j)).norm();
      if (i == 0 && j == 0) {
        acc(i, j) = c;
      } else if (i == 0) {
        acc(i, j) = c + acc(i, j - 1);
      } else if (j == 0) {
        acc(i, j) = c + acc(i - 1, j);
      } else {
        acc(i, j) = c + std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});
      }
    }
  }

  std::vector<std::pair<int, int>> path;
  int i = la - 1, j = lb - 1;
  path.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      double diag = acc(i - 1, j - 1);
      double up = acc(i - 1, j);
      double left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

Eigen::MatrixXd dba_center(const std::vector<Eigen::MatrixXd>& members,
                           const Eigen::MatrixXd& init, int iters) {
  if (members.empty()) throw ValidationError("dba_center requires members");
  Eigen::MatrixXd center = init;
  double best_total = 0.0;
  for (const auto& m : members) best_total += dtw_distance(m, center);

  for (int iter = 0; iter < iters; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(center.rows(), center.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(center.cols());
    for (const auto& m : members) {
      for (auto [ci, mi] : dtw_path(center, m)) {
        sums.col(ci) += m.col(mi);
        counts(ci) += 1.0;
      }
    }
    Eigen::MatrixXd candidate = center;
    for (int c = 0; c < center.cols(); ++c) {
      if (counts(c) > 0.0) candidate.col(c) = sums.col(c) / counts(c);
    }
    double total = 0.0;
    for (const auto& m : members) total += dtw_distance(m, candidate);
    if (total > best_total) break;  // worse center: keep the previous one
    bool improved = total < best_total;
    center = std::move(candidate);
    best_total = total;
    if (!improved) break;
  }
  return center;
}

}  // namespace lcpm
