#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace lcpm {

// Dynamic time warping over two multivariate sequences (columns are time
// samples). Local cost is the Euclidean distance between samples; steps
// are insert/delete/match over the full grid with no warping window. The
// returned value is the accumulated cost of the optimal alignment, with
// no path-length normalization.
double dtw_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Optimal alignment as (index in a, index in b) pairs, in order. Ties
// prefer the diagonal step.
std::vector<std::pair<int, int>> dtw_path(const Eigen::MatrixXd& a,
                                          const Eigen::MatrixXd& b);

// Barycenter averaging: repeatedly aligns every member to the current
// center and replaces each center sample with the mean of the member
// samples aligned to it. Stops after `iters` rounds or as soon as the
// total member distance stops decreasing (the better center is kept).
Eigen::MatrixXd dba_center(const std::vector<Eigen::MatrixXd>& members,
                           const Eigen::MatrixXd& init, int iters = 10);

}  // namespace lcpm
