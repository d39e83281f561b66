#pragma once

#include <Eigen/Dense>

namespace lcpm {

// One multivariate normal component with full covariance. Densities are
// evaluated in log space; exponentiate only at the boundary.
struct GaussianComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double weight = 1.0;

  int dim() const { return static_cast<int>(mean.size()); }
};

// log N(x | mean, covariance) via Cholesky. Throws NumericError when the
// covariance is not positive-definite.
double gaussian_log_density(const Eigen::VectorXd& x,
                            const GaussianComponent& comp);

double gaussian_density(const Eigen::VectorXd& x,
                        const GaussianComponent& comp);

}  // namespace lcpm
