#include "lcpm/gaussian.hpp"

#include <cmath>

#include "lcpm/errors.hpp"

namespace lcpm {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

double gaussian_log_density(const Eigen::VectorXd& x,
                            const GaussianComponent& comp) {
  const auto d = comp.mean.size();
  Eigen::LLT<Eigen::MatrixXd> llt(comp.covariance);
  if (llt.info() != Eigen::Success) {
    throw NumericError("covariance matrix is not positive-definite");
  }
  const Eigen::MatrixXd& chol = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    log_det += 2.0 * std::log(chol(i, i));
  }
  Eigen::VectorXd diff = x - comp.mean;
  // Solve L z = diff; the quadratic form is |z|^2.
  Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(diff);
  double quad = z.squaredNorm();
  return -0.5 * (static_cast<double>(d) * kLog2Pi + log_det + quad);
}

double gaussian_density(const Eigen::VectorXd& x,
                        const GaussianComponent& comp) {
  return std::exp(gaussian_log_density(x, comp));
}

}  // namespace lcpm
