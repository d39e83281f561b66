#include "lcpm/prep.hpp"

#include <cmath>

#include "lcpm/errors.hpp"

namespace lcpm {

Eigen::MatrixXd resample(const Eigen::MatrixXd& points, int length) {
  const int t_in = static_cast<int>(points.cols());
  const int dims = static_cast<int>(points.rows());
  if (t_in < 2) {
    throw ValidationError("resample requires at least 2 samples");
  }
  if (length < 2) {
    throw ValidationError("resample requires a target length of at least 2");
  }
  Eigen::MatrixXd out(dims, length);
  out.col(0) = points.col(0);
  out.col(length - 1) = points.col(t_in - 1);
  const double step =
      static_cast<double>(t_in - 1) / static_cast<double>(length - 1);
  for (int a = 1; a + 1 < length; ++a) {
    double t = step * a;
    int lo = static_cast<int>(std::floor(t));
    if (lo >= t_in - 1) lo = t_in - 2;
    double frac = t - lo;
    out.col(a) = points.col(lo) + frac * (points.col(lo + 1) - points.col(lo));
  }
  return out;
}

Eigen::MatrixXd normalize_minmax(const Eigen::MatrixXd& sample) {
  Eigen::MatrixXd out(sample.rows(), sample.cols());
  for (int d = 0; d < sample.rows(); ++d) {
    double lo = sample.row(d).minCoeff();
    double hi = sample.row(d).maxCoeff();
    if (hi == lo) {
      out.row(d).setZero();
    } else {
      out.row(d) = (2.0 * (sample.row(d).array() - lo) / (hi - lo)) - 1.0;
    }
  }
  return out;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& sample) {
  const int dims = static_cast<int>(sample.rows());
  const int len = static_cast<int>(sample.cols());
  Eigen::VectorXd flat(dims * len);
  for (int a = 0; a < len; ++a) {
    flat.segment(a * dims, dims) = sample.col(a);
  }
  return flat;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, int dims) {
  if (dims < 1 || flat.size() % dims != 0) {
    throw ValidationError("flattened length is not a multiple of the dimension");
  }
  const int len = static_cast<int>(flat.size()) / dims;
  Eigen::MatrixXd sample(dims, len);
  for (int a = 0; a < len; ++a) {
    sample.col(a) = flat.segment(a * dims, dims);
  }
  return sample;
}

}  // namespace lcpm
