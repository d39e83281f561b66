#pragma once

#include <Eigen/Dense>

#include "lcpm/hmm.hpp"

namespace lcpm {

// Linear interpolation of each dimension onto `length` equally spaced
// sample times spanning the input's original extent; both endpoints are
// preserved exactly. Throws ValidationError for inputs shorter than 2.
Eigen::MatrixXd resample(const Eigen::MatrixXd& points /* d x T */,
                         int length = 75);

inline Eigen::MatrixXd resample(const Primitive& primitive, int length = 75) {
  return resample(primitive.points, length);
}

// Per-dimension min-max scaling to [-1, 1]. A constant dimension maps to
// all zeros.
Eigen::MatrixXd normalize_minmax(const Eigen::MatrixXd& sample);

// Time-major flattening: entry 6*a + d holds dimension d of sample a.
// Serialization layout only; clustering consumes the d x l form.
Eigen::VectorXd flatten(const Eigen::MatrixXd& sample);

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, int dims);

}  // namespace lcpm
