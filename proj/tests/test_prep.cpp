#include <doctest.h>

#include <cmath>
#include <random>

#include "lcpm/errors.hpp"
#include "lcpm/prep.hpp"

using namespace lcpm;

TEST_SUITE_BEGIN("prep");

TEST_CASE("affine trajectories resample with zero error") {
  const int t_in = 30;
  Eigen::MatrixXd points(6, t_in);
  for (int t = 0; t < t_in; ++t) {
    for (int d = 0; d < 6; ++d) points(d, t) = 3.0 * t + 1.0 + d;
  }
  for (int l : {2, 10, 75, 200}) {
    Eigen::MatrixXd out = resample(points, l);
    const double step = double(t_in - 1) / double(l - 1);
    for (int a = 0; a < l; ++a) {
      for (int d = 0; d < 6; ++d) {
        CHECK(out(d, a) == doctest::Approx(3.0 * step * a + 1.0 + d).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("matching length on the aligned grid is the identity") {
  Eigen::MatrixXd points = Eigen::MatrixXd::Random(6, 75);
  Eigen::MatrixXd out = resample(points, 75);
  CHECK(out == points);
}

TEST_CASE("sine round trip stays within twice the one-pass error") {
  // 3 s of a 0.8 Hz sine sampled at 25 Hz (75 samples).
  const int n = 75;
  auto sine_at = [&](double idx) {
    return std::sin(2.0 * M_PI * 0.8 * idx / 25.0);
  };
  Eigen::MatrixXd original(1, n);
  for (int t = 0; t < n; ++t) original(0, t) = sine_at(t);

  Eigen::MatrixXd up = resample(original, 150);
  Eigen::MatrixXd back = resample(up, 75);

  // One-pass interpolation error of the 75-sample sine on the 150 grid.
  double one_pass = 0.0;
  const double step = double(n - 1) / 149.0;
  for (int a = 0; a < 150; ++a) {
    one_pass = std::max(one_pass, std::abs(up(0, a) - sine_at(step * a)));
  }
  double round_trip = (back - original).cwiseAbs().maxCoeff();
  CHECK(round_trip <= 2.0 * one_pass + 1e-12);
}

TEST_CASE("length-one input cannot be resampled") {
  Eigen::MatrixXd one = Eigen::MatrixXd::Zero(6, 1);
  CHECK_THROWS_AS(resample(one, 75), ValidationError);
}

TEST_CASE("resampling preserves the endpoints exactly") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd points(6, 17);
  for (int t = 0; t < 17; ++t) {
    for (int d = 0; d < 6; ++d) points(d, t) = gauss(rng);
  }
  Eigen::MatrixXd out = resample(points, 41);
  CHECK(out.col(0) == points.col(0));
  CHECK(out.col(40) == points.col(16));
}

TEST_CASE("strictly monotone dimensions stay monotone") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> step(0.01, 1.0);
  Eigen::MatrixXd points(1, 20);
  points(0, 0) = 0.0;
  for (int t = 1; t < 20; ++t) points(0, t) = points(0, t - 1) + step(rng);
  for (int l : {5, 20, 63, 150}) {
    Eigen::MatrixXd out = resample(points, l);
    for (int a = 1; a < l; ++a) CHECK(out(0, a) > out(0, a - 1));
  }
}

TEST_CASE("min-max normalization hits the closed forms") {
  Eigen::MatrixXd sample(1, 3);
  sample << 2.0, 4.0, 6.0;
  Eigen::MatrixXd out = normalize_minmax(sample);
  CHECK(out(0, 0) == doctest::Approx(-1.0));
  CHECK(out(0, 1) == doctest::Approx(0.0));
  CHECK(out(0, 2) == doctest::Approx(1.0));

  Eigen::MatrixXd constant(1, 3);
  constant << 5.0, 5.0, 5.0;
  CHECK(normalize_minmax(constant).isZero());
}

TEST_CASE("normalization bounds and extrema") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 100.0);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd sample(6, 30);
    for (int t = 0; t < 30; ++t) {
      for (int d = 0; d < 6; ++d) sample(d, t) = gauss(rng);
    }
    Eigen::MatrixXd out = normalize_minmax(sample);
    for (int d = 0; d < 6; ++d) {
      CHECK(out.row(d).minCoeff() == doctest::Approx(-1.0).epsilon(1e-12));
      CHECK(out.row(d).maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
      for (int t = 0; t < 30; ++t) {
        CHECK(out(d, t) >= -1.0 - 1e-12);
        CHECK(out(d, t) <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("flattening is time-major") {
  Eigen::MatrixXd sample(6, 2);
  sample.col(0) << 1, 2, 3, 4, 5, 6;
  sample.col(1) << 7, 8, 9, 10, 11, 12;
  Eigen::VectorXd flat = flatten(sample);
  REQUIRE(flat.size() == 12);
  for (int i = 0; i < 12; ++i) CHECK(flat(i) == i + 1);
}

TEST_CASE("flatten and unflatten are inverse and norm-preserving") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd sample(6, 19);
  for (int t = 0; t < 19; ++t) {
    for (int d = 0; d < 6; ++d) sample(d, t) = gauss(rng);
  }
  Eigen::VectorXd flat = flatten(sample);
  CHECK(unflatten(flat, 6) == sample);
  CHECK(flat.norm() == doctest::Approx(sample.norm()).epsilon(1e-15));
}

TEST_SUITE_END();
