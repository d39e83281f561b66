#pragma once

// Shared test fixtures and independent oracles. The oracles here are
// deliberately brute-force implementations kept separate from the library
// code paths they check.

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lcpm/hmm.hpp"
#include "lcpm/risk.hpp"
#include "lcpm/types.hpp"

namespace test_support {

// ---------------------------------------------------------------------
// Exhaustive path enumeration for small hidden Markov models.
// ---------------------------------------------------------------------

struct Enumeration {
  Eigen::MatrixXd marginals;  // T x N
  std::vector<int> best_path;
  double best_log_prob = 0.0;
};

inline double enum_path_log_prob(const lcpm::HmmModel& model,
                                 const Eigen::MatrixXd& obs,
                                 const std::vector<int>& path) {
  double lp = std::log(model.initial(path[0])) +
              model.emissions[path[0]].log_density(obs.col(0));
  for (std::size_t t = 1; t < path.size(); ++t) {
    lp += std::log(model.transition(path[t - 1], path[t])) +
          model.emissions[path[t]].log_density(obs.col(t));
  }
  return lp;
}

inline Enumeration enumerate_paths(const lcpm::HmmModel& model,
                                   const Eigen::MatrixXd& obs) {
  const int n = model.n_states;
  const int t_len = static_cast<int>(obs.cols());
  std::vector<int> path(t_len, 0);
  std::vector<std::vector<int>> all_paths;
  std::vector<double> log_probs;
  while (true) {
    all_paths.push_back(path);
    log_probs.push_back(enum_path_log_prob(model, obs, path));
    int pos = t_len - 1;
    while (pos >= 0 && ++path[pos] == n) path[pos--] = 0;
    if (pos < 0) break;
  }

  Enumeration out;
  double max_lp = *std::max_element(log_probs.begin(), log_probs.end());
  std::size_t best = 0;
  double total = 0.0;
  Eigen::MatrixXd marg = Eigen::MatrixXd::Zero(t_len, n);
  for (std::size_t p = 0; p < all_paths.size(); ++p) {
    double w = std::exp(log_probs[p] - max_lp);
    total += w;
    for (int t = 0; t < t_len; ++t) marg(t, all_paths[p][t]) += w;
    if (log_probs[p] > log_probs[best]) best = p;
  }
  out.marginals = marg / total;
  out.best_path = all_paths[best];
  out.best_log_prob = log_probs[best];
  return out;
}

// Random valid model + a sequence drawn from it, so emissions stay in a
// numerically comfortable range.
struct RandomHmmCase {
  lcpm::HmmModel model;
  Eigen::MatrixXd obs;
};

inline RandomHmmCase random_hmm_case(int n_states, int t_len, int dim,
                                     std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  lcpm::HmmModel model;
  model.n_states = n_states;
  model.initial.resize(n_states);
  model.transition.resize(n_states, n_states);
  for (int i = 0; i < n_states; ++i) model.initial(i) = unit(rng);
  model.initial /= model.initial.sum();
  for (int i = 0; i < n_states; ++i) {
    for (int j = 0; j < n_states; ++j) model.transition(i, j) = unit(rng);
    model.transition.row(i) /= model.transition.row(i).sum();
  }
  model.emissions.resize(n_states);
  for (int j = 0; j < n_states; ++j) {
    lcpm::GaussianComponent comp;
    comp.mean.resize(dim);
    for (int d = 0; d < dim; ++d) comp.mean(d) = 3.0 * gauss(rng);
    Eigen::MatrixXd a(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) a(r, c) = gauss(rng);
    }
    comp.covariance =
        a * a.transpose() + 0.3 * Eigen::MatrixXd::Identity(dim, dim);
    comp.weight = 1.0;
    model.emissions[j].components.push_back(std::move(comp));
  }

  // Sample a state path and observations from the model.
  Eigen::MatrixXd obs(dim, t_len);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto draw = [&](const Eigen::VectorXd& probs) {
    double r = u01(rng);
    for (int i = 0; i < probs.size(); ++i) {
      r -= probs(i);
      if (r <= 0.0) return i;
    }
    return static_cast<int>(probs.size()) - 1;
  };
  int state = draw(model.initial);
  for (int t = 0; t < t_len; ++t) {
    if (t > 0) state = draw(model.transition.row(state).transpose());
    const auto& comp = model.emissions[state].components[0];
    Eigen::VectorXd z(dim);
    for (int d = 0; d < dim; ++d) z(d) = gauss(rng);
    Eigen::LLT<Eigen::MatrixXd> llt(comp.covariance);
    obs.col(t) = comp.mean + llt.matrixL() * z;
  }
  return {std::move(model), std::move(obs)};
}

// ---------------------------------------------------------------------
// Extended-precision Gaussian density (Gauss-Jordan in long double).
// ---------------------------------------------------------------------

inline long double gaussian_log_density_ld(const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& cov) {
  const int d = static_cast<int>(mean.size());
  std::vector<std::vector<long double>> a(d, std::vector<long double>(2 * d, 0.0L));
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) a[r][c] = static_cast<long double>(cov(r, c));
    a[r][d + r] = 1.0L;
  }
  long double log_det = 0.0L;
  for (int col = 0; col < d; ++col) {
    int pivot = col;
    for (int r = col + 1; r < d; ++r) {
      if (std::abs(static_cast<double>(a[r][col])) >
          std::abs(static_cast<double>(a[pivot][col]))) {
        pivot = r;
      }
    }
    std::swap(a[col], a[pivot]);
    long double p = a[col][col];
    log_det += std::log(p < 0.0L ? -p : p);
    for (int c = 0; c < 2 * d; ++c) a[col][c] /= p;
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      long double f = a[r][col];
      for (int c = 0; c < 2 * d; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<long double> diff(d);
  for (int r = 0; r < d; ++r) {
    diff[r] = static_cast<long double>(x(r)) - static_cast<long double>(mean(r));
  }
  long double quad = 0.0L;
  for (int r = 0; r < d; ++r) {
    long double acc = 0.0L;
    for (int c = 0; c < d; ++c) acc += a[r][d + c] * diff[c];
    quad += diff[r] * acc;
  }
  const long double log2pi = 1.837877066409345483560659472811L;
  return -0.5L * (d * log2pi + log_det + quad);
}

// ---------------------------------------------------------------------
// Dense time-stepping rectangle-overlap oracle for crossing TTC.
// ---------------------------------------------------------------------

inline std::optional<double> dense_ttc_oracle(const lcpm::VehicleState& a,
                                              const lcpm::VehicleState& b,
                                              double horizon_s,
                                              double step_s = 1e-3) {
  const double hx = (a.length + b.length) / 2.0;
  const double hy = (a.width + b.width) / 2.0;
  const long steps = static_cast<long>(horizon_s / step_s);
  for (long i = 0; i <= steps; ++i) {
    const double t = i * step_s;
    const double dx = (b.x - a.x) + (b.vx - a.vx) * t;
    const double dy = (b.y - a.y) + (b.vy - a.vy) * t;
    if (std::abs(dx) <= hx && std::abs(dy) <= hy) return t;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------
// Track / recording construction helpers.
// ---------------------------------------------------------------------

inline lcpm::Track make_track(int id, double length, double width,
                              int first_frame,
                              const std::vector<std::array<double, 6>>& rows,
                              const std::vector<int>& lanes) {
  lcpm::Track t;
  t.vehicle_id = id;
  t.length = length;
  t.width = width;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    lcpm::TrackPoint p;
    p.frame = first_frame + static_cast<int>(i);
    p.x = rows[i][0];
    p.y = rows[i][1];
    p.vx = rows[i][2];
    p.vy = rows[i][3];
    p.ax = rows[i][4];
    p.ay = rows[i][5];
    p.lane_id = lanes[i];
    t.points.push_back(p);
  }
  return t;
}

// Constant-velocity track.
inline lcpm::Track make_cv_track(int id, double x0, double y0, double vx,
                                 int lane, int frames, double length = 4.5,
                                 double width = 2.0, int first_frame = 0) {
  std::vector<std::array<double, 6>> rows;
  std::vector<int> lanes;
  for (int t = 0; t < frames; ++t) {
    rows.push_back({x0 + vx * t * 0.04, y0, vx, 0.0, 0.0, 0.0});
    lanes.push_back(lane);
  }
  return make_track(id, length, width, first_frame, rows, lanes);
}

// Physical half-turn of a whole recording about its extent center: the
// scene as re-imaged by a flipped camera. Lane ids stay opaque labels.
inline lcpm::Recording mirror_recording(const lcpm::Recording& rec) {
  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& t : rec.tracks) {
    for (const auto& p : t.points) {
      x_lo = std::min(x_lo, p.x);
      x_hi = std::max(x_hi, p.x);
      y_lo = std::min(y_lo, p.y);
      y_hi = std::max(y_hi, p.y);
    }
  }
  for (const auto& set : rec.lane_markings) {
    for (double m : set) {
      y_lo = std::min(y_lo, m);
      y_hi = std::max(y_hi, m);
    }
  }
  lcpm::Recording out = rec;
  for (auto& t : out.tracks) {
    for (auto& p : t.points) {
      p.x = x_lo + x_hi - p.x;
      p.y = y_lo + y_hi - p.y;
      p.vx = -p.vx;
      p.vy = -p.vy;
      p.ax = -p.ax;
      p.ay = -p.ay;
    }
  }
  for (auto& set : out.lane_markings) {
    for (double& m : set) m = y_lo + y_hi - m;
    std::sort(set.begin(), set.end());
  }
  return out;
}

// Temp directory scoped to one test.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("lcpm_test_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  const std::filesystem::path& path() const { return dir_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path dir_;
};

inline void write_file(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace test_support
