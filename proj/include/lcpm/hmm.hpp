#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lcpm/gaussian.hpp"
#include "lcpm/types.hpp"

namespace lcpm {

// Emission density of one hidden state: a mixture of Gaussians whose
// weights sum to 1. The default configuration uses a single component
// per state, so each state is one Gaussian of the observation mixture.
struct StateEmission {
  std::vector<GaussianComponent> components;

  double log_density(const Eigen::VectorXd& x) const;
};

struct HmmModel {
  int n_states = 0;
  Eigen::VectorXd initial;     // size N, sums to 1
  Eigen::MatrixXd transition;  // N x N, each row sums to 1
  std::vector<StateEmission> emissions;  // size N
};

struct FitOptions {
  int mixtures_per_state = 1;
  int max_iters = 500;
  // EM stops when the log-likelihood changes by less than this between
  // two consecutive iterations.
  double tolerance = 1e-10;
  // Added to every covariance diagonal each M-step, in observation units.
  double cov_regularization = 1e-6;
  // Self-transition mass of the initial transition matrix.
  double sticky_init = 0.9;
  // Fit in per-dimension standardized coordinates; parameters and the
  // likelihood trace are mapped back to observation units on return.
  bool standardize = true;
  // Seeding k-means restarts (best within-cluster SSE wins); all derived
  // deterministically from the fit seed.
  int kmeans_restarts = 8;
};

struct FitResult {
  HmmModel model;
  // One entry per EM iteration; the last entry is the log-likelihood of
  // the returned model on the training sequence.
  std::vector<double> log_likelihood_trace;
  bool converged = false;
  // Some state (or mixture component) lost all responsibility before the
  // fit converged; the model holds the last healthy parameters.
  bool degenerate = false;
  std::string degenerate_reason;
  int iterations = 0;
};

// Baum-Welch on a single observation sequence (columns are time steps).
// States are seeded by k-means over the observation vectors. The returned
// likelihood trace is non-decreasing: a sub-ulp dip caused by the
// covariance regularization on rank-deficient data ends the fit at the
// previous parameters, while a genuine decrease throws NumericError
// (broken update, not bad data). Throws ValidationError when
// n_states < 1 or n_states > T.
FitResult fit_hmm(const Eigen::MatrixXd& observations /* d x T */,
                  int n_states, std::uint64_t seed,
                  const FitOptions& options = {});

// Smoothed per-frame state posteriors via the scaled forward-backward
// recursion; row t sums to 1. Throws NumericError when every state's
// emission underflows at some frame (advice: increase regularization).
Eigen::MatrixXd posterior(const HmmModel& model,
                          const Eigen::MatrixXd& observations);  // T x N

// log P(observations | model), marginalized over all state paths.
double log_likelihood(const HmmModel& model,
                      const Eigen::MatrixXd& observations);

enum class DecodeMode {
  kViterbi,          // most probable state path (default)
  kPosteriorArgmax,  // per-frame argmax of the smoothed posteriors
};

// State sequence of length T. Viterbi ties break toward the lower state
// index.
std::vector<int> decode(const HmmModel& model,
                        const Eigen::MatrixXd& observations,
                        DecodeMode mode = DecodeMode::kViterbi);

// Log-probability of a given state path under the model (joint with the
// observations). Used to cross-check decoded paths.
double path_log_probability(const HmmModel& model,
                            const Eigen::MatrixXd& observations,
                            const std::vector<int>& states);

enum class SelectionCriterion {
  kMaxLl,  // largest final log-likelihood among completed fits (default)
  kMinLl,  // smallest final log-likelihood ("paper-literal" config value)
};

struct SweepEntry {
  int n_states = 0;
  double log_likelihood = 0.0;
  bool completed = false;
  std::string status;  // "ok", "degenerate", or an error message
};

struct SelectResult {
  int n_selected = 0;
  FitResult fit;
  std::vector<SweepEntry> sweep;
};

// Fits n = 1, 2, ... up to n_max, stopping the sweep at the first n whose
// fit degenerates (a state is never visited) or produces a non-finite
// likelihood, then picks among the completed fits per the criterion.
// Throws NumericError when no state count completes.
SelectResult select_model(const Eigen::MatrixXd& observations, int n_max,
                          std::uint64_t seed,
                          SelectionCriterion criterion = SelectionCriterion::kMaxLl,
                          const FitOptions& options = {});

// A maximal constant-state slice of a scenario.
struct Primitive {
  int scenario_index = 0;
  int state = 0;
  int first_frame = 0;  // inclusive offsets into the scenario
  int last_frame = 0;   // inclusive
  Eigen::MatrixXd points;  // 6 x length slice
  double frame_rate = 25.0;

  int length() const { return last_frame - first_frame + 1; }
};

struct StateRun {
  int state = 0;
  int first_frame = 0;
  int last_frame = 0;
  bool kept = false;

  int length() const { return last_frame - first_frame + 1; }
};

// Maximal constant-state runs of a decoded sequence; runs shorter than
// min_frames are marked dropped.
std::vector<StateRun> state_runs(const std::vector<int>& states,
                                 int min_frames);

// Cuts the scenario at state changes and drops runs shorter than
// min_frames (dropped, not merged into neighbours).
std::vector<Primitive> segment(const Scenario& scenario,
                               const std::vector<int>& states,
                               int min_frames = 10, int scenario_index = 0);

}  // namespace lcpm
