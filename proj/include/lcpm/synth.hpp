#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lcpm/types.hpp"

namespace lcpm {

// Parametric three-vehicle lane-change recording: piecewise-constant
// longitudinal velocity regimes shared by all vehicles, one optional
// smooth lateral maneuver per vehicle, and clipped Gaussian position
// noise. Deterministic for a fixed seed.
struct SyntheticLaneChange {
  int to_lane = 0;       // 1-based target lane
  int start_frame = 0;   // first frame of the lateral maneuver
  int duration_frames = 0;
};

struct SyntheticVehicle {
  int id = 0;
  std::string role;  // "ego", "por", "ta" or free-form
  double length = 4.5;
  double width = 2.0;
  double initial_x = 0.0;
  int lane = 1;  // 1-based index into the lane bands
  std::vector<double> vx_per_regime;
  std::optional<SyntheticLaneChange> lane_change;
};

struct SyntheticSpec {
  int recording_id = 0;
  double frame_rate = 25.0;
  int duration_frames = 0;
  std::vector<double> lane_markings;  // single driving direction
  double noise_std = 0.0;
  // First frame of each regime after the initial one; regimes partition
  // [0, duration).
  std::vector<int> regime_boundaries;
  std::vector<SyntheticVehicle> vehicles;

  int regime_count() const {
    return static_cast<int>(regime_boundaries.size()) + 1;
  }

  static SyntheticSpec from_json_file(const std::filesystem::path& path);
  static SyntheticSpec from_json_string(const std::string& text,
                                        const std::string& origin);
  std::string to_json_string() const;
};

struct SyntheticTruth {
  std::vector<int> regime_labels;  // per frame
  std::vector<int> regime_boundaries;
  int crossing_frame = -1;  // first lane-id change of the "ego" vehicle
  int ego_id = -1;
  int por_id = -1;
  int ta_id = -1;
};

struct SyntheticResult {
  Recording recording;
  SyntheticTruth truth;
};

// Throws ValidationError for inconsistent specs (overlapping initial
// positions in one lane, regime count mismatches, negative noise, ...).
SyntheticResult generate_synthetic(const SyntheticSpec& spec,
                                   std::uint64_t seed);

// Plain piecewise-stationary observation sequence for model testing:
// each regime emits i.i.d. Gaussians around its mean column.
struct RegimeScenario {
  Scenario scenario;
  std::vector<int> labels;  // regime index per frame
};

RegimeScenario make_regime_scenario(
    const Eigen::MatrixXd& regime_means /* d x n_regimes */,
    const std::vector<int>& regime_lengths, double noise_std,
    std::uint64_t seed, double frame_rate = 25.0);

}  // namespace lcpm
