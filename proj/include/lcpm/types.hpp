#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lcpm {

// One sample of one vehicle. Positions are meters in the recording frame,
// velocities m/s, accelerations m/s^2. In the canonical frame x increases
// along the direction of travel for every vehicle.
struct TrackPoint {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double ax = 0.0;
  double ay = 0.0;
  int lane_id = 0;
};

struct Track {
  int vehicle_id = 0;
  double length = 0.0;  // m
  double width = 0.0;   // m
  std::vector<TrackPoint> points;  // consecutive frames, sorted

  int first_frame() const { return points.front().frame; }
  int last_frame() const { return points.back().frame; }
  bool covers(int frame_begin, int frame_end) const {
    return !points.empty() && first_frame() <= frame_begin &&
           frame_end <= last_frame();
  }
  // Valid only for frames inside [first_frame, last_frame].
  const TrackPoint& at_frame(int frame) const {
    return points[static_cast<std::size_t>(frame - first_frame())];
  }
  TrackPoint& at_frame(int frame) {
    return points[static_cast<std::size_t>(frame - first_frame())];
  }
  double mean_vx() const;
};

struct Recording {
  int recording_id = 0;
  double frame_rate = 25.0;  // Hz
  // Lateral lane-marking positions, one strictly increasing set per
  // driving direction (index 0/1; single-direction recordings use one set).
  std::vector<std::vector<double>> lane_markings;
  std::vector<Track> tracks;

  const Track* find_track(int vehicle_id) const;
};

// A three-vehicle observation sequence: rows are the six dimensions
// (x_ego, y_ego, x_por, y_por, x_ta, y_ta), columns are frames.
struct Scenario {
  Eigen::MatrixXd points;  // 6 x T
  double frame_rate = 25.0;

  int length() const { return static_cast<int>(points.cols()); }
};

constexpr int kScenarioDims = 6;

}  // namespace lcpm
