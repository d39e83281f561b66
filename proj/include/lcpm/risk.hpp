#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lcpm/types.hpp"

namespace lcpm {

struct VehicleState {
  double x = 0.0;   // center, m
  double y = 0.0;   // center, m
  double vx = 0.0;  // m/s
  double vy = 0.0;  // m/s
  double length = 4.5;  // m
  double width = 2.0;   // m
  int lane_id = 0;
};

VehicleState vehicle_state_at(const Track& track, int frame);

// Rear-end geometry: both vehicles in one lane, time for the follower to
// close the bumper-to-bumper gap at the current speed difference.
// Nothing when the pair is not closing; exactly 0 when the vehicles
// already overlap longitudinally while closing.
std::optional<double> ttc_type_a(const VehicleState& follower,
                                 const VehicleState& leader);

// Path-crossing geometry for vehicles in different lanes: both rectangles
// are projected at constant velocity and the entry times of the x- and
// y-extent overlaps are intersected. Nothing when the projected extents
// never overlap simultaneously at a non-negative time.
std::optional<double> ttc_type_c(const VehicleState& a, const VehicleState& b);

enum class TtcGeometry { kNone, kRearEnd, kCrossing };

enum class VehiclePair { kEgoPor = 0, kEgoTa = 1, kPorTa = 2 };

std::string to_string(VehiclePair pair);
std::string to_string(TtcGeometry geometry);

struct TtcSample {
  int frame = 0;
  VehiclePair pair = VehiclePair::kEgoPor;
  std::optional<double> ttc;  // seconds; engaged iff geometry != kNone
  TtcGeometry geometry = TtcGeometry::kNone;
};

// Per-frame TTC for one vehicle pair over [first_frame, last_frame]; the
// geometry is chosen per frame from the lane ids (same lane: rear-end;
// different lanes: crossing).
std::vector<TtcSample> pair_ttc_series(const Track& a, const Track& b,
                                       VehiclePair pair, int first_frame,
                                       int last_frame);

struct PrimitiveRisk {
  int primitive_id = -1;
  // Minimum defined TTC per pair over the primitive, capped; disengaged
  // pairs are absent.
  std::array<std::optional<double>, 3> per_pair_min_ttc;
  // Mean of the engaged per-pair minima; absent when no pair ever engages.
  std::optional<double> risk;
};

// Aggregates the per-pair series over the primitive's frame range
// [first_frame, last_frame] (absolute frames).
PrimitiveRisk primitive_risk(int primitive_id, int first_frame, int last_frame,
                             const std::array<std::vector<TtcSample>, 3>& series,
                             double ttc_cap = 100.0);

struct ClusterRiskRow {
  int cluster = 0;
  int frequency = 0;  // primitives with a defined risk
  std::optional<double> stddev;  // sample (n-1); absent for n < 2
  std::optional<double> mean;
  std::optional<double> median;  // lower middle for even counts
};

// Per-cluster statistics of primitive risk, sorted ascending by mean so
// the riskiest clusters come first (absent means sort last).
std::vector<ClusterRiskRow> cluster_risk_stats(
    const std::vector<int>& cluster_of_primitive,
    const std::vector<PrimitiveRisk>& risks);

}  // namespace lcpm
