#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lcpm/types.hpp"

namespace lcpm {

// Vehicle size classes, named by ascending cluster length:
// passenger car < heavy vehicle < oversized truck.
enum class VehicleType { kPC = 0, kHV = 1, kOT = 2 };

std::string to_string(VehicleType type);
VehicleType vehicle_type_from_string(const std::string& text);

struct VehicleClasses {
  std::vector<VehicleType> labels;  // per input dimension pair
  Eigen::Matrix<double, 2, 3> centroids;  // (length, width) per class
  std::vector<double> objective_trace;
};

// k = 3 Euclidean k-means over (length, width) pairs. Requires at least
// three distinct pairs.
VehicleClasses classify_vehicle_types(
    const std::vector<std::pair<double, double>>& dims, std::uint64_t seed);

// Per-vehicle class labels for a whole recording.
std::unordered_map<int, VehicleType> classify_recording(
    const Recording& recording, std::uint64_t seed);

// Frames at which the track's lane id differs from the previous frame
// (the frame carrying the new lane id).
std::vector<int> detect_cross_lane(const Track& track);

struct LcWindowOptions {
  double excursion = 0.9;   // m of lateral travel past the crossing
  double epsilon_a = 0.01;  // m/s^2 tolerance for settled lateral acceleration
  double epsilon_v = 0.1;   // m/s tolerance for ceased lateral motion
};

struct LcWindow {
  int t_start = 0;
  int t_end = 0;
  bool truncated_start = false;
  bool truncated_end = false;

  bool truncated() const { return truncated_start || truncated_end; }
};

// Scans outward from the crossing frame for the first frame on each side
// where the vehicle has moved more than `excursion` past the crossing
// and its lateral motion has settled (|vy| <= epsilon_v and consecutive
// ay within epsilon_a). A side that never settles falls back to the track
// boundary and is flagged truncated. Returns nothing when the track is
// shorter than 3 frames around t_c or shows no lateral excursion on
// either side (no lane-change geometry).
std::optional<LcWindow> bound_lc_window(const Track& track, int t_c,
                                        const LcWindowOptions& options = {});

struct NeighborOptions {
  double max_por_gap = 120.0;  // m, preceding vehicle in the original lane
  double max_ta_gap = 100.0;   // m, |gap| to the target-lane vehicle
};

// Preceding vehicle in the original lane (nearest ahead, center-to-center
// gap in (0, max_por_gap)) and target-lane vehicle (nearest by absolute
// gap within max_ta_gap), both evaluated at t_start. Returns nothing when
// either is absent.
std::optional<std::pair<int, int>> select_neighbors(
    const Recording& recording, int ego_id, int t_start, int original_lane,
    int target_lane, const NeighborOptions& options = {});

struct LcEvent {
  int recording_id = 0;
  int ego_id = 0;
  int por_id = 0;
  int ta_id = 0;
  int t_c = 0;
  int t_start = 0;
  int t_end = 0;
  bool truncated = false;
  std::array<VehicleType, 3> type_triple{};
  Scenario scenario;  // (ego, por, ta) positions over [t_start, t_end]
};

struct ExtractOptions {
  LcWindowOptions window;
  NeighborOptions neighbors;
  // Required (ego, por, ta) classes; disengage with no_type_filter().
  std::optional<std::array<VehicleType, 3>> type_filter =
      std::array<VehicleType, 3>{VehicleType::kPC, VehicleType::kPC,
                                 VehicleType::kPC};
};

// Full event extraction: crossings, window bounds, neighbor selection and
// the type filter. Events whose three tracks do not all span the window
// are dropped; overlapping windows of one ego keep only the earliest
// event. The recording must already be canonical.
std::vector<LcEvent> extract_events(
    const Recording& recording,
    const std::unordered_map<int, VehicleType>& classes,
    const ExtractOptions& options = {});

// Events manifest in CSV form (one row per event).
std::string events_manifest_csv(const std::vector<LcEvent>& events);

}  // namespace lcpm
