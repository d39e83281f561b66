#include "lcpm/lc_extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "lcpm/errors.hpp"
#include "lcpm/kmeans.hpp"

namespace lcpm {

std::string to_string(VehicleType type) {
  switch (type) {
    case VehicleType::kPC: return "PC";
    case VehicleType::kHV: return "HV";
    case VehicleType::kOT: return "OT";
  }
  return "?";
}

VehicleType vehicle_type_from_string(const std::string& text) {
  if (text == "PC") return VehicleType::kPC;
  if (text == "HV") return VehicleType::kHV;
  if (text == "OT") return VehicleType::kOT;
  throw ValidationError("unknown vehicle type '" + text + "'");
}

VehicleClasses classify_vehicle_types(
    const std::vector<std::pair<double, double>>& dims, std::uint64_t seed) {
  std::set<std::pair<double, double>> distinct(dims.begin(), dims.end());
  if (distinct.size() < 3) {
    throw ValidationError(
        "vehicle classification needs at least 3 distinct (length, width) "
        "pairs");
  }
  Eigen::MatrixXd points(2, dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    points(0, static_cast<Eigen::Index>(i)) = dims[i].first;
    points(1, static_cast<Eigen::Index>(i)) = dims[i].second;
  }
  KmeansResult km = kmeans_euclid(points, 3, seed);

  // Order clusters by centroid length: PC < HV < OT.
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return km.centroids(0, a) < km.centroids(0, b);
  });
  std::array<int, 3> rank{};  // cluster index -> class
  for (int pos = 0; pos < 3; ++pos) rank[order[pos]] = pos;

  VehicleClasses out;
  out.objective_trace = km.objective_trace;
  for (int pos = 0; pos < 3; ++pos) {
    out.centroids.col(pos) = km.centroids.col(order[pos]);
  }
  out.labels.reserve(dims.size());
  for (int label : km.labels) {
    out.labels.push_back(static_cast<VehicleType>(rank[label]));
  }
  return out;
}

std::unordered_map<int, VehicleType> classify_recording(
    const Recording& recording, std::uint64_t seed) {
  std::vector<std::pair<double, double>> dims;
  dims.reserve(recording.tracks.size());
  for (const auto& t : recording.tracks) dims.emplace_back(t.length, t.width);
  VehicleClasses classes = classify_vehicle_types(dims, seed);
  std::unordered_map<int, VehicleType> out;
  for (std::size_t i = 0; i < recording.tracks.size(); ++i) {
    out[recording.tracks[i].vehicle_id] = classes.labels[i];
  }
  return out;
}

std::vector<int> detect_cross_lane(const Track& track) {
  std::vector<int> crossings;
  for (std::size_t i = 1; i < track.points.size(); ++i) {
    if (track.points[i].lane_id != track.points[i - 1].lane_id) {
      crossings.push_back(track.points[i].frame);
    }
  }
  return crossings;
}

std::optional<LcWindow> bound_lc_window(const Track& track, int t_c,
                                        const LcWindowOptions& options) {
  if (track.points.size() < 3 || t_c - 1 < track.first_frame() ||
      t_c + 1 > track.last_frame()) {
    return std::nullopt;
  }
  const double y_c = track.at_frame(t_c).y;

  auto settled = [&](int frame) {
    const TrackPoint& p = track.at_frame(frame);
    const TrackPoint& q = track.at_frame(frame - 1);
    return std::abs(p.y - y_c) > options.excursion &&
           std::abs(p.ay - q.ay) <= options.epsilon_a &&
           std::abs(p.vy) <= options.epsilon_v;
  };

  LcWindow window;
  bool start_excursion = false;
  window.t_start = track.first_frame();
  window.truncated_start = true;
  for (int f = t_c - 1; f > track.first_frame(); --f) {
    if (std::abs(track.at_frame(f).y - y_c) > options.excursion) {
      start_excursion = true;
    }
    if (settled(f)) {
      window.t_start = f;
      window.truncated_start = false;
      break;
    }
  }
  if (window.truncated_start &&
      std::abs(track.points.front().y - y_c) > options.excursion) {
    start_excursion = true;
  }

  bool end_excursion = false;
  window.t_end = track.last_frame();
  window.truncated_end = true;
  for (int f = t_c + 1; f <= track.last_frame(); ++f) {
    if (std::abs(track.at_frame(f).y - y_c) > options.excursion) {
      end_excursion = true;
    }
    if (f > track.first_frame() && settled(f)) {
      window.t_end = f;
      window.truncated_end = false;
      break;
    }
  }

  // No lateral excursion on either side means there is no lane-change
  // geometry around this crossing at all.
  if (!start_excursion && !end_excursion) return std::nullopt;
  return window;
}

std::optional<std::pair<int, int>> select_neighbors(
    const Recording& recording, int ego_id, int t_start, int original_lane,
    int target_lane, const NeighborOptions& options) {
  const Track* ego = recording.find_track(ego_id);
  if (ego == nullptr || t_start < ego->first_frame() ||
      t_start > ego->last_frame()) {
    return std::nullopt;
  }
  const double ego_x = ego->at_frame(t_start).x;

  int por_id = -1;
  double por_gap = std::numeric_limits<double>::infinity();
  int ta_id = -1;
  double ta_gap = std::numeric_limits<double>::infinity();
  for (const auto& track : recording.tracks) {
    if (track.vehicle_id == ego_id) continue;
    if (t_start < track.first_frame() || t_start > track.last_frame()) continue;
    const TrackPoint& p = track.at_frame(t_start);
    const double dx = p.x - ego_x;
    if (p.lane_id == original_lane && dx > 0.0 && dx < options.max_por_gap &&
        dx < por_gap) {
      por_gap = dx;
      por_id = track.vehicle_id;
    }
    if (p.lane_id == target_lane && std::abs(dx) <= options.max_ta_gap) {
      if (std::abs(dx) < ta_gap ||
          (std::abs(dx) == ta_gap && track.vehicle_id < ta_id)) {
        ta_gap = std::abs(dx);
        ta_id = track.vehicle_id;
      }
    }
  }
  if (por_id < 0 || ta_id < 0) return std::nullopt;
  return std::make_pair(por_id, ta_id);
}

std::vector<LcEvent> extract_events(
    const Recording& recording,
    const std::unordered_map<int, VehicleType>& classes,
    const ExtractOptions& options) {
  std::vector<LcEvent> events;
  for (const auto& track : recording.tracks) {
    std::vector<LcEvent> ego_events;
    for (int t_c : detect_cross_lane(track)) {
      auto window = bound_lc_window(track, t_c, options.window);
      if (!window) continue;

      const int original_lane = track.at_frame(t_c - 1).lane_id;
      const int target_lane = track.at_frame(t_c).lane_id;
      auto neighbors =
          select_neighbors(recording, track.vehicle_id, window->t_start,
                           original_lane, target_lane, options.neighbors);
      if (!neighbors) continue;
      auto [por_id, ta_id] = *neighbors;

      const Track* por = recording.find_track(por_id);
      const Track* ta = recording.find_track(ta_id);
      if (!track.covers(window->t_start, window->t_end) ||
          !por->covers(window->t_start, window->t_end) ||
          !ta->covers(window->t_start, window->t_end)) {
        continue;
      }

      LcEvent event;
      event.recording_id = recording.recording_id;
      event.ego_id = track.vehicle_id;
      event.por_id = por_id;
      event.ta_id = ta_id;
      event.t_c = t_c;
      event.t_start = window->t_start;
      event.t_end = window->t_end;
      event.truncated = window->truncated();
      event.type_triple = {classes.at(event.ego_id), classes.at(por_id),
                           classes.at(ta_id)};
      if (options.type_filter && event.type_triple != *options.type_filter) {
        continue;
      }

      const int frames = event.t_end - event.t_start + 1;
      event.scenario.frame_rate = recording.frame_rate;
      event.scenario.points.resize(kScenarioDims, frames);
      for (int f = 0; f < frames; ++f) {
        const TrackPoint& e = track.at_frame(event.t_start + f);
        const TrackPoint& q = por->at_frame(event.t_start + f);
        const TrackPoint& a = ta->at_frame(event.t_start + f);
        event.scenario.points.col(f) << e.x, e.y, q.x, q.y, a.x, a.y;
      }
      ego_events.push_back(std::move(event));
    }

    // One ego crossing lanes repeatedly: overlapping windows keep only
    // the earliest event.
    std::sort(ego_events.begin(), ego_events.end(),
              [](const LcEvent& a, const LcEvent& b) {
                return a.t_start != b.t_start ? a.t_start < b.t_start
                                              : a.t_c < b.t_c;
              });
    int covered_until = std::numeric_limits<int>::min();
    for (auto& event : ego_events) {
      if (event.t_start <= covered_until) continue;
      covered_until = event.t_end;
      events.push_back(std::move(event));
    }
  }

  std::sort(events.begin(), events.end(), [](const LcEvent& a, const LcEvent& b) {
    if (a.t_c != b.t_c) return a.t_c < b.t_c;
    return a.ego_id < b.ego_id;
  });
  return events;
}

std::string events_manifest_csv(const std::vector<LcEvent>& events) {
  std::ostringstream out;
  out << "recordingId,egoId,porId,taId,tc,tStart,tEnd,truncated,egoType,"
         "porType,taType\n";
  for (const auto& e : events) {
    out << e.recording_id << ',' << e.ego_id << ',' << e.por_id << ','
        << e.ta_id << ',' << e.t_c << ',' << e.t_start << ',' << e.t_end << ','
        << (e.truncated ? 1 : 0) << ',' << to_string(e.type_triple[0]) << ','
        << to_string(e.type_triple[1]) << ',' << to_string(e.type_triple[2])
        << "\n";
  }
  return out.str();
}

}  // namespace lcpm
