#include "lcpm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lcpm/errors.hpp"

namespace lcpm {

namespace {

constexpr double kPi = 3.14159265358979323846;

double lane_center(const std::vector<double>& markings, int lane) {
  return (markings[lane - 1] + markings[lane]) / 2.0;
}

int lane_of(const std::vector<double>& markings, double y) {
  if (y < markings.front()) return 1;
  for (std::size_t i = 1; i < markings.size(); ++i) {
    if (y < markings[i]) return static_cast<int>(i);
  }
  return static_cast<int>(markings.size()) - 1;
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.duration_frames < 2) {
    throw ValidationError("synthetic spec needs at least 2 frames");
  }
  if (!(spec.frame_rate > 0.0)) {
    throw ValidationError("synthetic frame rate must be positive");
  }
  if (spec.lane_markings.size() < 2) {
    throw ValidationError("synthetic spec needs at least 2 lane markings");
  }
  if (!std::is_sorted(spec.lane_markings.begin(), spec.lane_markings.end()) ||
      std::adjacent_find(spec.lane_markings.begin(),
                         spec.lane_markings.end()) != spec.lane_markings.end()) {
    throw ValidationError("lane markings must be strictly increasing");
  }
  if (spec.noise_std < 0.0) {
    throw ValidationError("noise std must be non-negative");
  }
  int prev = 0;
  for (int b : spec.regime_boundaries) {
    if (b <= prev || b >= spec.duration_frames) {
      throw ValidationError("regime boundaries must be increasing and inside "
                            "(0, duration)");
    }
    prev = b;
  }
  const int lanes = static_cast<int>(spec.lane_markings.size()) - 1;
  for (const auto& v : spec.vehicles) {
    if (!(v.length > 0.0) || !(v.width > 0.0)) {
      throw ValidationError("vehicle " + std::to_string(v.id) +
                            " has non-positive dimensions");
    }
    if (v.lane < 1 || v.lane > lanes) {
      throw ValidationError("vehicle " + std::to_string(v.id) +
                            " starts outside the lane bands");
    }
    if (static_cast<int>(v.vx_per_regime.size()) != spec.regime_count()) {
      throw ValidationError("vehicle " + std::to_string(v.id) + " needs " +
                            std::to_string(spec.regime_count()) +
                            " per-regime velocities");
    }
    if (v.lane_change) {
      const auto& lc = *v.lane_change;
      if (lc.to_lane < 1 || lc.to_lane > lanes || lc.to_lane == v.lane) {
        throw ValidationError("vehicle " + std::to_string(v.id) +
                              " has an invalid lane-change target");
      }
      if (lc.duration_frames < 2 || lc.start_frame < 0 ||
          lc.start_frame + lc.duration_frames >= spec.duration_frames) {
        throw ValidationError("vehicle " + std::to_string(v.id) +
                              " lane change does not fit the recording");
      }
    }
  }
  for (std::size_t i = 0; i < spec.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.vehicles.size(); ++j) {
      const auto& a = spec.vehicles[i];
      const auto& b = spec.vehicles[j];
      if (a.id == b.id) {
        throw ValidationError("duplicate vehicle id " + std::to_string(a.id));
      }
      if (a.lane == b.lane &&
          std::abs(a.initial_x - b.initial_x) < (a.length + b.length) / 2.0) {
        throw ValidationError("vehicles " + std::to_string(a.id) + " and " +
                              std::to_string(b.id) +
                              " overlap at their initial positions");
      }
    }
  }
}

}  // namespace

SyntheticResult generate_synthetic(const SyntheticSpec& spec,
                                   std::uint64_t seed) {
  validate_spec(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Position noise is clipped so finite differences of noisy positions
  // stay within 3 * noise_std of the clean increment.
  auto noise = [&]() {
    if (spec.noise_std <= 0.0) return 0.0;
    double z = std::clamp(gauss(rng), -1.5, 1.5);
    return z * spec.noise_std;
  };

  const int frames = spec.duration_frames;
  const double dt = 1.0 / spec.frame_rate;

  SyntheticResult result;
  result.recording.recording_id = spec.recording_id;
  result.recording.frame_rate = spec.frame_rate;
  result.recording.lane_markings.push_back(spec.lane_markings);

  result.truth.regime_boundaries = spec.regime_boundaries;
  result.truth.regime_labels.resize(frames);
  {
    int regime = 0;
    for (int t = 0; t < frames; ++t) {
      while (regime < static_cast<int>(spec.regime_boundaries.size()) &&
             t >= spec.regime_boundaries[regime]) {
        ++regime;
      }
      result.truth.regime_labels[t] = regime;
    }
  }

  for (const auto& v : spec.vehicles) {
    Track track;
    track.vehicle_id = v.id;
    track.length = v.length;
    track.width = v.width;
    track.points.resize(frames);

    double clean_x = v.initial_x;
    const double y_from = lane_center(spec.lane_markings, v.lane);
    for (int t = 0; t < frames; ++t) {
      const double vx = v.vx_per_regime[result.truth.regime_labels[t]];
      double y = y_from, vy = 0.0, ay = 0.0;
      if (v.lane_change) {
        const auto& lc = *v.lane_change;
        const double y_to = lane_center(spec.lane_markings, lc.to_lane);
        const double span = y_to - y_from;
        const double dur_s = lc.duration_frames * dt;
        if (t >= lc.start_frame + lc.duration_frames) {
          y = y_to;
        } else if (t >= lc.start_frame) {
          // Cosine ease keeps the lateral profile symmetric about the
          // crossing and ends with zero lateral speed.
          double tau = (t - lc.start_frame) * dt;
          y = y_from + span * (1.0 - std::cos(kPi * tau / dur_s)) / 2.0;
          vy = span * kPi / (2.0 * dur_s) * std::sin(kPi * tau / dur_s);
          ay = span * kPi * kPi / (2.0 * dur_s * dur_s) *
               std::cos(kPi * tau / dur_s);
        }
      }
      TrackPoint& p = track.points[t];
      p.frame = t;
      p.x = clean_x + noise();
      p.y = y + noise();
      p.vx = vx;
      p.vy = vy;
      p.ax = 0.0;
      p.ay = ay;
      p.lane_id = lane_of(spec.lane_markings, y);
      clean_x += vx * dt;
    }
    result.recording.tracks.push_back(std::move(track));

    if (v.role == "ego") result.truth.ego_id = v.id;
    if (v.role == "por") result.truth.por_id = v.id;
    if (v.role == "ta") result.truth.ta_id = v.id;
  }

  if (result.truth.ego_id >= 0) {
    const Track* ego = result.recording.find_track(result.truth.ego_id);
    for (std::size_t i = 1; i < ego->points.size(); ++i) {
      if (ego->points[i].lane_id != ego->points[i - 1].lane_id) {
        result.truth.crossing_frame = ego->points[i].frame;
        break;
      }
    }
  }
  return result;
}

RegimeScenario make_regime_scenario(const Eigen::MatrixXd& regime_means,
                                    const std::vector<int>& regime_lengths,
                                    double noise_std, std::uint64_t seed,
                                    double frame_rate) {
  if (regime_means.cols() != static_cast<Eigen::Index>(regime_lengths.size())) {
    throw ValidationError("one length per regime mean is required");
  }
  int total = 0;
  for (int len : regime_lengths) {
    if (len < 1) throw ValidationError("regime lengths must be positive");
    total += len;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  RegimeScenario out;
  out.scenario.frame_rate = frame_rate;
  out.scenario.points.resize(regime_means.rows(), total);
  out.labels.resize(total);
  int t = 0;
  for (std::size_t r = 0; r < regime_lengths.size(); ++r) {
    for (int i = 0; i < regime_lengths[r]; ++i, ++t) {
      out.labels[t] = static_cast<int>(r);
      for (Eigen::Index d = 0; d < regime_means.rows(); ++d) {
        out.scenario.points(d, t) =
            regime_means(d, static_cast<Eigen::Index>(r)) +
            noise_std * gauss(rng);
      }
    }
  }
  return out;
}

namespace {

using nlohmann::json;

SyntheticSpec spec_from_json(const json& j, const std::string& origin) {
  try {
    SyntheticSpec spec;
    spec.recording_id = j.value("recording_id", 0);
    spec.frame_rate = j.value("frame_rate", 25.0);
    spec.duration_frames = j.at("duration_frames").get<int>();
    spec.lane_markings = j.at("lane_markings").get<std::vector<double>>();
    spec.noise_std = j.value("noise_std", 0.0);
    spec.regime_boundaries =
        j.value("regime_boundaries", std::vector<int>{});
    for (const auto& jv : j.at("vehicles")) {
      SyntheticVehicle v;
      v.id = jv.at("id").get<int>();
      v.role = jv.value("role", "");
      v.length = jv.value("length", 4.5);
      v.width = jv.value("width", 2.0);
      v.initial_x = jv.value("initial_x", 0.0);
      v.lane = jv.at("lane").get<int>();
      v.vx_per_regime = jv.at("vx_per_regime").get<std::vector<double>>();
      if (jv.contains("lane_change")) {
        SyntheticLaneChange lc;
        lc.to_lane = jv["lane_change"].at("to_lane").get<int>();
        lc.start_frame = jv["lane_change"].at("start_frame").get<int>();
        lc.duration_frames = jv["lane_change"].at("duration_frames").get<int>();
        v.lane_change = lc;
      }
      spec.vehicles.push_back(std::move(v));
    }
    return spec;
  } catch (const json::exception& e) {
    throw SchemaError("invalid synthetic spec " + origin + ": " + e.what());
  }
}

}  // namespace

SyntheticSpec SyntheticSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return spec_from_json(j, path.string());
}

SyntheticSpec SyntheticSpec::from_json_string(const std::string& text,
                                              const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + origin + ": " + e.what());
  }
  return spec_from_json(j, origin);
}

std::string SyntheticSpec::to_json_string() const {
  json j;
  j["recording_id"] = recording_id;
  j["frame_rate"] = frame_rate;
  j["duration_frames"] = duration_frames;
  j["lane_markings"] = lane_markings;
  j["noise_std"] = noise_std;
  j["regime_boundaries"] = regime_boundaries;
  j["vehicles"] = json::array();
  for (const auto& v : vehicles) {
    json jv;
    jv["id"] = v.id;
    jv["role"] = v.role;
    jv["length"] = v.length;
    jv["width"] = v.width;
    jv["initial_x"] = v.initial_x;
    jv["lane"] = v.lane;
    jv["vx_per_regime"] = v.vx_per_regime;
    if (v.lane_change) {
      jv["lane_change"] = {{"to_lane", v.lane_change->to_lane},
                           {"start_frame", v.lane_change->start_frame},
                           {"duration_frames", v.lane_change->duration_frames}};
    }
    j["vehicles"].push_back(std::move(jv));
  }
  return j.dump(2) + "\n";
}

}  // namespace lcpm
