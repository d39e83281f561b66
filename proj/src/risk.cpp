#include "lcpm/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcpm/errors.hpp"

namespace lcpm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Time interval during which two constant-velocity 1-d extents overlap.
// dp is the center offset, dv the relative velocity, h the sum of the
// half-extents. An empty interval is returned as (inf, -inf).
std::pair<double, double> axis_overlap_interval(double dp, double dv,
                                                double h) {
  if (dv == 0.0) {
    if (std::abs(dp) <= h) return {-kInf, kInf};
    return {kInf, -kInf};
  }
  double t1 = (-h - dp) / dv;
  double t2 = (h - dp) / dv;
  if (t1 > t2) std::swap(t1, t2);
  return {t1, t2};
}

}  // namespace

VehicleState vehicle_state_at(const Track& track, int frame) {
  const TrackPoint& p = track.at_frame(frame);
  VehicleState s;
  s.x = p.x;
  s.y = p.y;
  s.vx = p.vx;
  s.vy = p.vy;
  s.length = track.length;
  s.width = track.width;
  s.lane_id = p.lane_id;
  return s;
}

std::optional<double> ttc_type_a(const VehicleState& follower,
                                 const VehicleState& leader) {
  const double gap =
      (leader.x - follower.x) - (leader.length + follower.length) / 2.0;
  const double closing = follower.vx - leader.vx;
  if (closing <= 0.0) return std::nullopt;
  if (gap <= 0.0) return 0.0;  // already overlapping longitudinally
  return gap / closing;
}

std::optional<double> ttc_type_c(const VehicleState& a,
                                 const VehicleState& b) {
  auto [x_in, x_out] = axis_overlap_interval(b.x - a.x, b.vx - a.vx,
                                             (a.length + b.length) / 2.0);
  auto [y_in, y_out] = axis_overlap_interval(b.y - a.y, b.vy - a.vy,
                                             (a.width + b.width) / 2.0);
  const double enter = std::max(x_in, y_in);
  const double exit = std::min(x_out, y_out);
  if (enter > exit || exit < 0.0) return std::nullopt;
  return std::max(enter, 0.0);
}

std::string to_string(VehiclePair pair) {
  switch (pair) {
    case VehiclePair::kEgoPor: return "ego-por";
    case VehiclePair::kEgoTa: return "ego-ta";
    case VehiclePair::kPorTa: return "por-ta";
  }
  return "?";
}

std::string to_string(TtcGeometry geometry) {
  switch (geometry) {
    case TtcGeometry::kNone: return "none";
    case TtcGeometry::kRearEnd: return "A";
    case TtcGeometry::kCrossing: return "C";
  }
  return "?";
}

std::vector<TtcSample> pair_ttc_series(const Track& a, const Track& b,
                                       VehiclePair pair, int first_frame,
                                       int last_frame) {
  if (!a.covers(first_frame, last_frame) || !b.covers(first_frame, last_frame)) {
    throw ValidationError("both tracks must cover the requested frame range");
  }
  std::vector<TtcSample> series;
  series.reserve(static_cast<std::size_t>(last_frame - first_frame + 1));
  for (int f = first_frame; f <= last_frame; ++f) {
    VehicleState sa = vehicle_state_at(a, f);
    VehicleState sb = vehicle_state_at(b, f);
    TtcSample sample;
    sample.frame = f;
    sample.pair = pair;
    if (sa.lane_id == sb.lane_id) {
      const VehicleState& follower = sa.x <= sb.x ? sa : sb;
      const VehicleState& leader = sa.x <= sb.x ? sb : sa;
      sample.ttc = ttc_type_a(follower, leader);
      sample.geometry =
          sample.ttc.has_value() ? TtcGeometry::kRearEnd : TtcGeometry::kNone;
    } else {
      sample.ttc = ttc_type_c(sa, sb);
      sample.geometry =
          sample.ttc.has_value() ? TtcGeometry::kCrossing : TtcGeometry::kNone;
    }
    series.push_back(sample);
  }
  return series;
}

PrimitiveRisk primitive_risk(int primitive_id, int first_frame, int last_frame,
                             const std::array<std::vector<TtcSample>, 3>& series,
                             double ttc_cap) {
  PrimitiveRisk out;
  out.primitive_id = primitive_id;
  double sum = 0.0;
  int engaged = 0;
  for (std::size_t p = 0; p < series.size(); ++p) {
    double lowest = kInf;
    bool seen = false;
    for (const TtcSample& s : series[p]) {
      if (s.frame < first_frame || s.frame > last_frame) continue;
      if (!s.ttc.has_value()) continue;
      seen = true;
      lowest = std::min(lowest, *s.ttc);
    }
    if (!seen) continue;
    lowest = std::min(lowest, ttc_cap);
    out.per_pair_min_ttc[p] = lowest;
    sum += lowest;
    engaged++;
  }
  if (engaged > 0) out.risk = sum / engaged;
  return out;
}

std::vector<ClusterRiskRow> cluster_risk_stats(
    const std::vector<int>& cluster_of_primitive,
    const std::vector<PrimitiveRisk>& risks) {
  if (cluster_of_primitive.size() != risks.size()) {
    throw ValidationError("one cluster id per primitive risk is required");
  }
  int max_cluster = -1;
  for (int c : cluster_of_primitive) max_cluster = std::max(max_cluster, c);
  std::vector<std::vector<double>> values(
      static_cast<std::size_t>(max_cluster + 1));
  for (std::size_t i = 0; i < risks.size(); ++i) {
    if (risks[i].risk.has_value()) {
      values[cluster_of_primitive[i]].push_back(*risks[i].risk);
    }
  }

  std::vector<ClusterRiskRow> rows;
  for (int c = 0; c <= max_cluster; ++c) {
    ClusterRiskRow row;
    row.cluster = c;
    auto& v = values[c];
    row.frequency = static_cast<int>(v.size());
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      row.mean = mean;
      // Lower of the two middles for even counts.
      row.median = v[(v.size() - 1) / 2];
      if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        row.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
    }
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(),
            [](const ClusterRiskRow& a, const ClusterRiskRow& b) {
              if (a.mean.has_value() != b.mean.has_value()) {
                return a.mean.has_value();
              }
              if (a.mean.has_value() && *a.mean != *b.mean) {
                return *a.mean < *b.mean;
              }
              return a.cluster < b.cluster;
            });
  return rows;
}

}  // namespace lcpm
