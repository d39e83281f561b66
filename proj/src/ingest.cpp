#include "lcpm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "lcpm/csv.hpp"
#include "lcpm/errors.hpp"

namespace lcpm {

namespace {

std::vector<double> parse_marking_list(const std::string& text,
                                       const std::string& what) {
  std::vector<double> out;
  for (const auto& piece : csv::split(text, ';')) {
    if (piece.empty()) continue;
    try {
      std::size_t used = 0;
      double v = std::stod(piece, &used);
      if (used != piece.size()) throw std::invalid_argument(piece);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("non-numeric lane marking '" + piece + "' in " + what);
    }
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i] == out[i - 1]) {
      throw ValidationError("duplicate lane marking in " + what);
    }
  }
  return out;
}

void validate_track(const Track& track) {
  if (track.points.empty()) {
    throw ValidationError("track " + std::to_string(track.vehicle_id) +
                          " has no points");
  }
  if (!(track.length > 0.0) || !(track.width > 0.0)) {
    throw ValidationError("track " + std::to_string(track.vehicle_id) +
                          " has non-positive dimensions");
  }
  for (std::size_t i = 1; i < track.points.size(); ++i) {
    if (track.points[i].frame != track.points[i - 1].frame + 1) {
      throw ValidationError(
          "track " + std::to_string(track.vehicle_id) +
          " has non-consecutive frames around frame " +
          std::to_string(track.points[i - 1].frame));
    }
  }
}

}  // namespace

double Track::mean_vx() const {
  double sum = 0.0;
  for (const auto& p : points) sum += p.vx;
  return points.empty() ? 0.0 : sum / static_cast<double>(points.size());
}

const Track* Recording::find_track(int vehicle_id) const {
  for (const auto& t : tracks) {
    if (t.vehicle_id == vehicle_id) return &t;
  }
  return nullptr;
}

Recording parse_recording(const std::filesystem::path& tracks_csv,
                          const std::filesystem::path& tracks_meta_csv,
                          const std::filesystem::path& recording_meta_csv) {
  Recording rec;

  // Recording-level scalars.
  auto meta = csv::Table::read_file(recording_meta_csv);
  if (meta.row_count() == 0) {
    throw SchemaError("empty recording meta: " + recording_meta_csv.string());
  }
  rec.frame_rate = meta.cell_double(0, meta.column("frameRate"));
  if (!(rec.frame_rate > 0.0)) {
    throw ValidationError("frameRate must be positive in " +
                          recording_meta_csv.string());
  }
  if (meta.has_column("id")) {
    rec.recording_id = static_cast<int>(meta.cell_int(0, meta.column("id")));
  }
  auto upper = parse_marking_list(
      meta.cell(0, meta.column("upperLaneMarkings")), "upperLaneMarkings");
  auto lower = parse_marking_list(
      meta.cell(0, meta.column("lowerLaneMarkings")), "lowerLaneMarkings");
  if (!upper.empty()) rec.lane_markings.push_back(std::move(upper));
  if (!lower.empty()) rec.lane_markings.push_back(std::move(lower));

  // Vehicle dimensions. In the drone layout the meta "width" column is
  // the bounding-box extent along the road (vehicle length) and "height"
  // the extent across it (vehicle width).
  auto tmeta = csv::Table::read_file(tracks_meta_csv);
  std::map<int, std::pair<double, double>> dims;
  {
    auto c_id = tmeta.column("id");
    auto c_w = tmeta.column("width");
    auto c_h = tmeta.column("height");
    for (std::size_t r = 0; r < tmeta.row_count(); ++r) {
      int id = static_cast<int>(tmeta.cell_int(r, c_id));
      dims[id] = {tmeta.cell_double(r, c_w), tmeta.cell_double(r, c_h)};
    }
  }

  auto table = csv::Table::read_file(tracks_csv);
  auto c_frame = table.column("frame");
  auto c_id = table.column("id");
  auto c_x = table.column("x");
  auto c_y = table.column("y");
  auto c_vx = table.column("xVelocity");
  auto c_vy = table.column("yVelocity");
  auto c_ax = table.column("xAcceleration");
  auto c_ay = table.column("yAcceleration");
  auto c_lane = table.column("laneId");

  std::map<int, Track> by_id;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    int id = static_cast<int>(table.cell_int(r, c_id));
    TrackPoint p;
    p.frame = static_cast<int>(table.cell_int(r, c_frame));
    p.x = table.cell_double(r, c_x);
    p.y = table.cell_double(r, c_y);
    p.vx = table.cell_double(r, c_vx);
    p.vy = table.cell_double(r, c_vy);
    p.ax = table.cell_double(r, c_ax);
    p.ay = table.cell_double(r, c_ay);
    p.lane_id = static_cast<int>(table.cell_int(r, c_lane));
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) {
      it->second.vehicle_id = id;
      auto dim = dims.find(id);
      if (dim == dims.end()) {
        throw ValidationError("vehicle " + std::to_string(id) +
                              " has no row in " + tracks_meta_csv.string());
      }
      it->second.length = dim->second.first;
      it->second.width = dim->second.second;
    }
    it->second.points.push_back(p);
  }

  rec.tracks.reserve(by_id.size());
  for (auto& [id, track] : by_id) {
    std::sort(track.points.begin(), track.points.end(),
              [](const TrackPoint& a, const TrackPoint& b) {
                return a.frame < b.frame;
              });
    validate_track(track);
    rec.tracks.push_back(std::move(track));
  }
  return rec;
}

CanonicalizeResult canonicalize(const Recording& recording,
                                double ambiguous_vx_threshold) {
  CanonicalizeResult result;
  result.recording.recording_id = recording.recording_id;
  result.recording.frame_rate = recording.frame_rate;
  result.recording.lane_markings = recording.lane_markings;
  if (recording.tracks.empty()) return result;

  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo, y_lo = x_lo, y_hi = -x_lo;
  for (const auto& t : recording.tracks) {
    for (const auto& p : t.points) {
      x_lo = std::min(x_lo, p.x);
      x_hi = std::max(x_hi, p.x);
      y_lo = std::min(y_lo, p.y);
      y_hi = std::max(y_hi, p.y);
    }
  }
  for (const auto& set : recording.lane_markings) {
    for (double m : set) {
      y_lo = std::min(y_lo, m);
      y_hi = std::max(y_hi, m);
    }
  }
  const double x_sum = x_lo + x_hi;
  const double y_sum = y_lo + y_hi;

  // Backward-majority marking sets are mirrored along with their tracks.
  std::vector<std::pair<int, int>> band_votes(recording.lane_markings.size(),
                                              {0, 0});  // (forward, backward)

  for (const auto& track : recording.tracks) {
    double mv = track.mean_vx();
    if (std::abs(mv) < ambiguous_vx_threshold) {
      result.excluded_tracks++;
      continue;
    }
    // Vote for the marking band nearest the track's mean y.
    if (!recording.lane_markings.empty()) {
      double mean_y = 0.0;
      for (const auto& p : track.points) mean_y += p.y;
      mean_y /= static_cast<double>(track.points.size());
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < recording.lane_markings.size(); ++s) {
        const auto& set = recording.lane_markings[s];
        double center = (set.front() + set.back()) / 2.0;
        double d = std::abs(mean_y - center);
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      (mv > 0.0 ? band_votes[best].first : band_votes[best].second)++;
    }

    if (mv > 0.0) {
      result.recording.tracks.push_back(track);
      continue;
    }
    Track flipped = track;
    for (auto& p : flipped.points) {
      p.x = x_sum - p.x;
      p.y = y_sum - p.y;
      p.vx = -p.vx;
      p.vy = -p.vy;
      p.ax = -p.ax;
      p.ay = -p.ay;
    }
    result.recording.tracks.push_back(std::move(flipped));
  }

  for (std::size_t s = 0; s < result.recording.lane_markings.size(); ++s) {
    if (band_votes[s].second > band_votes[s].first) {
      auto& set = result.recording.lane_markings[s];
      for (double& m : set) m = y_sum - m;
      std::sort(set.begin(), set.end());
    }
  }
  return result;
}

Recording smooth_recording(const Recording& recording, int window) {
  if (window <= 1) return recording;
  if (window % 2 == 0) {
    throw ValidationError("smoothing window must be odd (got " +
                          std::to_string(window) + ")");
  }
  Recording out = recording;
  const int half = window / 2;
  for (std::size_t t = 0; t < recording.tracks.size(); ++t) {
    const auto& src = recording.tracks[t].points;
    auto& dst = out.tracks[t].points;
    const int n = static_cast<int>(src.size());
    for (int i = 0; i < n; ++i) {
      // Shrink the window symmetrically near the ends.
      int reach = std::min({half, i, n - 1 - i});
      double x = 0, y = 0, vx = 0, vy = 0, ax = 0, ay = 0;
      for (int j = i - reach; j <= i + reach; ++j) {
        x += src[j].x;
        y += src[j].y;
        vx += src[j].vx;
        vy += src[j].vy;
        ax += src[j].ax;
        ay += src[j].ay;
      }
      const double count = 2.0 * reach + 1.0;
      dst[i].x = x / count;
      dst[i].y = y / count;
      dst[i].vx = vx / count;
      dst[i].vy = vy / count;
      dst[i].ax = ax / count;
      dst[i].ay = ay / count;
    }
  }
  return out;
}

std::string serialize_recording(const Recording& recording) {
  std::ostringstream out;
  out << "# lcpm-canonical-recording=1\n";
  out << "# recordingId=" << recording.recording_id << "\n";
  out << "# frameRate=" << csv::format_double(recording.frame_rate) << "\n";
  for (std::size_t s = 0; s < recording.lane_markings.size(); ++s) {
    out << "# laneMarkings" << s << "=";
    for (std::size_t i = 0; i < recording.lane_markings[s].size(); ++i) {
      if (i > 0) out << ";";
      out << csv::format_double(recording.lane_markings[s][i]);
    }
    out << "\n";
  }
  out << "vehicleId,length,width,frame,x,y,vx,vy,ax,ay,laneId\n";
  for (const auto& t : recording.tracks) {
    for (const auto& p : t.points) {
      out << t.vehicle_id << ',' << csv::format_double(t.length) << ','
          << csv::format_double(t.width) << ',' << p.frame << ','
          << csv::format_double(p.x) << ',' << csv::format_double(p.y) << ','
          << csv::format_double(p.vx) << ',' << csv::format_double(p.vy) << ','
          << csv::format_double(p.ax) << ',' << csv::format_double(p.ay) << ','
          << p.lane_id << "\n";
    }
  }
  return out.str();
}

Recording parse_canonical_string(const std::string& text,
                                 const std::string& origin) {
  auto table = csv::Table::from_string(text, origin);
  Recording rec;
  const auto& meta = table.metadata();
  if (auto it = meta.find("recordingId"); it != meta.end()) {
    rec.recording_id = std::stoi(it->second);
  }
  if (auto it = meta.find("frameRate"); it != meta.end()) {
    rec.frame_rate = std::stod(it->second);
  } else {
    throw SchemaError("missing '# frameRate=' metadata in " + origin);
  }
  for (std::size_t s = 0;; ++s) {
    auto it = meta.find("laneMarkings" + std::to_string(s));
    if (it == meta.end()) break;
    rec.lane_markings.push_back(
        parse_marking_list(it->second, "laneMarkings" + std::to_string(s)));
  }

  auto c_vid = table.column("vehicleId");
  auto c_len = table.column("length");
  auto c_wid = table.column("width");
  auto c_frame = table.column("frame");
  auto c_x = table.column("x");
  auto c_y = table.column("y");
  auto c_vx = table.column("vx");
  auto c_vy = table.column("vy");
  auto c_ax = table.column("ax");
  auto c_ay = table.column("ay");
  auto c_lane = table.column("laneId");

  std::map<int, Track> by_id;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    int id = static_cast<int>(table.cell_int(r, c_vid));
    auto [it, inserted] = by_id.try_emplace(id);
    if (inserted) {
      it->second.vehicle_id = id;
      it->second.length = table.cell_double(r, c_len);
      it->second.width = table.cell_double(r, c_wid);
    }
    TrackPoint p;
    p.frame = static_cast<int>(table.cell_int(r, c_frame));
    p.x = table.cell_double(r, c_x);
    p.y = table.cell_double(r, c_y);
    p.vx = table.cell_double(r, c_vx);
    p.vy = table.cell_double(r, c_vy);
    p.ax = table.cell_double(r, c_ax);
    p.ay = table.cell_double(r, c_ay);
    p.lane_id = static_cast<int>(table.cell_int(r, c_lane));
    it->second.points.push_back(p);
  }
  for (auto& [id, track] : by_id) {
    std::sort(track.points.begin(), track.points.end(),
              [](const TrackPoint& a, const TrackPoint& b) {
                return a.frame < b.frame;
              });
    validate_track(track);
    rec.tracks.push_back(std::move(track));
  }
  return rec;
}

Recording parse_canonical(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_canonical_string(buf.str(), path.string());
}

void write_recording(const std::filesystem::path& path,
                     const Recording& recording) {
  csv::write_file_atomic(path, serialize_recording(recording));
}

}  // namespace lcpm
