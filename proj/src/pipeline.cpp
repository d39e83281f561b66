#include "lcpm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "lcpm/csv.hpp"
#include "lcpm/dtw.hpp"
#include "lcpm/errors.hpp"
#include "lcpm/ingest.hpp"
#include "lcpm/lc_extract.hpp"
#include "lcpm/parallel.hpp"
#include "lcpm/prep.hpp"
#include "lcpm/risk.hpp"
#include "lcpm/synth.hpp"

namespace lcpm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- artifact names -------------------------------------------------

constexpr const char* kRecordingCsv = "recording.csv";
constexpr const char* kTruthJson = "truth.json";
constexpr const char* kEventsCsv = "events.csv";
constexpr const char* kScenariosCsv = "scenarios.csv";
constexpr const char* kModelsJson = "models.json";
constexpr const char* kSegmentsCsv = "segments.csv";
constexpr const char* kPrimitivesCsv = "primitives.csv";
constexpr const char* kPreparedCsv = "prepared.csv";
constexpr const char* kClustersCsv = "clusters.csv";
constexpr const char* kElbowCsv = "elbow.csv";
constexpr const char* kClusterFrequencyCsv = "cluster_frequency.csv";
constexpr const char* kClusterDurationsCsv = "cluster_durations.csv";
constexpr const char* kRiskCsv = "risk.csv";
constexpr const char* kClusterRiskStatsCsv = "cluster_risk_stats.csv";
constexpr const char* kTtcHistogramCsv = "ttc_histogram.csv";
constexpr const char* kManifestJson = "manifest.json";

constexpr int kHistogramBins = 20;

// Per-purpose seeds derived from the master seed.
constexpr std::uint64_t kClassifySeedOffset = 1;
constexpr std::uint64_t kHmmSeedOffset = 2;
constexpr std::uint64_t kClusterSeedOffset = 3;

// ---- small utilities -------------------------------------------------

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string();
}

}  // namespace

// ---- configuration ----------------------------------------------------

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
  return from_string(read_text_file(path), path.string());
}

PipelineConfig PipelineConfig::from_string(const std::string& text,
                                           const std::string& origin) {
  PipelineConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw SchemaError("expected 'key = value' at line " +
                        std::to_string(line_no) + " of " + origin);
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto as_double = [&]() {
      try {
        return std::stod(value);
      } catch (const std::exception&) {
        throw ParseError("non-numeric value for " + key + " in " + origin);
      }
    };
    auto as_int = [&]() {
      try {
        return std::stoi(value);
      } catch (const std::exception&) {
        throw ParseError("non-integer value for " + key + " in " + origin);
      }
    };
    if (key == "input.tracks") c.tracks_csv = value;
    else if (key == "input.tracks_meta") c.tracks_meta_csv = value;
    else if (key == "input.recording_meta") c.recording_meta_csv = value;
    else if (key == "input.synth_spec") c.synth_spec = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "seed") c.seed = std::stoull(value);
    else if (key == "jobs") c.jobs = as_int();
    else if (key == "ingest.smoothing_window") c.smoothing_window = as_int();
    else if (key == "extract.type_filter") c.type_filter = value;
    else if (key == "extract.excursion") c.excursion = as_double();
    else if (key == "extract.epsilon_a") c.epsilon_a = as_double();
    else if (key == "extract.epsilon_v") c.epsilon_v = as_double();
    else if (key == "extract.max_por_gap") c.max_por_gap = as_double();
    else if (key == "extract.max_ta_gap") c.max_ta_gap = as_double();
    else if (key == "segment.min_frames") c.min_frames = as_int();
    else if (key == "segment.n_max") c.n_max = as_int();
    else if (key == "segment.model_selection") c.model_selection = value;
    else if (key == "segment.decode") c.decode = value;
    else if (key == "cluster.l") c.resample_length = as_int();
    else if (key == "cluster.k") c.k = as_int();
    else if (key == "cluster.k_range") c.k_range = value;
    else if (key == "cluster.center") c.center = value;
    else if (key == "risk.ttc_cap") c.ttc_cap = as_double();
    else {
      throw SchemaError("unknown config key '" + key + "' in " + origin);
    }
  }
  return c;
}

std::string PipelineConfig::to_string() const {
  std::ostringstream out;
  out << "input.tracks = " << tracks_csv << "\n";
  out << "input.tracks_meta = " << tracks_meta_csv << "\n";
  out << "input.recording_meta = " << recording_meta_csv << "\n";
  out << "input.synth_spec = " << synth_spec << "\n";
  out << "output_dir = " << output_dir << "\n";
  out << "seed = " << seed << "\n";
  out << "jobs = " << jobs << "\n";
  out << "ingest.smoothing_window = " << smoothing_window << "\n";
  out << "extract.type_filter = " << type_filter << "\n";
  out << "extract.excursion = " << csv::format_double(excursion) << "\n";
  out << "extract.epsilon_a = " << csv::format_double(epsilon_a) << "\n";
  out << "extract.epsilon_v = " << csv::format_double(epsilon_v) << "\n";
  out << "extract.max_por_gap = " << csv::format_double(max_por_gap) << "\n";
  out << "extract.max_ta_gap = " << csv::format_double(max_ta_gap) << "\n";
  out << "segment.min_frames = " << min_frames << "\n";
  out << "segment.n_max = " << n_max << "\n";
  out << "segment.model_selection = " << model_selection << "\n";
  out << "segment.decode = " << decode << "\n";
  out << "cluster.l = " << resample_length << "\n";
  out << "cluster.k = " << k << "\n";
  out << "cluster.k_range = " << k_range << "\n";
  out << "cluster.center = " << center << "\n";
  out << "risk.ttc_cap = " << csv::format_double(ttc_cap) << "\n";
  return out.str();
}

fs::path PipelineConfig::effective_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv("LCPM_OUTPUT_DIR")) {
    if (*env != '\0') return env;
  }
  throw ValidationError(
      "no output directory (set output_dir or LCPM_OUTPUT_DIR)");
}

SelectionCriterion PipelineConfig::selection_criterion() const {
  if (model_selection == "max-ll") return SelectionCriterion::kMaxLl;
  if (model_selection == "paper-literal") return SelectionCriterion::kMinLl;
  throw ValidationError("segment.model_selection must be 'max-ll' or "
                        "'paper-literal', got '" + model_selection + "'");
}

DecodeMode PipelineConfig::decode_mode() const {
  if (decode == "viterbi") return DecodeMode::kViterbi;
  if (decode == "posterior-argmax") return DecodeMode::kPosteriorArgmax;
  throw ValidationError("segment.decode must be 'viterbi' or "
                        "'posterior-argmax', got '" + decode + "'");
}

CenterMode PipelineConfig::center_mode() const {
  if (center == "dba") return CenterMode::kDba;
  if (center == "medoid") return CenterMode::kMedoid;
  if (center == "euclidean") return CenterMode::kEuclidean;
  throw ValidationError("cluster.center must be 'dba', 'medoid' or "
                        "'euclidean', got '" + center + "'");
}

std::vector<int> PipelineConfig::parsed_k_range() const {
  std::vector<int> out;
  if (k_range.empty()) return out;
  auto dots = k_range.find("..");
  try {
    if (dots != std::string::npos) {
      int lo = std::stoi(k_range.substr(0, dots));
      int hi = std::stoi(k_range.substr(dots + 2));
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      for (const auto& piece : csv::split(k_range, ',')) {
        out.push_back(std::stoi(trim(piece)));
      }
    }
  } catch (const std::exception&) {
    throw ParseError("cluster.k_range must look like '1..6' or '2,4,8'");
  }
  if (out.empty()) throw ValidationError("cluster.k_range is empty");
  return out;
}

namespace {

// ---- stage cache ------------------------------------------------------

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kExtract: return "extract";
    case Stage::kSegment: return "segment";
    case Stage::kCluster: return "cluster";
    case Stage::kRisk: return "risk";
  }
  return "?";
}

struct StageIo {
  std::vector<fs::path> inputs;    // hashed by content
  std::string settings;            // hashed verbatim
  std::vector<const char*> outputs;
};

std::uint64_t stage_hash(const std::string& name, const StageIo& io) {
  std::uint64_t h = fnv1a("lcpm-stage-v1/" + name);
  h = fnv1a(io.settings, h);
  for (const auto& path : io.inputs) {
    h = fnv1a("\x1f", h);
    h = fnv1a(read_text_file(path), h);
  }
  return h;
}

bool cache_satisfies(const fs::path& dir, const std::string& name,
                     std::uint64_t hash, const StageIo& io) {
  fs::path stamp = dir / (name + ".stamp");
  std::ifstream in(stamp);
  if (!in) return false;
  std::string stored;
  std::getline(in, stored);
  if (stored != std::to_string(hash)) return false;
  for (const char* out : io.outputs) {
    if (!fs::exists(dir / out)) return false;
  }
  return true;
}

void write_stamp(const fs::path& dir, const std::string& name,
                 std::uint64_t hash) {
  csv::write_file_atomic(dir / (name + ".stamp"), std::to_string(hash) + "\n");
}

// ---- artifact readers -------------------------------------------------

struct EventRow {
  int recording_id, ego_id, por_id, ta_id, t_c, t_start, t_end;
  bool truncated;
};

std::vector<EventRow> read_events(const fs::path& path) {
  auto table = csv::Table::read_file(path);
  std::vector<EventRow> rows;
  auto ce = table.column("egoId");
  auto cp = table.column("porId");
  auto ca = table.column("taId");
  auto cr = table.column("recordingId");
  auto cc = table.column("tc");
  auto cs = table.column("tStart");
  auto cn = table.column("tEnd");
  auto ct = table.column("truncated");
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    EventRow row;
    row.recording_id = static_cast<int>(table.cell_int(r, cr));
    row.ego_id = static_cast<int>(table.cell_int(r, ce));
    row.por_id = static_cast<int>(table.cell_int(r, cp));
    row.ta_id = static_cast<int>(table.cell_int(r, ca));
    row.t_c = static_cast<int>(table.cell_int(r, cc));
    row.t_start = static_cast<int>(table.cell_int(r, cs));
    row.t_end = static_cast<int>(table.cell_int(r, cn));
    row.truncated = table.cell_int(r, ct) != 0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<Scenario> read_scenarios(const fs::path& path) {
  auto table = csv::Table::read_file(path);
  double frame_rate = 25.0;
  if (auto it = table.metadata().find("frameRate"); it != table.metadata().end()) {
    frame_rate = std::stod(it->second);
  }
  auto c_event = table.column("eventIndex");
  std::array<std::size_t, 6> cols = {
      table.column("egoX"), table.column("egoY"), table.column("porX"),
      table.column("porY"), table.column("taX"),  table.column("taY")};
  std::map<int, std::vector<std::array<double, 6>>> grouped;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    int event = static_cast<int>(table.cell_int(r, c_event));
    std::array<double, 6> p;
    for (int d = 0; d < 6; ++d) p[d] = table.cell_double(r, cols[d]);
    grouped[event].push_back(p);
  }
  std::vector<Scenario> scenarios;
  for (auto& [event, points] : grouped) {
    if (event != static_cast<int>(scenarios.size())) {
      throw ValidationError("scenario indices must be contiguous in " +
                            path.string());
    }
    Scenario s;
    s.frame_rate = frame_rate;
    s.points.resize(kScenarioDims, points.size());
    for (std::size_t t = 0; t < points.size(); ++t) {
      for (int d = 0; d < 6; ++d) s.points(d, static_cast<int>(t)) = points[t][d];
    }
    scenarios.push_back(std::move(s));
  }
  return scenarios;
}

struct PrimitiveRow {
  int primitive_id, event_index, state, start_offset, end_offset;
};

std::vector<PrimitiveRow> read_primitives(const fs::path& path) {
  auto table = csv::Table::read_file(path);
  auto cp = table.column("primitiveId");
  auto ce = table.column("eventIndex");
  auto cs = table.column("state");
  auto ca = table.column("startOffset");
  auto cb = table.column("endOffset");
  std::vector<PrimitiveRow> rows;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    rows.push_back({static_cast<int>(table.cell_int(r, cp)),
                    static_cast<int>(table.cell_int(r, ce)),
                    static_cast<int>(table.cell_int(r, cs)),
                    static_cast<int>(table.cell_int(r, ca)),
                    static_cast<int>(table.cell_int(r, cb))});
  }
  return rows;
}

std::vector<std::pair<int, int>> read_cluster_assignments(const fs::path& path) {
  auto table = csv::Table::read_file(path);
  auto cp = table.column("primitiveId");
  auto cc = table.column("cluster");
  std::vector<std::pair<int, int>> rows;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    rows.emplace_back(static_cast<int>(table.cell_int(r, cp)),
                      static_cast<int>(table.cell_int(r, cc)));
  }
  return rows;
}

// ---- stage bodies -----------------------------------------------------

void do_ingest(const PipelineConfig& config, const fs::path& dir) {
  const bool synth = !config.synth_spec.empty();
  if (!synth && (config.tracks_csv.empty() || config.tracks_meta_csv.empty() ||
                 config.recording_meta_csv.empty())) {
    throw ValidationError(
        "ingest needs either input.synth_spec or the three recording files");
  }
  Recording canonical;
  if (synth) {
    auto spec = SyntheticSpec::from_json_file(config.synth_spec);
    auto generated = generate_synthetic(spec, config.seed);
    canonical =
        canonicalize(smooth_recording(generated.recording,
                                      config.smoothing_window)).recording;
    json truth;
    truth["regime_labels"] = generated.truth.regime_labels;
    truth["regime_boundaries"] = generated.truth.regime_boundaries;
    truth["crossing_frame"] = generated.truth.crossing_frame;
    truth["ego_id"] = generated.truth.ego_id;
    truth["por_id"] = generated.truth.por_id;
    truth["ta_id"] = generated.truth.ta_id;
    csv::write_file_atomic(dir / kTruthJson, truth.dump(2) + "\n");
  } else {
    Recording raw = parse_recording(config.tracks_csv, config.tracks_meta_csv,
                                    config.recording_meta_csv);
    canonical =
        canonicalize(smooth_recording(raw, config.smoothing_window)).recording;
  }
  write_recording(dir / kRecordingCsv, canonical);
}

void do_extract(const PipelineConfig& config, const fs::path& dir) {
  Recording recording = parse_canonical(dir / kRecordingCsv);

  ExtractOptions options;
  options.window.excursion = config.excursion;
  options.window.epsilon_a = config.epsilon_a;
  options.window.epsilon_v = config.epsilon_v;
  options.neighbors.max_por_gap = config.max_por_gap;
  options.neighbors.max_ta_gap = config.max_ta_gap;
  if (config.type_filter == "none") {
    options.type_filter.reset();
  } else {
    auto parts = csv::split(config.type_filter, ',');
    if (parts.size() != 3) {
      throw ValidationError(
          "extract.type_filter must be 'none' or three comma-separated "
          "classes");
    }
    options.type_filter = {vehicle_type_from_string(trim(parts[0])),
                           vehicle_type_from_string(trim(parts[1])),
                           vehicle_type_from_string(trim(parts[2]))};
  }

  auto classes =
      classify_recording(recording, config.seed + kClassifySeedOffset);
  auto events = extract_events(recording, classes, options);

  csv::write_file_atomic(dir / kEventsCsv, events_manifest_csv(events));

  std::ostringstream scen;
  scen << "# frameRate=" << csv::format_double(recording.frame_rate) << "\n";
  scen << "eventIndex,frame,egoX,egoY,porX,porY,taX,taY\n";
  for (std::size_t e = 0; e < events.size(); ++e) {
    const Scenario& s = events[e].scenario;
    for (int t = 0; t < s.length(); ++t) {
      scen << e << ',' << events[e].t_start + t;
      for (int d = 0; d < kScenarioDims; ++d) {
        scen << ',' << csv::format_double(s.points(d, t));
      }
      scen << "\n";
    }
  }
  csv::write_file_atomic(dir / kScenariosCsv, scen.str());
}

void do_segment(const PipelineConfig& config, const fs::path& dir) {
  auto scenarios = read_scenarios(dir / kScenariosCsv);
  const auto criterion = config.selection_criterion();
  const auto mode = config.decode_mode();

  struct PerScenario {
    SelectResult selection;
    std::vector<int> states;
    std::vector<StateRun> runs;
  };
  std::vector<PerScenario> results(scenarios.size());
  parallel_for(static_cast<int>(scenarios.size()), config.jobs, [&](int i) {
    auto& slot = results[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd& obs = scenarios[static_cast<std::size_t>(i)].points;
    int n_max = std::min<int>(config.n_max, static_cast<int>(obs.cols()));
    slot.selection = select_model(obs, n_max, config.seed + kHmmSeedOffset,
                                  criterion);
    slot.states = decode(slot.selection.fit.model, obs, mode);
    slot.runs = state_runs(slot.states, config.min_frames);
  });

  json models = json::array();
  std::ostringstream segs;
  segs << "eventIndex,state,startOffset,endOffset,frames,kept\n";
  std::ostringstream prims;
  prims << "primitiveId,eventIndex,state,startOffset,endOffset,frames\n";
  int primitive_id = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    json m;
    m["event"] = i;
    m["selected_n"] = r.selection.n_selected;
    m["criterion"] = config.model_selection;
    m["sweep"] = json::array();
    for (const auto& entry : r.selection.sweep) {
      m["sweep"].push_back({{"n", entry.n_states},
                            {"log_likelihood", entry.log_likelihood},
                            {"status", entry.status}});
    }
    const HmmModel& model = r.selection.fit.model;
    m["initial"] = std::vector<double>(model.initial.data(),
                                       model.initial.data() + model.initial.size());
    m["transition"] = json::array();
    for (int row = 0; row < model.n_states; ++row) {
      std::vector<double> v(model.n_states);
      for (int col = 0; col < model.n_states; ++col) {
        v[static_cast<std::size_t>(col)] = model.transition(row, col);
      }
      m["transition"].push_back(v);
    }
    m["states"] = json::array();
    for (const auto& emission : model.emissions) {
      json components = json::array();
      for (const auto& comp : emission.components) {
        json jc;
        jc["weight"] = comp.weight;
        jc["mean"] = std::vector<double>(comp.mean.data(),
                                         comp.mean.data() + comp.mean.size());
        jc["covariance"] = json::array();
        for (Eigen::Index row = 0; row < comp.covariance.rows(); ++row) {
          std::vector<double> v(static_cast<std::size_t>(comp.covariance.cols()));
          for (Eigen::Index col = 0; col < comp.covariance.cols(); ++col) {
            v[static_cast<std::size_t>(col)] = comp.covariance(row, col);
          }
          jc["covariance"].push_back(v);
        }
        components.push_back(std::move(jc));
      }
      m["states"].push_back({{"components", std::move(components)}});
    }
    m["log_likelihood_trace"] = r.selection.fit.log_likelihood_trace;
    m["converged"] = r.selection.fit.converged;
    models.push_back(std::move(m));

    for (const auto& run : r.runs) {
      segs << i << ',' << run.state << ',' << run.first_frame << ','
           << run.last_frame << ',' << run.length() << ','
           << (run.kept ? 1 : 0) << "\n";
      if (run.kept) {
        prims << primitive_id++ << ',' << i << ',' << run.state << ','
              << run.first_frame << ',' << run.last_frame << ','
              << run.length() << "\n";
      }
    }
  }

  csv::write_file_atomic(dir / kModelsJson, models.dump(2) + "\n");
  csv::write_file_atomic(dir / kSegmentsCsv, segs.str());
  csv::write_file_atomic(dir / kPrimitivesCsv, prims.str());
}

void do_cluster(const PipelineConfig& config, const fs::path& dir) {
  auto scenarios = read_scenarios(dir / kScenariosCsv);
  auto primitives = read_primitives(dir / kPrimitivesCsv);

  std::vector<Eigen::MatrixXd> prepared(primitives.size());
  double frame_rate = scenarios.empty() ? 25.0 : scenarios.front().frame_rate;
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& p = primitives[i];
    if (p.event_index < 0 ||
        p.event_index >= static_cast<int>(scenarios.size())) {
      throw ValidationError("primitive " + std::to_string(p.primitive_id) +
                            " references a missing scenario");
    }
    const Eigen::MatrixXd& points = scenarios[p.event_index].points;
    Eigen::MatrixXd slice =
        points.middleCols(p.start_offset, p.end_offset - p.start_offset + 1);
    prepared[i] = normalize_minmax(resample(slice, config.resample_length));
  }

  std::ostringstream prep;
  prep << "primitiveId";
  for (int c = 0; c < kScenarioDims * config.resample_length; ++c) {
    prep << ",v" << c;
  }
  prep << "\n";
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    prep << primitives[i].primitive_id;
    Eigen::VectorXd flat = flatten(prepared[i]);
    for (Eigen::Index c = 0; c < flat.size(); ++c) {
      prep << ',' << csv::format_double(flat(c));
    }
    prep << "\n";
  }
  csv::write_file_atomic(dir / kPreparedCsv, prep.str());

  ClusterOptions options;
  options.center_mode = config.center_mode();
  options.jobs = config.jobs;

  if (primitives.empty()) {
    // Nothing to cluster: emit empty (header-only) artifacts so the run
    // completes and downstream readers see consistent schemas.
    csv::write_file_atomic(dir / kClustersCsv,
                           "primitiveId,cluster,dtwToCenter\n");
    csv::write_file_atomic(dir / kClusterFrequencyCsv, "cluster,count\n");
    csv::write_file_atomic(dir / kClusterDurationsCsv,
                           "cluster,primitiveId,frames,seconds\n");
    if (!config.k_range.empty()) {
      csv::write_file_atomic(dir / kElbowCsv,
                             "k,lambdaW,changeRate,smoothedChangeRate\n");
    }
    return;
  }

  auto k_values = config.parsed_k_range();
  if (!k_values.empty()) {
    auto rows = elbow_curve(prepared, k_values,
                            config.seed + kClusterSeedOffset, options);
    std::ostringstream elbow;
    elbow << "k,lambdaW,changeRate,smoothedChangeRate\n";
    for (const auto& row : rows) {
      elbow << row.k << ',' << csv::format_double(row.lambda_w) << ','
            << opt_cell(row.change_rate) << ','
            << opt_cell(row.smoothed_change_rate) << "\n";
    }
    csv::write_file_atomic(dir / kElbowCsv, elbow.str());
  }

  ClusterModel model = kmeans_dtw(prepared, config.k,
                                  config.seed + kClusterSeedOffset, options);

  std::ostringstream clusters;
  clusters << "primitiveId,cluster,dtwToCenter\n";
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    clusters << primitives[i].primitive_id << ',' << model.assignment[i] << ','
             << csv::format_double(model.dist_to_center[i]) << "\n";
  }
  csv::write_file_atomic(dir / kClustersCsv, clusters.str());

  std::vector<int> counts(model.k, 0);
  for (int a : model.assignment) counts[a]++;
  std::ostringstream freq;
  freq << "cluster,count\n";
  for (int c = 0; c < model.k; ++c) freq << c << ',' << counts[c] << "\n";
  csv::write_file_atomic(dir / kClusterFrequencyCsv, freq.str());

  std::ostringstream durations;
  durations << "cluster,primitiveId,frames,seconds\n";
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    int frames = primitives[i].end_offset - primitives[i].start_offset + 1;
    durations << model.assignment[i] << ',' << primitives[i].primitive_id
              << ',' << frames << ','
              << csv::format_double(frames / frame_rate) << "\n";
  }
  csv::write_file_atomic(dir / kClusterDurationsCsv, durations.str());
}

void do_risk(const PipelineConfig& config, const fs::path& dir) {
  Recording recording = parse_canonical(dir / kRecordingCsv);
  auto events = read_events(dir / kEventsCsv);
  auto primitives = read_primitives(dir / kPrimitivesCsv);
  auto assignments = read_cluster_assignments(dir / kClustersCsv);

  std::map<int, int> cluster_of;
  int n_clusters = 0;
  for (auto [pid, cluster] : assignments) {
    cluster_of[pid] = cluster;
    n_clusters = std::max(n_clusters, cluster + 1);
  }

  // One TTC series triple per event, shared by its primitives.
  std::vector<std::array<std::vector<TtcSample>, 3>> series(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    const EventRow& ev = events[e];
    const Track* ego = recording.find_track(ev.ego_id);
    const Track* por = recording.find_track(ev.por_id);
    const Track* ta = recording.find_track(ev.ta_id);
    if (ego == nullptr || por == nullptr || ta == nullptr) {
      throw ValidationError("event " + std::to_string(e) +
                            " references vehicles missing from the recording");
    }
    series[e][0] = pair_ttc_series(*ego, *por, VehiclePair::kEgoPor,
                                   ev.t_start, ev.t_end);
    series[e][1] = pair_ttc_series(*ego, *ta, VehiclePair::kEgoTa, ev.t_start,
                                   ev.t_end);
    series[e][2] = pair_ttc_series(*por, *ta, VehiclePair::kPorTa, ev.t_start,
                                   ev.t_end);
  }

  std::vector<PrimitiveRisk> risks;
  std::vector<int> clusters;
  std::ostringstream risk_csv;
  risk_csv << "primitiveId,cluster,minTtcEgoPor,minTtcEgoTa,minTtcPorTa,risk\n";
  std::vector<std::vector<double>> cluster_samples(
      static_cast<std::size_t>(n_clusters));
  for (const auto& p : primitives) {
    const EventRow& ev = events[static_cast<std::size_t>(p.event_index)];
    const int first = ev.t_start + p.start_offset;
    const int last = ev.t_start + p.end_offset;
    PrimitiveRisk risk = primitive_risk(p.primitive_id, first, last,
                                        series[p.event_index], config.ttc_cap);
    auto it = cluster_of.find(p.primitive_id);
    if (it == cluster_of.end()) {
      throw ValidationError("primitive " + std::to_string(p.primitive_id) +
                            " has no cluster assignment");
    }
    const int cluster = it->second;
    risk_csv << p.primitive_id << ',' << cluster << ','
             << opt_cell(risk.per_pair_min_ttc[0]) << ','
             << opt_cell(risk.per_pair_min_ttc[1]) << ','
             << opt_cell(risk.per_pair_min_ttc[2]) << ','
             << opt_cell(risk.risk) << "\n";
    for (const auto& s : series[p.event_index]) {
      for (const auto& sample : s) {
        if (sample.frame < first || sample.frame > last) continue;
        if (sample.ttc.has_value()) {
          cluster_samples[cluster].push_back(
              std::min(*sample.ttc, config.ttc_cap));
        }
      }
    }
    risks.push_back(std::move(risk));
    clusters.push_back(cluster);
  }
  csv::write_file_atomic(dir / kRiskCsv, risk_csv.str());

  auto stats = cluster_risk_stats(clusters, risks);
  std::ostringstream stats_csv;
  stats_csv << "cluster,frequency,stddev,mean,median\n";
  for (const auto& row : stats) {
    stats_csv << row.cluster << ',' << row.frequency << ','
              << opt_cell(row.stddev) << ',' << opt_cell(row.mean) << ','
              << opt_cell(row.median) << "\n";
  }
  csv::write_file_atomic(dir / kClusterRiskStatsCsv, stats_csv.str());

  std::ostringstream histogram;
  histogram << "cluster,binLow,binHigh,count\n";
  const double bin_width = config.ttc_cap / kHistogramBins;
  for (int c = 0; c < n_clusters; ++c) {
    std::vector<int> bins(kHistogramBins, 0);
    for (double v : cluster_samples[static_cast<std::size_t>(c)]) {
      int b = std::min(kHistogramBins - 1,
                       static_cast<int>(std::floor(v / bin_width)));
      bins[static_cast<std::size_t>(b)]++;
    }
    for (int b = 0; b < kHistogramBins; ++b) {
      histogram << c << ',' << csv::format_double(b * bin_width) << ','
                << csv::format_double((b + 1) * bin_width) << ',' << bins[b]
                << "\n";
    }
  }
  csv::write_file_atomic(dir / kTtcHistogramCsv, histogram.str());
}

StageIo stage_io(const PipelineConfig& config, Stage stage,
                 const fs::path& dir) {
  StageIo io;
  std::ostringstream s;
  switch (stage) {
    case Stage::kIngest:
      if (!config.synth_spec.empty()) {
        io.inputs = {config.synth_spec};
        s << "synth;seed=" << config.seed;
        io.outputs = {kRecordingCsv, kTruthJson};
      } else {
        io.inputs = {config.tracks_csv, config.tracks_meta_csv,
                     config.recording_meta_csv};
        s << "files";
        io.outputs = {kRecordingCsv};
      }
      s << ";smoothing_window=" << config.smoothing_window;
      break;
    case Stage::kExtract:
      io.inputs = {dir / kRecordingCsv};
      s << "type_filter=" << config.type_filter
        << ";excursion=" << csv::format_double(config.excursion)
        << ";epsilon_a=" << csv::format_double(config.epsilon_a)
        << ";epsilon_v=" << csv::format_double(config.epsilon_v)
        << ";max_por_gap=" << csv::format_double(config.max_por_gap)
        << ";max_ta_gap=" << csv::format_double(config.max_ta_gap)
        << ";seed=" << config.seed;
      io.outputs = {kEventsCsv, kScenariosCsv};
      break;
    case Stage::kSegment:
      io.inputs = {dir / kScenariosCsv};
      s << "min_frames=" << config.min_frames << ";n_max=" << config.n_max
        << ";model_selection=" << config.model_selection
        << ";decode=" << config.decode << ";seed=" << config.seed;
      io.outputs = {kModelsJson, kSegmentsCsv, kPrimitivesCsv};
      break;
    case Stage::kCluster:
      io.inputs = {dir / kScenariosCsv, dir / kPrimitivesCsv};
      s << "l=" << config.resample_length << ";k=" << config.k
        << ";k_range=" << config.k_range << ";center=" << config.center
        << ";seed=" << config.seed;
      io.outputs = {kPreparedCsv, kClustersCsv, kClusterFrequencyCsv,
                    kClusterDurationsCsv};
      if (!config.k_range.empty()) io.outputs.push_back(kElbowCsv);
      break;
    case Stage::kRisk:
      io.inputs = {dir / kRecordingCsv, dir / kEventsCsv, dir / kPrimitivesCsv,
                   dir / kClustersCsv};
      s << "ttc_cap=" << csv::format_double(config.ttc_cap);
      io.outputs = {kRiskCsv, kClusterRiskStatsCsv, kTtcHistogramCsv};
      break;
  }
  io.settings = s.str();
  return io;
}

void execute_stage(const PipelineConfig& config, Stage stage,
                   const fs::path& dir) {
  switch (stage) {
    case Stage::kIngest: do_ingest(config, dir); break;
    case Stage::kExtract: do_extract(config, dir); break;
    case Stage::kSegment: do_segment(config, dir); break;
    case Stage::kCluster: do_cluster(config, dir); break;
    case Stage::kRisk: do_risk(config, dir); break;
  }
}

int count_csv_rows(const fs::path& path) {
  return static_cast<int>(csv::Table::read_file(path).row_count());
}

}  // namespace

bool run_stage(const PipelineConfig& config, Stage stage, bool use_cache,
               std::ostream* log) {
  const fs::path dir = config.effective_output_dir();
  fs::create_directories(dir);
  const std::string name = stage_name(stage);
  StageIo io = stage_io(config, stage, dir);
  std::uint64_t hash = stage_hash(name, io);
  if (use_cache && cache_satisfies(dir, name, hash, io)) {
    if (log) *log << "[" << name << "] cache hit\n";
    return true;
  }
  // Stage-tag the message but keep the error category for exit codes.
  try {
    execute_stage(config, stage, dir);
  } catch (const IoError& e) {
    throw IoError("[" + name + "] " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError("[" + name + "] " + e.what());
  } catch (const ParseError& e) {
    throw ParseError("[" + name + "] " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError("[" + name + "] " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("[" + name + "] " + e.what());
  }
  write_stamp(dir, name, hash);
  if (log) *log << "[" << name << "] done\n";
  return false;
}

RunSummary run_pipeline(const PipelineConfig& config, std::ostream* log) {
  const fs::path dir = config.effective_output_dir();
  fs::create_directories(dir);

  RunSummary summary;
  for (Stage stage : {Stage::kIngest, Stage::kExtract, Stage::kSegment,
                      Stage::kCluster, Stage::kRisk}) {
    StageReport report;
    report.name = stage_name(stage);
    report.cache_hit = run_stage(config, stage, /*use_cache=*/true, log);
    summary.stages.push_back(report);
  }

  summary.events = count_csv_rows(dir / kEventsCsv);
  summary.primitives_total = count_csv_rows(dir / kSegmentsCsv);
  summary.primitives_kept = count_csv_rows(dir / kPrimitivesCsv);
  {
    auto table = csv::Table::read_file(dir / kClusterFrequencyCsv);
    summary.clusters = static_cast<int>(table.row_count());
  }

  json manifest;
  manifest["counts"] = {{"events", summary.events},
                        {"primitives_total", summary.primitives_total},
                        {"primitives_kept", summary.primitives_kept},
                        {"clusters", summary.clusters},
                        {"risk_rows", count_csv_rows(dir / kRiskCsv)}};
  json settings;
  {
    // The output directory is implied by the manifest's location and is
    // kept out so runs into different directories stay byte-identical.
    PipelineConfig c = config;
    c.output_dir.clear();
    std::istringstream in(c.to_string());
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      settings[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    settings.erase("output_dir");
  }
  manifest["settings"] = std::move(settings);
  json artifacts = json::array();
  for (const char* name :
       {kRecordingCsv, kEventsCsv, kScenariosCsv, kModelsJson, kSegmentsCsv,
        kPrimitivesCsv, kPreparedCsv, kClustersCsv, kClusterFrequencyCsv,
        kClusterDurationsCsv, kRiskCsv, kClusterRiskStatsCsv,
        kTtcHistogramCsv}) {
    if (fs::exists(dir / name)) artifacts.push_back(name);
  }
  if (fs::exists(dir / kElbowCsv)) artifacts.push_back(kElbowCsv);
  if (fs::exists(dir / kTruthJson)) artifacts.push_back(kTruthJson);
  manifest["artifacts"] = std::move(artifacts);
  csv::write_file_atomic(dir / kManifestJson, manifest.dump(2) + "\n");

  if (log) {
    *log << "events=" << summary.events
         << " primitives=" << summary.primitives_kept << "/"
         << summary.primitives_total << " clusters=" << summary.clusters
         << "\n";
  }
  return summary;
}

namespace {

std::string fixed3(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  return buf;
}

}  // namespace

void print_report(const std::filesystem::path& run_dir, std::ostream& out) {
  const fs::path manifest_path = run_dir / kManifestJson;
  if (!fs::exists(manifest_path)) {
    throw IoError("no run manifest at " + manifest_path.string());
  }
  json manifest;
  {
    std::ifstream in(manifest_path);
    in >> manifest;
  }
  out << "run: " << run_dir.string() << "\n";
  const auto& counts = manifest["counts"];
  out << "  events:     " << counts["events"] << "\n";
  out << "  primitives: " << counts["primitives_kept"] << " kept of "
      << counts["primitives_total"] << " state runs\n";
  out << "  clusters:   " << counts["clusters"] << "\n\n";

  // Frequency and duration per cluster.
  auto freq = csv::Table::read_file(run_dir / kClusterFrequencyCsv);
  auto durations = csv::Table::read_file(run_dir / kClusterDurationsCsv);
  std::map<int, std::vector<double>> dur_of;
  {
    auto cc = durations.column("cluster");
    auto cs = durations.column("seconds");
    for (std::size_t r = 0; r < durations.row_count(); ++r) {
      dur_of[static_cast<int>(durations.cell_int(r, cc))].push_back(
          durations.cell_double(r, cs));
    }
  }
  out << "cluster  count  median-duration-s\n";
  {
    auto cc = freq.column("cluster");
    auto cn = freq.column("count");
    for (std::size_t r = 0; r < freq.row_count(); ++r) {
      int cluster = static_cast<int>(freq.cell_int(r, cc));
      auto& d = dur_of[cluster];
      std::sort(d.begin(), d.end());
      out << "  #" << cluster << "  " << freq.cell(r, cn) << "  ";
      if (d.empty()) {
        out << "-";
      } else {
        out << fixed3(d[(d.size() - 1) / 2]);
      }
      out << "\n";
    }
  }

  out << "\ncluster risk (sorted by mean TTC, riskiest first)\n";
  out << "cluster  frequency  stddev  mean  median\n";
  auto stats = csv::Table::read_file(run_dir / kClusterRiskStatsCsv);
  std::vector<std::pair<double, int>> flagged;
  {
    auto cc = stats.column("cluster");
    auto cf = stats.column("frequency");
    auto cs = stats.column("stddev");
    auto cm = stats.column("mean");
    auto cd = stats.column("median");
    for (std::size_t r = 0; r < stats.row_count(); ++r) {
      auto cell_or_dash = [&](std::size_t col) {
        const std::string& v = stats.cell(r, col);
        return v.empty() ? std::string("-") : fixed3(stats.cell_double(r, col));
      };
      out << "  #" << stats.cell(r, cc) << "  " << stats.cell(r, cf) << "  "
          << cell_or_dash(cs) << "  " << cell_or_dash(cm) << "  "
          << cell_or_dash(cd) << "\n";
      if (!stats.cell(r, cm).empty()) {
        flagged.emplace_back(stats.cell_double(r, cm),
                             static_cast<int>(stats.cell_int(r, cc)));
      }
    }
  }
  std::sort(flagged.begin(), flagged.end());
  out << "\nHIGH-RISK clusters (two lowest mean TTC): ";
  if (flagged.empty()) {
    out << "none\n";
  } else {
    out << "#" << flagged[0].second;
    if (flagged.size() > 1) out << ", #" << flagged[1].second;
    out << "\n";
  }
}

}  // namespace lcpm
