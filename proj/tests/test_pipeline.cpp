#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lcpm/csv.hpp"
#include "lcpm/errors.hpp"
#include "lcpm/pipeline.hpp"
#include "lcpm/synth.hpp"
#include "test_support.hpp"

using namespace lcpm;
namespace ts = test_support;
namespace fs = std::filesystem;

namespace {

// Same staging as the extraction tests: one clean lane change plus two
// background vehicles for the size classes.
std::string staged_spec_json() {
  SyntheticSpec spec;
  spec.recording_id = 4;
  spec.frame_rate = 25.0;
  spec.duration_frames = 300;
  spec.lane_markings = {0.0, 3.5, 7.0};
  spec.noise_std = 0.0;
  spec.regime_boundaries = {};

  auto vehicle = [](int id, const char* role, double len, double wid,
                    double x0, int lane, double vx) {
    SyntheticVehicle v;
    v.id = id;
    v.role = role;
    v.length = len;
    v.width = wid;
    v.initial_x = x0;
    v.lane = lane;
    v.vx_per_regime = {vx};
    return v;
  };
  SyntheticVehicle ego = vehicle(11, "ego", 4.5, 2.0, 0.0, 1, 31.0);
  ego.lane_change = SyntheticLaneChange{2, 120, 60};
  spec.vehicles.push_back(ego);
  spec.vehicles.push_back(vehicle(12, "por", 4.4, 1.9, 50.0, 1, 24.0));
  spec.vehicles.push_back(vehicle(13, "ta", 4.6, 2.1, -40.0, 2, 33.0));
  spec.vehicles.push_back(vehicle(14, "", 10.5, 2.5, -800.0, 1, 22.0));
  spec.vehicles.push_back(vehicle(15, "", 16.2, 2.6, -900.0, 2, 22.0));
  return spec.to_json_string();
}

PipelineConfig staged_config(const fs::path& dir) {
  PipelineConfig config;
  config.synth_spec = (dir / "spec.json").string();
  config.output_dir = (dir / "out").string();
  config.seed = 7;
  config.n_max = 4;
  config.k = 1;
  config.min_frames = 10;
  return config;
}

std::vector<std::string> artifact_names() {
  return {"recording.csv", "events.csv",  "scenarios.csv",
          "models.json",   "segments.csv", "primitives.csv",
          "prepared.csv",  "clusters.csv", "cluster_frequency.csv",
          "cluster_durations.csv", "risk.csv", "cluster_risk_stats.csv",
          "ttc_histogram.csv", "manifest.json"};
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("config round-trips through its text form losslessly") {
  PipelineConfig config;
  config.tracks_csv = "a/tracks.csv";
  config.synth_spec = "";
  config.output_dir = "out";
  config.seed = 123456789012345ULL;
  config.jobs = 3;
  config.type_filter = "none";
  config.excursion = 0.9123456789;
  config.epsilon_a = 0.017;
  config.min_frames = 12;
  config.n_max = 7;
  config.model_selection = "paper-literal";
  config.decode = "posterior-argmax";
  config.resample_length = 60;
  config.k = 4;
  config.k_range = "1..6";
  config.center = "medoid";
  config.ttc_cap = 42.5;

  PipelineConfig back =
      PipelineConfig::from_string(config.to_string(), "mem");
  CHECK(back.to_string() == config.to_string());
  CHECK(back.seed == config.seed);
  CHECK(back.excursion == config.excursion);
  CHECK(back.k_range == config.k_range);
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(PipelineConfig::from_string("nope = 1\n", "mem"),
                  SchemaError);
}

TEST_CASE("defaults carry the reference parameterization") {
  PipelineConfig config;
  CHECK(config.min_frames == 10);
  CHECK(config.resample_length == 75);
  CHECK(config.n_max == 10);
  CHECK(config.model_selection == "max-ll");
  CHECK(config.decode == "viterbi");
  CHECK(config.k == 13);
  CHECK(config.center == "dba");
  CHECK(config.ttc_cap == 100.0);
  CHECK(config.type_filter == "PC,PC,PC");
  CHECK(config.excursion == 0.9);
  CHECK(config.epsilon_a == 0.01);
  CHECK(config.epsilon_v == 0.1);
  CHECK(config.max_por_gap == 120.0);
  CHECK(config.max_ta_gap == 100.0);
}

TEST_CASE("the worker count does not change the artifacts") {
  ts::TempDir dir("pipeline_jobs");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig serial = staged_config(dir.path());
  serial.output_dir = (dir.path() / "out_serial").string();
  serial.jobs = 1;
  PipelineConfig parallel = staged_config(dir.path());
  parallel.output_dir = (dir.path() / "out_parallel").string();
  parallel.jobs = 4;

  run_pipeline(serial);
  run_pipeline(parallel);
  for (const auto& name : artifact_names()) {
    if (name == "manifest.json") continue;  // records the jobs setting
    CHECK_MESSAGE(ts::read_file(fs::path(serial.output_dir) / name) ==
                      ts::read_file(fs::path(parallel.output_dir) / name),
                  name);
  }
}

TEST_CASE("enum fields validate their values") {
  PipelineConfig config;
  config.model_selection = "sideways";
  CHECK_THROWS_AS(config.selection_criterion(), ValidationError);
  config.decode = "guess";
  CHECK_THROWS_AS(config.decode_mode(), ValidationError);
  config.center = "nope";
  CHECK_THROWS_AS(config.center_mode(), ValidationError);
  config.k_range = "6..1";
  CHECK_THROWS_AS(config.parsed_k_range(), ValidationError);
}

TEST_CASE("single staged lane change runs end to end") {
  ts::TempDir dir("pipeline_run");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig config = staged_config(dir.path());

  std::ostringstream log;
  RunSummary summary = run_pipeline(config, &log);
  CHECK(summary.events == 1);
  CHECK(summary.primitives_kept >= 1);
  CHECK(summary.clusters == 1);
  for (const auto& stage : summary.stages) CHECK_FALSE(stage.cache_hit);

  // Manifest counts equal the row counts of the CSVs they describe.
  const fs::path out = config.effective_output_dir();
  CHECK(static_cast<int>(csv::Table::read_file(out / "events.csv").row_count()) ==
        summary.events);
  CHECK(static_cast<int>(
            csv::Table::read_file(out / "primitives.csv").row_count()) ==
        summary.primitives_kept);
  CHECK(static_cast<int>(
            csv::Table::read_file(out / "segments.csv").row_count()) ==
        summary.primitives_total);
  for (const auto& name : artifact_names()) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
}

TEST_CASE("a rerun with an unchanged config hits every cache") {
  ts::TempDir dir("pipeline_cache");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig config = staged_config(dir.path());

  run_pipeline(config);
  const fs::path out = config.effective_output_dir();
  std::map<std::string, std::string> before;
  for (const auto& name : artifact_names()) {
    before[name] = ts::read_file(out / name);
  }

  RunSummary second = run_pipeline(config);
  for (const auto& stage : second.stages) {
    CHECK_MESSAGE(stage.cache_hit, stage.name);
  }
  for (const auto& name : artifact_names()) {
    CHECK_MESSAGE(before[name] == ts::read_file(out / name), name);
  }
}

TEST_CASE("two fresh runs produce byte-identical artifacts") {
  ts::TempDir dir("pipeline_det");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig config_a = staged_config(dir.path());
  config_a.output_dir = (dir.path() / "out_a").string();
  PipelineConfig config_b = staged_config(dir.path());
  config_b.output_dir = (dir.path() / "out_b").string();

  run_pipeline(config_a);
  run_pipeline(config_b);
  for (const auto& name : artifact_names()) {
    CHECK_MESSAGE(ts::read_file(fs::path(config_a.output_dir) / name) ==
                      ts::read_file(fs::path(config_b.output_dir) / name),
                  name);
  }
}

TEST_CASE("asking for more clusters than primitives fails the stage") {
  ts::TempDir dir("pipeline_badk");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig config = staged_config(dir.path());
  config.k = 50;
  CHECK_THROWS_AS(run_pipeline(config), ValidationError);
  // Partial artifacts do not masquerade as finished ones.
  CHECK_FALSE(fs::exists(fs::path(config.output_dir) / "clusters.csv"));
}

TEST_CASE("report prints tables and flags the lowest-mean clusters") {
  ts::TempDir dir("pipeline_report");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig config = staged_config(dir.path());
  run_pipeline(config);

  std::ostringstream out;
  print_report(config.effective_output_dir(), out);
  std::string text = out.str();
  CHECK(text.find("events:     1") != std::string::npos);
  CHECK(text.find("HIGH-RISK clusters") != std::string::npos);

  // Independent recomputation: the flagged set equals the lowest means
  // derived straight from risk.csv.
  auto risk = csv::Table::read_file(config.effective_output_dir() / "risk.csv");
  auto cc = risk.column("cluster");
  auto cr = risk.column("risk");
  std::map<int, std::pair<double, int>> sums;
  for (std::size_t r = 0; r < risk.row_count(); ++r) {
    if (risk.cell(r, cr).empty()) continue;
    auto& slot = sums[static_cast<int>(risk.cell_int(r, cc))];
    slot.first += risk.cell_double(r, cr);
    slot.second++;
  }
  REQUIRE_FALSE(sums.empty());
  int best_cluster = -1;
  double best_mean = 1e300;
  for (const auto& [cluster, sum] : sums) {
    double mean = sum.first / sum.second;
    if (mean < best_mean) {
      best_mean = mean;
      best_cluster = cluster;
    }
  }
  CHECK(text.find("HIGH-RISK clusters (two lowest mean TTC): #" +
                  std::to_string(best_cluster)) != std::string::npos);
}

TEST_CASE("four staged lane changes cluster into the requested k") {
  SyntheticSpec spec;
  spec.recording_id = 9;
  spec.frame_rate = 25.0;
  spec.duration_frames = 320;
  spec.lane_markings = {0.0, 3.5, 7.0};
  spec.noise_std = 0.0;
  auto vehicle = [](int id, double len, double wid, double x0, int lane,
                    double vx) {
    SyntheticVehicle v;
    v.id = id;
    v.length = len;
    v.width = wid;
    v.initial_x = x0;
    v.lane = lane;
    v.vx_per_regime = {vx};
    return v;
  };
  // Four independent ego/por/ta triples, 1500 m apart; maneuvers start
  // at different frames and vary in duration.
  for (int group = 0; group < 4; ++group) {
    double base = 1500.0 * group;
    SyntheticVehicle ego =
        vehicle(11 + 10 * group, 4.5, 2.0, base, 1, 30.0 + group);
    ego.lane_change =
        SyntheticLaneChange{2, 80 + 30 * group, 40 + 10 * group};
    spec.vehicles.push_back(ego);
    spec.vehicles.push_back(
        vehicle(12 + 10 * group, 4.4, 1.9, base + 60.0, 1, 27.0));
    spec.vehicles.push_back(
        vehicle(13 + 10 * group, 4.6, 2.1, base - 35.0, 2, 32.0));
  }
  spec.vehicles.push_back(vehicle(91, 10.5, 2.5, -800.0, 1, 22.0));
  spec.vehicles.push_back(vehicle(92, 16.2, 2.6, -900.0, 2, 22.0));

  ts::TempDir dir("pipeline_multi");
  ts::write_file(dir.path() / "spec.json", spec.to_json_string());
  PipelineConfig config = staged_config(dir.path());
  config.k = 3;
  RunSummary summary = run_pipeline(config);
  CHECK(summary.events == 4);
  CHECK(summary.primitives_kept >= 4);
  CHECK(summary.clusters == 3);

  std::ostringstream out;
  print_report(config.effective_output_dir(), out);
  // One frequency row and one risk row per cluster.
  std::string text = out.str();
  int rows = 0;
  std::size_t pos = 0;
  while ((pos = text.find("\n  #", pos)) != std::string::npos) {
    ++rows;
    pos += 4;
  }
  CHECK(rows == 2 * 3);
}

TEST_CASE("model dumps carry the full per-scenario parameterization") {
  ts::TempDir dir("pipeline_models");
  ts::write_file(dir.path() / "spec.json", staged_spec_json());
  PipelineConfig config = staged_config(dir.path());
  run_pipeline(config);

  std::ifstream in(config.effective_output_dir() / "models.json");
  nlohmann::json models;
  in >> models;
  REQUIRE(models.is_array());
  REQUIRE(models.size() == 1);
  const auto& m = models[0];
  const int n = m.at("selected_n").get<int>();
  CHECK(n >= 1);
  CHECK(m.at("initial").size() == static_cast<std::size_t>(n));
  CHECK(m.at("transition").size() == static_cast<std::size_t>(n));
  CHECK(m.at("states").size() == static_cast<std::size_t>(n));
  const auto& comp = m.at("states")[0].at("components")[0];
  CHECK(comp.at("mean").size() == 6);
  CHECK(comp.at("covariance").size() == 6);
  CHECK(m.at("log_likelihood_trace").size() >= 1);
  CHECK(m.at("sweep").size() >= 1);
  // Transition rows of the dump sum to one.
  for (const auto& row : m.at("transition")) {
    double sum = 0.0;
    for (const auto& v : row) sum += v.get<double>();
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("a recording without lane changes still completes the run") {
  SyntheticSpec spec = SyntheticSpec::from_json_string(staged_spec_json(), "mem");
  spec.vehicles[0].lane_change.reset();
  ts::TempDir dir("pipeline_noevents");
  ts::write_file(dir.path() / "spec.json", spec.to_json_string());
  PipelineConfig config = staged_config(dir.path());

  RunSummary summary = run_pipeline(config);
  CHECK(summary.events == 0);
  CHECK(summary.primitives_kept == 0);
  CHECK(summary.clusters == 0);

  std::ostringstream out;
  print_report(config.effective_output_dir(), out);
  CHECK(out.str().find("HIGH-RISK clusters (two lowest mean TTC): none") !=
        std::string::npos);
}

TEST_CASE("fully disengaged traffic reports no high-risk clusters") {
  // por pulls away ahead of the ego; ta trails at the same speed. No
  // pair ever closes, so every TTC is absent.
  SyntheticSpec spec;
  spec.recording_id = 5;
  spec.frame_rate = 25.0;
  spec.duration_frames = 300;
  spec.lane_markings = {0.0, 3.5, 7.0};
  auto vehicle = [](int id, const char* role, double len, double wid,
                    double x0, int lane, double vx) {
    SyntheticVehicle v;
    v.id = id;
    v.role = role;
    v.length = len;
    v.width = wid;
    v.initial_x = x0;
    v.lane = lane;
    v.vx_per_regime = {vx};
    return v;
  };
  SyntheticVehicle ego = vehicle(11, "ego", 4.5, 2.0, 0.0, 1, 30.0);
  ego.lane_change = SyntheticLaneChange{2, 120, 60};
  spec.vehicles.push_back(ego);
  spec.vehicles.push_back(vehicle(12, "por", 4.4, 1.9, 50.0, 1, 32.0));
  spec.vehicles.push_back(vehicle(13, "ta", 4.6, 2.1, -40.0, 2, 30.0));
  spec.vehicles.push_back(vehicle(14, "", 10.5, 2.5, -800.0, 1, 22.0));
  spec.vehicles.push_back(vehicle(15, "", 16.2, 2.6, -900.0, 2, 22.0));

  ts::TempDir dir("pipeline_norisk");
  ts::write_file(dir.path() / "spec.json", spec.to_json_string());
  PipelineConfig config = staged_config(dir.path());
  RunSummary summary = run_pipeline(config);
  REQUIRE(summary.events == 1);

  auto risk = csv::Table::read_file(config.effective_output_dir() / "risk.csv");
  auto cr = risk.column("risk");
  for (std::size_t r = 0; r < risk.row_count(); ++r) {
    CHECK(risk.cell(r, cr).empty());
  }

  std::ostringstream out;
  print_report(config.effective_output_dir(), out);
  CHECK(out.str().find("HIGH-RISK clusters (two lowest mean TTC): none") !=
        std::string::npos);
}

TEST_CASE("report on a missing run directory is an error") {
  ts::TempDir dir("pipeline_noreport");
  std::ostringstream out;
  CHECK_THROWS_AS(print_report(dir.path() / "missing", out), IoError);
}

TEST_SUITE_END();
