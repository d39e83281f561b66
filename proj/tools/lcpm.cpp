// Command-line front end for the lane-change pattern mining pipeline.
//
// Exit codes: 0 success, 1 usage, 2 data/schema error, 3 numeric failure.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lcpm/errors.hpp"
#include "lcpm/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("-o,--out", flags->out,
                  "output directory (default: $LCPM_OUTPUT_DIR)");
  cmd->add_option("--seed", flags->seed, "master seed");
  cmd->add_option("-j,--jobs", flags->jobs, "parallel workers");
}

lcpm::PipelineConfig base_config(const CommonFlags& flags) {
  lcpm::PipelineConfig config;
  config.output_dir = flags.out;
  config.seed = flags.seed;
  config.jobs = flags.jobs;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lcpm - lane-change interactive pattern mining and risk analysis"};
  app.require_subcommand(1);

  // --- synth ---
  CommonFlags synth_flags;
  std::string synth_spec;
  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic recording from a JSON spec");
  synth->add_option("--spec", synth_spec, "synthetic spec (JSON)")->required();
  add_common(synth, &synth_flags);

  // --- ingest ---
  CommonFlags ingest_flags;
  std::string tracks, tracks_meta, recording_meta, ingest_synth_spec;
  int smoothing_window = 0;
  auto* ingest =
      app.add_subcommand("ingest", "parse and canonicalize a recording");
  ingest->add_option("--tracks", tracks, "per-frame tracks CSV");
  ingest->add_option("--tracks-meta", tracks_meta, "per-vehicle meta CSV");
  ingest->add_option("--recording-meta", recording_meta,
                     "recording meta CSV");
  ingest->add_option("--synth-spec", ingest_synth_spec,
                     "synthetic spec instead of CSV inputs");
  ingest->add_option("--smoothing-window", smoothing_window,
                     "odd moving-average window, 0 = off");
  add_common(ingest, &ingest_flags);

  // --- extract ---
  CommonFlags extract_flags;
  std::string type_filter = "PC,PC,PC";
  double excursion = 0.9, epsilon_a = 0.01, epsilon_v = 0.1;
  double max_por_gap = 120.0, max_ta_gap = 100.0;
  auto* extract = app.add_subcommand(
      "extract", "extract three-vehicle lane-change events");
  extract->add_option("--type-filter", type_filter,
                      "required ego,por,ta classes or 'none'");
  extract->add_option("--excursion", excursion,
                      "lateral excursion bound (m)");
  extract->add_option("--epsilon-a", epsilon_a,
                      "settled lateral acceleration tolerance (m/s^2)");
  extract->add_option("--epsilon-v", epsilon_v,
                      "settled lateral speed tolerance (m/s)");
  extract->add_option("--max-por-gap", max_por_gap,
                      "preceding-vehicle search range (m)");
  extract->add_option("--max-ta-gap", max_ta_gap,
                      "target-lane search range (m)");
  add_common(extract, &extract_flags);

  // --- segment ---
  CommonFlags segment_flags;
  int min_frames = 10, n_max = 10;
  std::string model_selection = "max-ll", decode = "viterbi";
  auto* segment = app.add_subcommand(
      "segment", "fit per-scenario models and cut primitives");
  segment->add_option("--min-frames", min_frames,
                      "drop primitives shorter than this");
  segment->add_option("--n-max", n_max, "largest state count to try");
  segment->add_option("--model-selection", model_selection,
                      "max-ll or paper-literal");
  segment->add_option("--decode", decode, "viterbi or posterior-argmax");
  add_common(segment, &segment_flags);

  // --- cluster ---
  CommonFlags cluster_flags;
  int length = 75, k = 13;
  std::string k_range, center = "dba";
  auto* cluster =
      app.add_subcommand("cluster", "group primitives into patterns");
  cluster->add_option("-l,--length", length, "resampled primitive length");
  cluster->add_option("-k", k, "cluster count");
  cluster->add_option("--k-range", k_range,
                      "elbow sweep, e.g. 1..13 (also emits elbow.csv)");
  cluster->add_option("--center", center, "dba, medoid or euclidean");
  add_common(cluster, &cluster_flags);

  // --- risk ---
  CommonFlags risk_flags;
  double ttc_cap = 100.0;
  auto* risk = app.add_subcommand("risk", "per-primitive and per-cluster TTC");
  risk->add_option("--ttc-cap", ttc_cap, "cap for per-pair minima (s)");
  add_common(risk, &risk_flags);

  // --- run ---
  CommonFlags run_flags;
  std::string config_path;
  auto* run = app.add_subcommand("run", "full pipeline with stage caching");
  run->add_option("-c,--config", config_path, "pipeline config file")
      ->required();
  add_common(run, &run_flags);

  // --- report ---
  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize a finished run");
  report->add_option("-d,--dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) {
      auto config = base_config(synth_flags);
      config.synth_spec = synth_spec;
      lcpm::run_stage(config, lcpm::Stage::kIngest, false, &std::cout);
    } else if (ingest->parsed()) {
      auto config = base_config(ingest_flags);
      config.tracks_csv = tracks;
      config.tracks_meta_csv = tracks_meta;
      config.recording_meta_csv = recording_meta;
      config.synth_spec = ingest_synth_spec;
      config.smoothing_window = smoothing_window;
      lcpm::run_stage(config, lcpm::Stage::kIngest, false, &std::cout);
    } else if (extract->parsed()) {
      auto config = base_config(extract_flags);
      config.type_filter = type_filter;
      config.excursion = excursion;
      config.epsilon_a = epsilon_a;
      config.epsilon_v = epsilon_v;
      config.max_por_gap = max_por_gap;
      config.max_ta_gap = max_ta_gap;
      lcpm::run_stage(config, lcpm::Stage::kExtract, false, &std::cout);
    } else if (segment->parsed()) {
      auto config = base_config(segment_flags);
      config.min_frames = min_frames;
      config.n_max = n_max;
      config.model_selection = model_selection;
      config.decode = decode;
      lcpm::run_stage(config, lcpm::Stage::kSegment, false, &std::cout);
    } else if (cluster->parsed()) {
      auto config = base_config(cluster_flags);
      config.resample_length = length;
      config.k = k;
      config.k_range = k_range;
      config.center = center;
      lcpm::run_stage(config, lcpm::Stage::kCluster, false, &std::cout);
    } else if (risk->parsed()) {
      auto config = base_config(risk_flags);
      config.ttc_cap = ttc_cap;
      lcpm::run_stage(config, lcpm::Stage::kRisk, false, &std::cout);
    } else if (run->parsed()) {
      auto config = lcpm::PipelineConfig::from_file(config_path);
      if (run->count("--out") > 0) config.output_dir = run_flags.out;
      if (run->count("--seed") > 0) config.seed = run_flags.seed;
      if (run->count("--jobs") > 0) config.jobs = run_flags.jobs;
      lcpm::run_pipeline(config, &std::cout);
    } else if (report->parsed()) {
      lcpm::print_report(report_dir, std::cout);
    }
  } catch (const lcpm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const lcpm::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lcpm::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const lcpm::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const lcpm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
