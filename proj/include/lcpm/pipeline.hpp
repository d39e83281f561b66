#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lcpm/cluster.hpp"
#include "lcpm/hmm.hpp"

namespace lcpm {

// Everything the batch pipeline needs, serializable to a flat
// "key = value" text file (see docs/FORMATS.md). String-valued enums are
// validated when the stage consumes them.
struct PipelineConfig {
  // Either the three-file recording layout ...
  std::string tracks_csv;
  std::string tracks_meta_csv;
  std::string recording_meta_csv;
  // ... or a synthetic spec.
  std::string synth_spec;

  std::string output_dir;  // falls back to $LCPM_OUTPUT_DIR
  std::uint64_t seed = 0;
  int jobs = 1;

  // Pre-modeling smoothing hook; 0 (off) by default, odd window size.
  int smoothing_window = 0;

  std::string type_filter = "PC,PC,PC";  // or "none"
  double excursion = 0.9;
  double epsilon_a = 0.01;
  double epsilon_v = 0.1;
  double max_por_gap = 120.0;
  double max_ta_gap = 100.0;

  int min_frames = 10;
  int n_max = 10;
  std::string model_selection = "max-ll";  // or "paper-literal"
  std::string decode = "viterbi";          // or "posterior-argmax"

  int resample_length = 75;
  int k = 13;
  std::string k_range;          // e.g. "1..6" or "2,4,8"; empty = fixed k
  std::string center = "dba";   // or "medoid", "euclidean"

  double ttc_cap = 100.0;

  static PipelineConfig from_file(const std::filesystem::path& path);
  static PipelineConfig from_string(const std::string& text,
                                    const std::string& origin);
  std::string to_string() const;

  std::filesystem::path effective_output_dir() const;
  SelectionCriterion selection_criterion() const;
  DecodeMode decode_mode() const;
  CenterMode center_mode() const;
  std::vector<int> parsed_k_range() const;  // empty when unset
};

struct StageReport {
  std::string name;
  bool cache_hit = false;
};

struct RunSummary {
  std::vector<StageReport> stages;
  int events = 0;
  int primitives_total = 0;
  int primitives_kept = 0;
  int clusters = 0;
};

enum class Stage { kIngest, kExtract, kSegment, kCluster, kRisk };

// Executes one stage against the artifacts in the config's output
// directory, honoring the stage cache when use_cache is set. Returns
// whether the cache satisfied it.
bool run_stage(const PipelineConfig& config, Stage stage, bool use_cache,
               std::ostream* log = nullptr);

// Full pipeline with per-stage caching, plus the run manifest.
RunSummary run_pipeline(const PipelineConfig& config,
                        std::ostream* log = nullptr);

// Human-readable summary of a finished run directory; flags the two
// lowest-mean-TTC clusters.
void print_report(const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace lcpm
