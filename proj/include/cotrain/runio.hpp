#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cotrain/cotrain.hpp"
#include "cotrain/synth.hpp"

namespace cotrain {

// Synthetic dataset description as it appears in config files. View-0 is
// either a simulated prompt emitter stack (partial access) or a second blob
// view (the generic full-access stand-in).
struct SynthConfig {
  std::size_t num_examples = 1000;
  int num_labels = 2;
  std::vector<double> balance;  // empty = uniform
  std::uint64_t seed = 0;

  std::optional<EmitterSpec> emitters;
  // bias drawn log-uniform from this range per prompt/token when no
  // explicit bias vectors are listed
  std::optional<std::pair<double, double>> bias_log_uniform;
  std::optional<BlobSpec> view0_blobs;
  BlobSpec blobs;  // view 1
};

enum class RunMode { partial_access, full_access_generic };

struct RunConfig {
  RunMode mode = RunMode::partial_access;
  std::optional<std::string> dataset_dir;
  std::optional<SynthConfig> synth;
  CoTrainConfig cotrain;
  HeadSpec head{HeadArch::linear, 0};
  std::optional<std::string> init_checkpoint;  // full_access_generic
  std::string output_dir;
};

// Parses and schema-validates a run config; throws with the offending field
// name on violations. No dataset work happens here.
RunConfig parse_run_config_file(const std::string& path);
RunConfig parse_run_config_text(const std::string& text, const std::string& context);
SynthConfig parse_synth_config_file(const std::string& path);

struct LoadedDataset {
  Dataset dataset;
  // per prompt: probability vectors over label tokens from content-free
  // inputs (empty for dense view-0 datasets)
  std::vector<std::vector<std::vector<double>>> content_free;
};

LoadedDataset materialize_synth(const SynthConfig& config);
LoadedDataset load_dataset_dir(const std::string& dir);
void save_dataset_dir(const LoadedDataset& data, const std::string& dir, MatrixFormat format);

// Executes the configured co-training run and writes metrics.jsonl,
// summary.csv, per-iteration checkpoints, prediction dumps and the resolved
// config snapshot into the output directory. Returns 0 when all T
// iterations completed.
int run_experiment(const RunConfig& config, bool quiet);

struct EvalReport {
  std::size_t num_examples = 0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;

  std::string to_json_string() const;
};

// Predicts with a checkpoint over the chosen view and scores against the
// dataset's gold labels.
EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                               const std::string& dataset_dir, int view);

}  // namespace cotrain
