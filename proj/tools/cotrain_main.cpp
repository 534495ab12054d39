#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cotrain/matrix.hpp"
#include "cotrain/runio.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override,
            bool has_seed, std::uint64_t seed, bool quiet) {
  cotrain::RunConfig config = cotrain::parse_run_config_file(config_path);
  if (!out_override.empty()) config.output_dir = out_override;
  if (has_seed) {
    config.cotrain.seed = seed;
    if (config.synth) config.synth->seed = seed;
  }
  return cotrain::run_experiment(config, quiet);
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 bool has_seed, std::uint64_t seed, bool quiet) {
  cotrain::SynthConfig config = cotrain::parse_synth_config_file(config_path);
  if (has_seed) config.seed = seed;
  const cotrain::LoadedDataset data = cotrain::materialize_synth(config);
  cotrain::save_dataset_dir(data, out_dir, cotrain::MatrixFormat::bin_f32);
  if (!quiet) {
    std::cout << "wrote " << data.dataset.size() << " examples to " << out_dir << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset_dir, int view,
             const std::string& out_path, bool quiet) {
  const cotrain::EvalReport report =
      cotrain::evaluate_checkpoint(checkpoint, dataset_dir, view);
  const std::string text = report.to_json_string();
  if (!quiet) std::cout << text << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << text << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-training for prompt-derived weak supervision"};
  app.require_subcommand(1);

  std::string config_path, out_path, checkpoint, dataset_dir;
  std::uint64_t seed = 0;
  bool quiet = false;
  int view = 0;

  CLI::App* run = app.add_subcommand("run", "execute a co-training run");
  run->add_option("--config", config_path, "run config JSON")->required();
  run->add_option("--out", out_path, "output directory (overrides config)");
  CLI::Option* run_seed = run->add_option("--seed", seed, "seed override");
  run->add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* simulate = app.add_subcommand("simulate", "materialize a synthetic dataset");
  simulate->add_option("--config", config_path, "synth config JSON")->required();
  simulate->add_option("--out", out_path, "output dataset directory")->required();
  CLI::Option* sim_seed = simulate->add_option("--seed", seed, "seed override");
  simulate->add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint against gold labels");
  eval->add_option("--checkpoint", checkpoint, "model checkpoint JSON")->required();
  eval->add_option("--dataset", dataset_dir, "dataset directory")->required();
  eval->add_option("--view", view, "view the checkpoint applies to (0 or 1)")->required();
  eval->add_option("--out", out_path, "also write the metrics JSON here");
  eval->add_flag("--quiet", quiet, "suppress progress output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, out_path, !run_seed->empty(), seed, quiet);
    }
    if (simulate->parsed()) {
      return cmd_simulate(config_path, out_path, !sim_seed->empty(), seed, quiet);
    }
    return cmd_eval(checkpoint, dataset_dir, view, out_path, quiet);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
