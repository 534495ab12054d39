#include "cotrain/runio.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cotrain/checkpoint.hpp"
#include "cotrain/rng.hpp"

namespace cotrain {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw std::runtime_error("config: field \"" + field + "\": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) config_error(ctx, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) config_error(ctx + "." + key, "unknown field");
  }
}

template <typename T>
T get_field(const json& j, const std::string& name, const std::string& ctx) {
  if (!j.contains(name)) config_error(ctx + "." + name, "missing required field");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    config_error(ctx + "." + name, "wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& name, T fallback, const std::string& ctx) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    config_error(ctx + "." + name, "wrong type");
  }
}

TrainConfig parse_train_config(const json& j, const TrainConfig& defaults,
                               const std::string& ctx) {
  check_keys(j, {"learning_rate", "weight_decay", "batch_size", "epochs"}, ctx);
  TrainConfig cfg = defaults;
  cfg.learning_rate = get_or(j, "learning_rate", cfg.learning_rate, ctx);
  cfg.weight_decay = get_or(j, "weight_decay", cfg.weight_decay, ctx);
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size, ctx);
  cfg.epochs = get_or(j, "epochs", cfg.epochs, ctx);
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    config_error(ctx, e.what());
  }
  return cfg;
}

SelectionStrategy parse_strategy(const std::string& s, const std::string& ctx) {
  if (s == "model_confidence") return SelectionStrategy::model_confidence;
  if (s == "cut_statistic") return SelectionStrategy::cut_statistic;
  config_error(ctx, "expected \"model_confidence\" or \"cut_statistic\", got \"" + s + "\"");
}

HeadSpec parse_head_spec(const json& j, const std::string& ctx) {
  check_keys(j, {"architecture", "hidden_dim"}, ctx);
  HeadSpec spec;
  const std::string arch = get_field<std::string>(j, "architecture", ctx);
  if (arch == "linear") {
    spec.arch = HeadArch::linear;
  } else if (arch == "one_hidden") {
    spec.arch = HeadArch::one_hidden;
    spec.hidden_dim = get_field<int>(j, "hidden_dim", ctx);
    if (spec.hidden_dim < 1) config_error(ctx + ".hidden_dim", "must be >= 1");
  } else {
    config_error(ctx + ".architecture", "expected \"linear\" or \"one_hidden\"");
  }
  return spec;
}

BlobSpec parse_blob_spec(const json& j, int num_labels, std::uint64_t seed,
                         const std::string& ctx) {
  check_keys(j, {"dim", "separation", "noise_scale"}, ctx);
  BlobSpec spec;
  spec.num_labels = num_labels;
  spec.dim = get_field<int>(j, "dim", ctx);
  spec.separation = get_or(j, "separation", 3.0, ctx);
  spec.noise_scale = get_or(j, "noise_scale", 1.0, ctx);
  spec.seed = seed;
  try {
    spec.validate();
  } catch (const std::exception& e) {
    config_error(ctx, e.what());
  }
  return spec;
}

SynthConfig parse_synth(const json& j, const std::string& ctx) {
  check_keys(j, {"num_examples", "num_labels", "balance", "seed", "emitters", "view0_blobs",
                 "blobs"},
             ctx);
  SynthConfig cfg;
  cfg.num_examples = get_field<std::size_t>(j, "num_examples", ctx);
  cfg.num_labels = get_field<int>(j, "num_labels", ctx);
  if (cfg.num_labels < 2) config_error(ctx + ".num_labels", "must be >= 2");
  cfg.balance = get_or(j, "balance", std::vector<double>{}, ctx);
  if (!cfg.balance.empty() && cfg.balance.size() != static_cast<std::size_t>(cfg.num_labels)) {
    config_error(ctx + ".balance", "length must equal num_labels");
  }
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0, ctx);

  if (j.contains("emitters")) {
    const json& e = j.at("emitters");
    const std::string ectx = ctx + ".emitters";
    check_keys(e, {"num_prompts", "vocab_size", "accuracy", "bias", "bias_log_uniform",
                   "concentration"},
               ectx);
    EmitterSpec spec;
    spec.num_labels = cfg.num_labels;
    spec.num_prompts = get_or(e, "num_prompts", 4, ectx);
    spec.vocab_size = get_or(e, "vocab_size", cfg.num_labels, ectx);
    spec.concentration = get_or(e, "concentration", 4.0, ectx);
    spec.seed = cfg.seed;
    if (e.contains("accuracy") && e.at("accuracy").is_number()) {
      spec.accuracy.assign(static_cast<std::size_t>(spec.num_prompts),
                           e.at("accuracy").get<double>());
    } else {
      spec.accuracy = get_or(e, "accuracy", std::vector<double>{}, ectx);
    }
    if (spec.accuracy.empty()) {
      spec.accuracy.assign(static_cast<std::size_t>(spec.num_prompts), 0.7);
    }
    if (e.contains("bias") && e.contains("bias_log_uniform")) {
      config_error(ectx, "bias and bias_log_uniform are mutually exclusive");
    }
    if (e.contains("bias")) {
      spec.bias = get_field<std::vector<std::vector<double>>>(e, "bias", ectx);
    } else {
      const auto range = get_or(e, "bias_log_uniform", std::vector<double>{1.0, 1.0}, ectx);
      if (range.size() != 2 || !(range[0] > 0.0) || !(range[1] >= range[0])) {
        config_error(ectx + ".bias_log_uniform", "expected [lo, hi] with 0 < lo <= hi");
      }
      cfg.bias_log_uniform = {range[0], range[1]};
      // drawn in materialize_synth, validated there
    }
    cfg.emitters = std::move(spec);
  }
  if (j.contains("view0_blobs")) {
    cfg.view0_blobs = parse_blob_spec(j.at("view0_blobs"), cfg.num_labels,
                                      Rng::stream(cfg.seed, {0x70b0ULL}).next_u64(),
                                      ctx + ".view0_blobs");
  }
  if (!j.contains("blobs")) config_error(ctx + ".blobs", "missing required field");
  cfg.blobs = parse_blob_spec(j.at("blobs"), cfg.num_labels,
                              Rng::stream(cfg.seed, {0x70b1ULL}).next_u64(), ctx + ".blobs");
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  return j;
}

const TrainConfig kLabelModelDefaults{1e-4, 5e-3, 64, 40, 0};
const TrainConfig kHeadDefaults{1e-5, 0.01, 16, 20, 0};

}  // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& context) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(context + ": invalid JSON: " + e.what());
  }

  check_keys(j, {"mode", "dataset", "synth", "cotrain", "head", "view0_head",
                 "init_checkpoint", "output_dir"},
             "config");

  RunConfig cfg;
  const std::string mode = get_or<std::string>(j, "mode", "partial_access", "config");
  if (mode == "partial_access") {
    cfg.mode = RunMode::partial_access;
  } else if (mode == "full_access_generic") {
    cfg.mode = RunMode::full_access_generic;
  } else {
    config_error("config.mode", "expected \"partial_access\" or \"full_access_generic\"");
  }

  if (j.contains("dataset") == j.contains("synth")) {
    config_error("config.dataset", "exactly one of dataset/synth must be given");
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, {"dir"}, "config.dataset");
    cfg.dataset_dir = get_field<std::string>(d, "dir", "config.dataset");
  } else {
    cfg.synth = parse_synth(j.at("synth"), "config.synth");
    if (cfg.mode == RunMode::partial_access && !cfg.synth->emitters) {
      config_error("config.synth.emitters", "required in partial_access mode");
    }
    if (cfg.mode == RunMode::full_access_generic && !cfg.synth->view0_blobs) {
      config_error("config.synth.view0_blobs", "required in full_access_generic mode");
    }
  }

  // Mode-dependent selection defaults: model confidence on view 0 in
  // partial access, cut statistic on both views otherwise.
  cfg.cotrain.selection_view0 = cfg.mode == RunMode::partial_access
                                    ? SelectionStrategy::model_confidence
                                    : SelectionStrategy::cut_statistic;
  cfg.cotrain.selection_view1 = SelectionStrategy::cut_statistic;
  cfg.cotrain.label_model_train = kLabelModelDefaults;
  cfg.cotrain.head_train = kHeadDefaults;

  if (j.contains("cotrain")) {
    const json& c = j.at("cotrain");
    const std::string ctx = "config.cotrain";
    check_keys(c, {"beta", "beta_prime", "iterations", "gamma", "neighbors",
                   "selection_view0", "selection_view1", "val_fraction",
                   "label_model_train", "head_train", "seed"},
               ctx);
    cfg.cotrain.beta = get_or(c, "beta", cfg.cotrain.beta, ctx);
    cfg.cotrain.beta_prime = get_or(c, "beta_prime", cfg.cotrain.beta_prime, ctx);
    cfg.cotrain.iterations = get_or(c, "iterations", cfg.cotrain.iterations, ctx);
    cfg.cotrain.gamma = get_or(c, "gamma", cfg.cotrain.gamma, ctx);
    cfg.cotrain.neighbors = get_or(c, "neighbors", cfg.cotrain.neighbors, ctx);
    if (c.contains("selection_view0")) {
      cfg.cotrain.selection_view0 = parse_strategy(
          get_field<std::string>(c, "selection_view0", ctx), ctx + ".selection_view0");
    }
    if (c.contains("selection_view1")) {
      cfg.cotrain.selection_view1 = parse_strategy(
          get_field<std::string>(c, "selection_view1", ctx), ctx + ".selection_view1");
    }
    cfg.cotrain.val_fraction = get_or(c, "val_fraction", cfg.cotrain.val_fraction, ctx);
    if (c.contains("label_model_train")) {
      cfg.cotrain.label_model_train = parse_train_config(
          c.at("label_model_train"), kLabelModelDefaults, ctx + ".label_model_train");
    }
    if (c.contains("head_train")) {
      cfg.cotrain.head_train =
          parse_train_config(c.at("head_train"), kHeadDefaults, ctx + ".head_train");
    }
    cfg.cotrain.seed = get_or<std::uint64_t>(c, "seed", 0, ctx);
  }

  // Schedule and range checks that need no dataset: reject bad configs
  // before any work happens.
  try {
    if (cfg.cotrain.gamma > 0.5) {
      throw std::invalid_argument("cotrain config: gamma must be in [0, 1/l]");
    }
    cfg.cotrain.validate(2);
  } catch (const std::exception& e) {
    config_error("config.cotrain", e.what());
  }

  if (j.contains("head")) {
    cfg.head = parse_head_spec(j.at("head"), "config.head");
  }
  if (j.contains("view0_head")) {
    config_error("config.view0_head",
                 "view-0 head architecture comes from init_checkpoint; remove this field");
  }
  if (j.contains("init_checkpoint")) {
    cfg.init_checkpoint = get_field<std::string>(j, "init_checkpoint", "config");
  }
  if (cfg.mode == RunMode::full_access_generic && !cfg.init_checkpoint) {
    config_error("config.init_checkpoint", "required in full_access_generic mode");
  }
  cfg.output_dir = get_or<std::string>(j, "output_dir", "", "config");
  return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str(), path);
}

SynthConfig parse_synth_config_file(const std::string& path) {
  return parse_synth(load_json_file(path), "synth");
}

LoadedDataset materialize_synth(const SynthConfig& config) {
  std::vector<double> balance = config.balance;
  if (balance.empty()) {
    balance.assign(static_cast<std::size_t>(config.num_labels),
                   1.0 / static_cast<double>(config.num_labels));
  }
  const std::vector<int> labels =
      gen_labels(config.num_examples, balance, Rng::stream(config.seed, {0x901dULL}).next_u64());

  LoadedDataset out;
  out.dataset.num_labels = config.num_labels;
  out.dataset.gold_labels = labels;
  out.dataset.view1 = gen_blob_view(labels, config.blobs);

  if (config.emitters) {
    EmitterSpec spec = *config.emitters;
    spec.seed = Rng::stream(config.seed, {0x0e1eULL}).next_u64();
    if (spec.bias.empty()) {
      const auto [lo, hi] = config.bias_log_uniform.value_or(std::make_pair(1.0, 1.0));
      Rng bias_rng = Rng::stream(config.seed, {0xb1a5ULL});
      const double log_lo = std::log(lo), log_hi = std::log(hi);
      spec.bias.resize(static_cast<std::size_t>(spec.num_prompts));
      for (auto& b : spec.bias) {
        b.resize(static_cast<std::size_t>(spec.vocab_size));
        for (double& v : b) {
          v = std::exp(log_lo + (log_hi - log_lo) * bias_rng.next_double());
        }
      }
    }
    PromptViewDraw draw = gen_prompt_view(labels, spec);
    out.dataset.view0 = std::move(draw.tensor);
    out.content_free = std::move(draw.content_free);
  } else if (config.view0_blobs) {
    out.dataset.view0 = gen_blob_view(labels, *config.view0_blobs);
  } else {
    throw std::runtime_error("synth config: need either emitters or view0_blobs");
  }
  out.dataset.validate();
  return out;
}

namespace {

std::vector<int> load_gold_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    labels.push_back(std::stoi(line));
  }
  if (labels.empty()) throw std::runtime_error(path + ": no labels");
  return labels;
}

MatrixFormat parse_format(const std::string& s, const std::string& ctx) {
  if (s == "csv") return MatrixFormat::csv;
  if (s == "bin-f32") return MatrixFormat::bin_f32;
  throw std::runtime_error(ctx + ": unknown format \"" + s + "\"");
}

}  // namespace

LoadedDataset load_dataset_dir(const std::string& dir) {
  const fs::path root(dir);
  const json manifest = load_json_file((root / "manifest.json").string());

  LoadedDataset out;
  out.dataset.num_labels = get_field<int>(manifest, "num_labels", "manifest");

  const json& v0 = manifest.at("view0");
  const std::string type = get_field<std::string>(v0, "type", "manifest.view0");
  if (type == "prompts") {
    const MatrixFormat format = parse_format(
        get_field<std::string>(v0, "format", "manifest.view0"), "manifest.view0.format");
    std::vector<Matrix> per_prompt;
    for (const auto& file : v0.at("prompt_files")) {
      per_prompt.push_back(
          load_view_matrix((root / file.get<std::string>()).string(), format));
    }
    auto verbalizer = get_field<std::vector<std::string>>(v0, "verbalizer", "manifest.view0");
    out.dataset.view0 = make_prompt_view_tensor(per_prompt, std::move(verbalizer),
                                                out.dataset.num_labels);
    if (v0.contains("content_free")) {
      out.content_free =
          v0.at("content_free").get<std::vector<std::vector<std::vector<double>>>>();
    }
  } else if (type == "matrix") {
    const MatrixFormat format = parse_format(
        get_field<std::string>(v0, "format", "manifest.view0"), "manifest.view0.format");
    out.dataset.view0 =
        load_view_matrix((root / get_field<std::string>(v0, "file", "manifest.view0")).string(),
                         format);
  } else {
    throw std::runtime_error("manifest.view0.type: expected \"prompts\" or \"matrix\"");
  }

  const MatrixFormat v1_format =
      parse_format(get_or<std::string>(manifest, "view1_format", "bin-f32", "manifest"),
                   "manifest.view1_format");
  out.dataset.view1 = load_view_matrix(
      (root / get_field<std::string>(manifest, "view1_file", "manifest")).string(), v1_format);

  if (manifest.contains("gold_file")) {
    out.dataset.gold_labels =
        load_gold_file((root / manifest.at("gold_file").get<std::string>()).string());
  }
  out.dataset.validate();
  return out;
}

void save_dataset_dir(const LoadedDataset& data, const std::string& dir, MatrixFormat format) {
  const fs::path root(dir);
  fs::create_directories(root);
  const std::string ext = format == MatrixFormat::csv ? ".csv" : ".bin";
  const std::string format_name = format == MatrixFormat::csv ? "csv" : "bin-f32";

  json manifest;
  manifest["num_labels"] = data.dataset.num_labels;

  if (data.dataset.view0_is_tensor()) {
    const PromptViewTensor& t = data.dataset.view0_tensor();
    json v0;
    v0["type"] = "prompts";
    v0["format"] = format_name;
    v0["verbalizer"] = t.verbalizer;
    json files = json::array();
    for (std::size_t p = 0; p < t.num_prompts; ++p) {
      const std::string name = "prompt_" + std::to_string(p) + ext;
      Matrix m(t.num_examples, t.vocab_size);
      for (std::size_t e = 0; e < t.num_examples; ++e) {
        const auto s = t.slice(e, p);
        std::copy(s.begin(), s.end(), m.row(e).begin());
      }
      save_view_matrix(m, (root / name).string(), format);
      files.push_back(name);
    }
    v0["prompt_files"] = std::move(files);
    if (!data.content_free.empty()) v0["content_free"] = data.content_free;
    manifest["view0"] = std::move(v0);
  } else {
    const std::string name = "view0" + ext;
    save_view_matrix(data.dataset.view0_matrix(), (root / name).string(), format);
    manifest["view0"] = json{{"type", "matrix"}, {"format", format_name}, {"file", name}};
  }

  const std::string v1_name = "view1" + ext;
  save_view_matrix(data.dataset.view1, (root / v1_name).string(), format);
  manifest["view1_file"] = v1_name;
  manifest["view1_format"] = format_name;

  if (data.dataset.has_gold()) {
    std::ofstream gold((root / "gold.csv").string());
    if (!gold) throw std::runtime_error("cannot write gold.csv");
    for (int y : data.dataset.gold_labels) gold << y << '\n';
    manifest["gold_file"] = "gold.csv";
  }

  std::ofstream mf((root / "manifest.json").string());
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  mf << manifest.dump(2) << '\n';
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json view_metrics_to_json(const ViewIterationMetrics& v) {
  json j;
  j["confident_size"] = v.confident_size;
  if (v.test_accuracy) j["test_accuracy"] = *v.test_accuracy;
  if (v.quality) {
    j["precision"] = v.quality->precision;
    j["recall"] = v.quality->recall;
    j["normalized_coverage"] = v.quality->normalized_coverage;
    j["balance_tvd"] = v.quality->balance_tvd;
    j["noise_rates"] = v.quality->noise_rates;
    if (v.quality->total_noise) j["total_noise"] = *v.quality->total_noise;
  }
  return j;
}

json resolved_config_json(const RunConfig& cfg) {
  json j;
  j["mode"] = cfg.mode == RunMode::partial_access ? "partial_access" : "full_access_generic";
  if (cfg.dataset_dir) j["dataset"] = json{{"dir", *cfg.dataset_dir}};
  if (cfg.synth) {
    const SynthConfig& s = *cfg.synth;
    json sj;
    sj["num_examples"] = s.num_examples;
    sj["num_labels"] = s.num_labels;
    if (!s.balance.empty()) sj["balance"] = s.balance;
    sj["seed"] = s.seed;
    if (s.emitters) {
      json ej;
      ej["num_prompts"] = s.emitters->num_prompts;
      ej["vocab_size"] = s.emitters->vocab_size;
      ej["accuracy"] = s.emitters->accuracy;
      ej["concentration"] = s.emitters->concentration;
      if (!s.emitters->bias.empty()) {
        ej["bias"] = s.emitters->bias;
      } else if (s.bias_log_uniform) {
        ej["bias_log_uniform"] = {s.bias_log_uniform->first, s.bias_log_uniform->second};
      }
      sj["emitters"] = std::move(ej);
    }
    if (s.view0_blobs) {
      sj["view0_blobs"] = json{{"dim", s.view0_blobs->dim},
                               {"separation", s.view0_blobs->separation},
                               {"noise_scale", s.view0_blobs->noise_scale}};
    }
    sj["blobs"] = json{{"dim", s.blobs.dim},
                       {"separation", s.blobs.separation},
                       {"noise_scale", s.blobs.noise_scale}};
    j["synth"] = std::move(sj);
  }
  const CoTrainConfig& c = cfg.cotrain;
  j["cotrain"] = json{
      {"beta", c.beta},
      {"beta_prime", c.beta_prime},
      {"iterations", c.iterations},
      {"gamma", c.gamma},
      {"neighbors", c.neighbors},
      {"selection_view0", c.selection_view0 == SelectionStrategy::model_confidence
                              ? "model_confidence"
                              : "cut_statistic"},
      {"selection_view1", c.selection_view1 == SelectionStrategy::model_confidence
                              ? "model_confidence"
                              : "cut_statistic"},
      {"val_fraction", c.val_fraction},
      {"label_model_train", json{{"learning_rate", c.label_model_train.learning_rate},
                                 {"weight_decay", c.label_model_train.weight_decay},
                                 {"batch_size", c.label_model_train.batch_size},
                                 {"epochs", c.label_model_train.epochs}}},
      {"head_train", json{{"learning_rate", c.head_train.learning_rate},
                          {"weight_decay", c.head_train.weight_decay},
                          {"batch_size", c.head_train.batch_size},
                          {"epochs", c.head_train.epochs}}},
      {"seed", c.seed},
  };
  json hj;
  hj["architecture"] = cfg.head.arch == HeadArch::linear ? "linear" : "one_hidden";
  if (cfg.head.arch == HeadArch::one_hidden) hj["hidden_dim"] = cfg.head.hidden_dim;
  j["head"] = std::move(hj);
  if (cfg.init_checkpoint) j["init_checkpoint"] = *cfg.init_checkpoint;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace

int run_experiment(const RunConfig& config, bool quiet) {
  if (config.output_dir.empty()) {
    throw std::runtime_error("config: field \"output_dir\": missing required field");
  }

  LoadedDataset data =
      config.synth ? materialize_synth(*config.synth) : load_dataset_dir(*config.dataset_dir);

  ViewZeroModel init_h0;
  if (config.mode == RunMode::partial_access) {
    if (!data.dataset.view0_is_tensor()) {
      throw std::runtime_error("partial_access mode requires a prompt view-0 dataset");
    }
    if (data.content_free.empty()) {
      throw std::runtime_error("partial_access mode requires content-free outputs for CBU");
    }
    const PromptViewTensor& t = data.dataset.view0_tensor();
    init_h0 = cbu_init(data.content_free, t.num_labels, static_cast<int>(t.vocab_size));
  } else {
    init_h0 = load_model(*config.init_checkpoint);
  }

  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);
  {
    std::ofstream cf((out_dir / "config_resolved.json").string());
    if (!cf) throw std::runtime_error("cannot write config_resolved.json");
    cf << resolved_config_json(config).dump(2) << '\n';
  }

  const CoTrainResult result = cotrain_run(config.cotrain, data.dataset, init_h0, config.head);

  std::ofstream metrics((out_dir / "metrics.jsonl").string());
  std::ofstream summary((out_dir / "summary.csv").string());
  if (!metrics || !summary) throw std::runtime_error("cannot write metrics files");
  summary << "iteration,coverage,view0_confident_size,view1_confident_size,"
             "view0_test_accuracy,view1_test_accuracy,view0_balance_tvd,view1_balance_tvd,"
             "view0_total_noise,view1_total_noise\n";

  for (std::size_t t = 0; t < result.history.size(); ++t) {
    const IterationMetrics& m = result.history[t];
    json line;
    line["iteration"] = m.iteration;
    line["coverage"] = m.coverage;
    line["view0"] = view_metrics_to_json(m.view0);
    line["view1"] = view_metrics_to_json(m.view1);
    metrics << line.dump() << '\n';

    const auto opt_str = [](const std::optional<double>& v) {
      return v ? fmt_double(*v) : std::string();
    };
    const auto noise_str = [](const ViewIterationMetrics& v) {
      return v.quality && v.quality->total_noise ? fmt_double(*v.quality->total_noise)
                                                 : std::string();
    };
    const auto tvd_str = [](const ViewIterationMetrics& v) {
      return v.quality ? fmt_double(v.quality->balance_tvd) : std::string();
    };
    summary << m.iteration << ',' << fmt_double(m.coverage) << ',' << m.view0.confident_size
            << ',' << m.view1.confident_size << ',' << opt_str(m.view0.test_accuracy) << ','
            << opt_str(m.view1.test_accuracy) << ',' << tvd_str(m.view0) << ','
            << tvd_str(m.view1) << ',' << noise_str(m.view0) << ',' << noise_str(m.view1)
            << '\n';

    const IterationSnapshot& snap = result.snapshots[t];
    const std::string tag = "_t" + std::to_string(m.iteration);
    save_model(snap.h0, (out_dir / ("checkpoint" + tag + "_h0.json")).string());
    save_model(snap.h1, (out_dir / ("checkpoint" + tag + "_h1.json")).string());
    save_view_matrix(snap.view0_probabilities,
                     (out_dir / ("predictions" + tag + "_view0.csv")).string(),
                     MatrixFormat::csv);
    save_view_matrix(snap.view1_probabilities,
                     (out_dir / ("predictions" + tag + "_view1.csv")).string(),
                     MatrixFormat::csv);

    if (!quiet) {
      std::cout << "iteration " << m.iteration << " coverage " << m.coverage;
      if (m.view0.test_accuracy) {
        std::cout << " view0_acc " << *m.view0.test_accuracy << " view1_acc "
                  << *m.view1.test_accuracy;
      }
      std::cout << " |L0| " << m.view0.confident_size << " |L1| " << m.view1.confident_size
                << '\n';
    }
  }
  return 0;
}

std::string EvalReport::to_json_string() const {
  json j;
  j["num_examples"] = num_examples;
  j["accuracy"] = accuracy;
  j["balanced_accuracy"] = balanced_accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  return j.dump(2);
}

EvalReport evaluate_checkpoint(const std::string& checkpoint_path,
                               const std::string& dataset_dir, int view) {
  if (view != 0 && view != 1) throw std::runtime_error("eval: view must be 0 or 1");
  const ViewZeroModel model = load_model(checkpoint_path);
  const LoadedDataset data = load_dataset_dir(dataset_dir);
  if (!data.dataset.has_gold()) {
    throw std::runtime_error("eval: dataset has no gold labels");
  }

  Matrix probs;
  if (view == 0) {
    probs = predict_view0(model, data.dataset).probabilities;
  } else {
    if (!std::holds_alternative<HeadClassifier>(model)) {
      throw std::runtime_error(
          "eval: view 1 requires a head checkpoint (label model is view-0 only)");
    }
    probs = predict_proba(std::get<HeadClassifier>(model), data.dataset.view1);
  }

  const std::vector<int> pred = argmax_rows(probs);
  const std::vector<int>& gold = data.dataset.gold_labels;

  ConfidentSet all;
  all.entries.reserve(pred.size());
  for (std::size_t e = 0; e < pred.size(); ++e) all.entries.push_back({e, pred[e]});
  const SelectionQuality q =
      selection_quality(all, gold, data.dataset.num_labels, gold.size());

  EvalReport report;
  report.num_examples = pred.size();
  report.accuracy = accuracy(pred, gold);
  report.balanced_accuracy = balanced_accuracy(pred, gold, data.dataset.num_labels);
  report.precision = q.precision;
  report.recall = q.recall;
  return report;
}

}  // namespace cotrain
