#include "cotrain/cotrain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cotrain/rng.hpp"

namespace cotrain {

namespace {

std::uint64_t iteration_seed(std::uint64_t seed, int t, int view) {
  return Rng::stream(seed, {0xc07aULL, static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(view)})
      .next_u64();
}

}  // namespace

void CoTrainConfig::validate(int num_labels) const {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("cotrain config: beta must be in (0,1]");
  }
  if (!(beta_prime >= 0.0)) {
    throw std::invalid_argument("cotrain config: beta_prime must be >= 0");
  }
  if (iterations < 1) throw std::invalid_argument("cotrain config: iterations must be >= 1");
  if (beta + (iterations - 1) * beta_prime > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "cotrain config: beta + (T-1)*beta_prime exceeds 1 (final coverage " +
        std::to_string(beta + (iterations - 1) * beta_prime) + ")");
  }
  if (!(gamma >= 0.0) || gamma * num_labels > 1.0 + 1e-12) {
    throw std::invalid_argument("cotrain config: gamma must be in [0, 1/l]");
  }
  if (neighbors < 1) throw std::invalid_argument("cotrain config: neighbors must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("cotrain config: val_fraction must be in (0,1)");
  }
  label_model_train.validate();
  head_train.validate();
}

double coverage_at(const CoTrainConfig& config, int t) {
  if (t < 0 || t >= config.iterations) {
    throw std::invalid_argument("coverage_at: iteration " + std::to_string(t) +
                                " outside [0, " + std::to_string(config.iterations) + ")");
  }
  return config.beta + static_cast<double>(t) * config.beta_prime;
}

std::vector<int> argmax_rows(const Matrix& probabilities) {
  std::vector<int> out(probabilities.rows());
  for (std::size_t e = 0; e < probabilities.rows(); ++e) {
    const auto row = probabilities.row(e);
    out[e] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

ViewPredictions predict_view0(const ViewZeroModel& model, const Dataset& data) {
  if (std::holds_alternative<LabelModelParams>(model)) {
    if (!data.view0_is_tensor()) {
      throw std::invalid_argument("view 0: label model requires a prompt view tensor");
    }
    const auto& params = std::get<LabelModelParams>(model);
    return {label_model_predict(params, data.view0_tensor()),
            label_model_embed(params, data.view0_tensor())};
  }
  if (data.view0_is_tensor()) {
    throw std::invalid_argument("view 0: head classifier requires a dense feature matrix");
  }
  const auto& head = std::get<HeadClassifier>(model);
  return {predict_proba(head, data.view0_matrix()),
          embed_for_selection(head, data.view0_matrix())};
}

ViewPredictions predict_view1(const HeadClassifier& model, const Dataset& data) {
  return {predict_proba(model, data.view1), embed_for_selection(model, data.view1)};
}

ConfidentSet get_confident_data(const ViewPredictions& predictions,
                                SelectionStrategy strategy, double coverage,
                                double class_floor, int neighbors) {
  if (strategy == SelectionStrategy::model_confidence) {
    return select_confident_mc(predictions.probabilities, coverage, class_floor);
  }
  const std::vector<int> pseudo = argmax_rows(predictions.probabilities);
  const NeighborGraph graph = knn_graph(predictions.embeddings, neighbors);
  const SelectionScore scores =
      cut_statistic_scores(pseudo, graph, static_cast<int>(predictions.probabilities.cols()));
  return select_confident_cs(scores, coverage);
}

ConfidentSet select_confident_validation(const Dataset& val_dataset,
                                         const ViewZeroModel& other_view_model,
                                         SelectionStrategy strategy, double coverage,
                                         double class_floor, int neighbors) {
  if (val_dataset.size() == 0) {
    throw std::invalid_argument("confident validation: empty validation set");
  }
  return get_confident_data(predict_view0(other_view_model, val_dataset), strategy, coverage,
                            class_floor, neighbors);
}

ConfidentSet select_confident_validation(const Dataset& val_dataset,
                                         const HeadClassifier& other_view_model,
                                         SelectionStrategy strategy, double coverage,
                                         double class_floor, int neighbors) {
  if (val_dataset.size() == 0) {
    throw std::invalid_argument("confident validation: empty validation set");
  }
  return get_confident_data(predict_view1(other_view_model, val_dataset), strategy, coverage,
                            class_floor, neighbors);
}

namespace {

ViewZeroModel retrain_h0(const ViewZeroModel& init_h0, const SplitResult& split,
                         const ConfidentSet& confident, const ConfidentSet& val_confident,
                         const CoTrainConfig& config, int t) {
  TrainConfig cfg = config.label_model_train;
  cfg.seed = iteration_seed(config.seed, t, 0);
  if (std::holds_alternative<LabelModelParams>(init_h0)) {
    // From scratch for the label model means the CBU initialization, a pure
    // function of the content-free outputs, never of prior trained weights.
    return train_label_model(std::get<LabelModelParams>(init_h0), split.train.view0_tensor(),
                             confident, val_confident, split.val.view0_tensor(), cfg)
        .params;
  }
  const auto& generic = std::get<HeadClassifier>(init_h0);
  HeadSpec spec{generic.arch, generic.hidden_dim};
  return train_head(spec, split.train.view0_matrix(), confident, val_confident,
                    split.val.view0_matrix(), split.train.num_labels, cfg)
      .model;
}

void run_iteration(const CoTrainConfig& config, const Dataset& dataset,
                   const SplitResult& split, const ViewZeroModel& init_h0,
                   const HeadSpec& h1_spec, int t, CoTrainResult& result) {
  const double coverage = coverage_at(config, t);
  const int l = dataset.num_labels;

  // L0: confident data from h0 on the training split.
  ConfidentSet l0 = get_confident_data(predict_view0(result.h0, split.train),
                                       config.selection_view0, coverage, config.gamma,
                                       config.neighbors);
  l0.iteration = t;
  l0.view_of_origin = 0;
  if (l0.entries.empty()) throw std::runtime_error("view-0 confident set is empty");

  // Train h1 from scratch on L0; model selection uses h0's confident
  // validation subset, fixed once per round.
  const ConfidentSet val0 = select_confident_validation(
      split.val, result.h0, config.selection_view0, coverage, config.gamma, config.neighbors);
  TrainConfig head_cfg = config.head_train;
  head_cfg.seed = iteration_seed(config.seed, t, 1);
  result.h1 =
      train_head(h1_spec, split.train.view1, l0, val0, split.val.view1, l, head_cfg).model;

  // L1: confident data from the freshly trained h1.
  ConfidentSet l1 = get_confident_data(predict_view1(result.h1, split.train),
                                       config.selection_view1, coverage, config.gamma,
                                       config.neighbors);
  l1.iteration = t;
  l1.view_of_origin = 1;
  if (l1.entries.empty()) throw std::runtime_error("view-1 confident set is empty");

  // Retrain h0 from scratch on L1.
  const ConfidentSet val1 = select_confident_validation(
      split.val, result.h1, config.selection_view1, coverage, config.gamma, config.neighbors);
  result.h0 = retrain_h0(init_h0, split, l1, val1, config, t);

  IterationMetrics metrics;
  metrics.iteration = t;
  metrics.coverage = coverage;
  metrics.view0.confident_size = l0.size();
  metrics.view1.confident_size = l1.size();

  IterationSnapshot snap;
  snap.h0 = result.h0;
  snap.h1 = result.h1;
  snap.view0_probabilities = predict_view0(result.h0, dataset).probabilities;
  snap.view1_probabilities = predict_view1(result.h1, dataset).probabilities;

  if (dataset.has_gold()) {
    metrics.view0.quality =
        selection_quality(l0, split.train.gold_labels, l, split.train.size());
    metrics.view1.quality =
        selection_quality(l1, split.train.gold_labels, l, split.train.size());
    metrics.view0.test_accuracy =
        accuracy(argmax_rows(snap.view0_probabilities), dataset.gold_labels);
    metrics.view1.test_accuracy =
        accuracy(argmax_rows(snap.view1_probabilities), dataset.gold_labels);
  }
  result.history.push_back(std::move(metrics));
  result.snapshots.push_back(std::move(snap));
}

}  // namespace

CoTrainResult cotrain_run(const CoTrainConfig& config, const Dataset& dataset,
                          const ViewZeroModel& init_h0, const HeadSpec& h1_spec) {
  dataset.validate();
  config.validate(dataset.num_labels);

  const SplitResult split = split_train_val(dataset, config.val_fraction, config.seed);

  CoTrainResult result;
  result.h0 = init_h0;
  for (int t = 0; t < config.iterations; ++t) {
    try {
      run_iteration(config, dataset, split, init_h0, h1_spec, t, result);
    } catch (const std::exception& e) {
      throw std::runtime_error("co-training iteration " + std::to_string(t) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace cotrain
