#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/head.hpp"
#include "cotrain/label_model.hpp"
#include "cotrain/metrics.hpp"
#include "cotrain/optim.hpp"
#include "cotrain/selection.hpp"

namespace cotrain {

enum class SelectionStrategy { model_confidence, cut_statistic };

struct CoTrainConfig {
  double beta = 0.5;
  double beta_prime = 0.1;
  int iterations = 5;  // T
  double gamma = 0.01;
  int neighbors = 20;  // K for the cut-statistic graph
  SelectionStrategy selection_view0 = SelectionStrategy::model_confidence;
  SelectionStrategy selection_view1 = SelectionStrategy::cut_statistic;
  double val_fraction = 0.1;
  TrainConfig label_model_train{1e-4, 5e-3, 64, 40, 0};
  TrainConfig head_train{1e-5, 0.01, 16, 20, 0};
  std::uint64_t seed = 0;

  void validate(int num_labels) const;
};

// Coverage schedule: beta + t * beta_prime for iteration t in [0, T).
double coverage_at(const CoTrainConfig& config, int t);

// The view-0 hypothesis: a calibrated prompt ensemble in the partial-access
// setting, or a generic trainable head over dense view-0 features.
using ViewZeroModel = std::variant<LabelModelParams, HeadClassifier>;

struct ViewPredictions {
  Matrix probabilities;  // U x l
  Matrix embeddings;     // representation used for cut-statistic neighbors
};

ViewPredictions predict_view0(const ViewZeroModel& model, const Dataset& data);
ViewPredictions predict_view1(const HeadClassifier& model, const Dataset& data);

std::vector<int> argmax_rows(const Matrix& probabilities);

// GetConfData: dispatches to the configured selector over precomputed
// predictions.
ConfidentSet get_confident_data(const ViewPredictions& predictions,
                                SelectionStrategy strategy, double coverage,
                                double class_floor, int neighbors);

// Confident validation subset for model selection: the other view's model
// pseudo-labels the validation split at the same coverage as the training
// confident set.
ConfidentSet select_confident_validation(const Dataset& val_dataset,
                                         const ViewZeroModel& other_view_model,
                                         SelectionStrategy strategy, double coverage,
                                         double class_floor, int neighbors);
ConfidentSet select_confident_validation(const Dataset& val_dataset,
                                         const HeadClassifier& other_view_model,
                                         SelectionStrategy strategy, double coverage,
                                         double class_floor, int neighbors);

struct ViewIterationMetrics {
  std::optional<double> test_accuracy;  // on the full dataset, gold required
  std::size_t confident_size = 0;
  std::optional<SelectionQuality> quality;  // vs the training-split gold
};

struct IterationMetrics {
  int iteration = 0;
  double coverage = 0.0;
  ViewIterationMetrics view0;
  ViewIterationMetrics view1;
};

struct IterationSnapshot {
  ViewZeroModel h0;
  HeadClassifier h1;
  Matrix view0_probabilities;  // trained h0 on the full dataset
  Matrix view1_probabilities;  // trained h1 on the full dataset
};

struct CoTrainResult {
  ViewZeroModel h0;
  HeadClassifier h1;
  std::vector<IterationMetrics> history;
  std::vector<IterationSnapshot> snapshots;  // one per iteration
};

// The co-training loop: per iteration, h0 extracts confident data on the
// training split, h1 trains from scratch on it, h1 extracts confident data,
// h0 retrains from scratch. Confident sets replace the previous iteration's
// entirely. Deterministic given (config, dataset, init_h0).
CoTrainResult cotrain_run(const CoTrainConfig& config, const Dataset& dataset,
                          const ViewZeroModel& init_h0, const HeadSpec& h1_spec);

}  // namespace cotrain
