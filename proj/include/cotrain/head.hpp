#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/matrix.hpp"
#include "cotrain/optim.hpp"

namespace cotrain {

enum class HeadArch { linear, one_hidden };

struct HeadSpec {
  HeadArch arch = HeadArch::linear;
  int hidden_dim = 0;  // one_hidden only
};

// Small trainable classifier over a frozen feature representation.
// linear:      logits = W x + b
// one_hidden:  logits = W2 relu(W1 x + b1) + b2
struct HeadClassifier {
  HeadArch arch = HeadArch::linear;
  int input_dim = 0;
  int num_labels = 0;
  int hidden_dim = 0;
  std::vector<double> params;  // [W1, b1, W2, b2] or [W, b], row-major blocks

  std::size_t num_flat_params() const;
  void validate() const;
  bool operator==(const HeadClassifier&) const = default;
};

// Fresh parameters: weights uniform in +-1/sqrt(fan_in), biases zero,
// deterministic from the seed.
HeadClassifier init_head(const HeadSpec& spec, int input_dim, int num_labels,
                         std::uint64_t seed);

// Row-wise softmax probabilities for every example.
Matrix predict_proba(const HeadClassifier& model, const Matrix& features);

// Representation used for cut-statistic neighbors: the input itself for the
// linear head, the hidden relu activations for the one-hidden head (the
// layer adapted to the task).
Matrix embed_for_selection(const HeadClassifier& model, const Matrix& features);

// Mean cross-entropy against the confident pseudo-labels with analytic
// gradients accumulated into `grad` (zeroed by the caller, laid out like
// model.params). Weight decay is decoupled and not part of the loss.
double head_loss_grad(const HeadClassifier& model, const Matrix& features,
                      const ConfidentSet& confident, std::span<double> grad);

struct HeadTrainResult {
  HeadClassifier model;
  int best_epoch = -1;
  std::vector<EpochLog> log;
};

// Cold restart + cross-entropy training on confident pseudo-labels; best
// snapshot by balanced accuracy on the confident validation set.
HeadTrainResult train_head(const HeadSpec& spec, const Matrix& features,
                           const ConfidentSet& confident, const ConfidentSet& val_confident,
                           const Matrix& val_features, int num_labels,
                           const TrainConfig& config);

}  // namespace cotrain
