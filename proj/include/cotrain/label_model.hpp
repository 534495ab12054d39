#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/matrix.hpp"
#include "cotrain/optim.hpp"

namespace cotrain {

// Calibrated, ensembled aggregator of k prompt probability vectors:
// h(x) = softmax(sum_i alpha_i * relu(W_i * phi_i(x))).
struct LabelModelParams {
  int num_prompts = 0;
  int num_labels = 0;
  int vocab_size = 0;
  std::vector<Matrix> W;      // k calibration matrices, each l x |V|
  std::vector<double> alpha;  // k ensembling weights

  void validate() const;
  std::size_t num_flat_params() const;
  std::vector<double> to_flat() const;
  static LabelModelParams from_flat(std::span<const double> flat, int num_prompts,
                                    int num_labels, int vocab_size);

  bool operator==(const LabelModelParams&) const = default;
};

// Probability vector over labels for one example's k x |V| slice.
void label_model_forward(const LabelModelParams& params, const PromptViewTensor& view,
                         std::size_t example, std::span<double> probs_out);

// Pre-softmax ensemble vector sum_i alpha_i * relu(W_i * phi_i); the adapted
// view-0 representation used as the cut-statistic embedding.
void label_model_preactivation(const LabelModelParams& params, const PromptViewTensor& view,
                               std::size_t example, std::span<double> out);

Matrix label_model_predict(const LabelModelParams& params, const PromptViewTensor& view);
Matrix label_model_embed(const LabelModelParams& params, const PromptViewTensor& view);

// Calibrate-before-use initialization: per prompt, the renormalized
// content-free outputs are averaged to p_bar; the first l columns of W
// become diag(1 / p_bar), the remaining columns 0, and alpha is all ones.
// content_free[i] holds one probability vector over the l label tokens per
// content-free input of prompt i.
LabelModelParams cbu_init(const std::vector<std::vector<std::vector<double>>>& content_free,
                          int num_labels, int vocab_size);

// Aggregates per-(example, prompt) top-token probability maps over the
// unlabeled set, keeps the top 25% of distinct observed tokens by total
// probability, and returns label tokens first followed by the kept tokens
// in descending total order.
std::vector<std::string> select_verbalizer(
    const std::vector<std::vector<std::map<std::string, double>>>& top_token_lists,
    const std::vector<std::string>& label_tokens);

// Mean cross-entropy of the forward pass against the confident pseudo-labels
// plus its analytic gradient, laid out like to_flat(). `grad` must be zeroed
// by the caller. Weight decay is not part of the loss (it is decoupled).
double label_model_loss_grad(const LabelModelParams& params, const PromptViewTensor& view,
                             const ConfidentSet& confident, std::span<double> grad);

struct LabelModelTrainResult {
  LabelModelParams params;
  int best_epoch = -1;
  std::vector<EpochLog> log;
};

// Cross-entropy training on the confident pseudo-labels; returns the
// snapshot with the best balanced accuracy on the confident validation set.
LabelModelTrainResult train_label_model(const LabelModelParams& init,
                                        const PromptViewTensor& view,
                                        const ConfidentSet& confident,
                                        const ConfidentSet& val_confident,
                                        const PromptViewTensor& val_view,
                                        const TrainConfig& config);

// Max-subtraction softmax shared across models.
void softmax_inplace(std::span<double> logits);

}  // namespace cotrain
