#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace cotrain {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 5e-3;
  int batch_size = 64;
  int epochs = 40;
  std::uint64_t seed = 0;

  void validate() const;
};

// Adaptive-moment gradient descent with bias correction and decoupled
// weight decay (moment decay 0.9/0.999, epsilon 1e-8).
class AdamW {
 public:
  AdamW(std::size_t num_params, double learning_rate, double weight_decay);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double learning_rate_;
  double weight_decay_;
  long step_count_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct EpochLog {
  double train_loss;              // mean over batches, measured before each update
  double val_balanced_accuracy;   // on the confident validation set
};

struct TrainLoopResult {
  std::vector<double> best_params;  // snapshot with the best validation balanced accuracy
  int best_epoch = -1;              // earliest epoch wins ties
  std::vector<EpochLog> log;
};

// Computes loss over `batch` and accumulates gradients into `grad` (already
// zeroed). Returns the batch loss.
using BatchLossGrad =
    std::function<double(std::span<const double> params, std::span<const std::size_t> batch,
                         std::span<double> grad)>;

// Balanced accuracy of the current parameters on the validation reference.
using ValScore = std::function<double(std::span<const double> params)>;

// Mini-batch loop shared by the label model and the head: per-epoch shuffle
// from cfg.seed, last partial batch kept, per-epoch validation and
// best-snapshot selection.
TrainLoopResult train_minibatch(std::vector<double> initial_params, std::size_t num_examples,
                                const TrainConfig& cfg, const BatchLossGrad& loss_grad,
                                const ValScore& val_score);

}  // namespace cotrain
