#include "cotrain/optim.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cotrain/kernels.hpp"
#include "cotrain/rng.hpp"

namespace cotrain {

void TrainConfig::validate() const {
  // learning_rate = 0 is allowed: it makes training a no-op, which the
  // zero-step identity contracts rely on.
  if (learning_rate < 0.0 || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train config: learning_rate must be >= 0");
  }
  if (weight_decay < 0.0 || !std::isfinite(weight_decay)) {
    throw std::invalid_argument("train config: weight_decay must be >= 0");
  }
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
}

AdamW::AdamW(std::size_t num_params, double learning_rate, double weight_decay)
    : learning_rate_(learning_rate),
      weight_decay_(weight_decay),
      m_(num_params, 0.0),
      v_(num_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("adamw: parameter/gradient size mismatch");
  }
  ++step_count_;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  kernels::AdamWStep s{
      learning_rate_,
      beta1,
      beta2,
      1e-8,
      weight_decay_,
      1.0 - std::pow(beta1, static_cast<double>(step_count_)),
      1.0 - std::pow(beta2, static_cast<double>(step_count_)),
  };
  kernels::adamw_update(params.data(), grad.data(), m_.data(), v_.data(), params.size(), s);
}

TrainLoopResult train_minibatch(std::vector<double> initial_params, std::size_t num_examples,
                                const TrainConfig& cfg, const BatchLossGrad& loss_grad,
                                const ValScore& val_score) {
  cfg.validate();
  if (num_examples == 0) throw std::invalid_argument("train: empty training set");

  std::vector<double> params = std::move(initial_params);
  std::vector<double> grad(params.size(), 0.0);
  AdamW opt(params.size(), cfg.learning_rate, cfg.weight_decay);
  Rng shuffle_rng = Rng::stream(cfg.seed, {0x0bafULL});

  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLoopResult result;
  result.best_params = params;
  double best_score = -1.0;

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t num_batches = 0;
    for (std::size_t start = 0; start < num_examples; start += batch) {
      const std::size_t len = std::min(batch, num_examples - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      loss_sum += loss_grad(params, {order.data() + start, len}, grad);
      ++num_batches;
      opt.step(params, grad);
    }
    const double score = val_score(params);
    result.log.push_back({loss_sum / static_cast<double>(num_batches), score});
    if (score > best_score) {
      best_score = score;
      result.best_params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace cotrain
