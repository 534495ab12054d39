#include "cotrain/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cotrain/kernels.hpp"
#include "cotrain/metrics.hpp"

namespace cotrain {

void softmax_inplace(std::span<double> logits) {
  double max_v = logits[0];
  for (double v : logits) max_v = std::max(max_v, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - max_v);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

void LabelModelParams::validate() const {
  if (num_prompts < 1 || num_labels < 2 || vocab_size < num_labels) {
    throw std::invalid_argument("label model: need k >= 1, l >= 2, |V| >= l");
  }
  if (W.size() != static_cast<std::size_t>(num_prompts) ||
      alpha.size() != static_cast<std::size_t>(num_prompts)) {
    throw std::invalid_argument("label model: W/alpha count mismatch with num_prompts");
  }
  for (const Matrix& w : W) {
    if (w.rows() != static_cast<std::size_t>(num_labels) ||
        w.cols() != static_cast<std::size_t>(vocab_size)) {
      throw std::invalid_argument("label model: calibration matrix shape mismatch");
    }
    for (double v : w.values()) {
      if (!std::isfinite(v)) throw std::invalid_argument("label model: non-finite weight");
    }
  }
  for (double a : alpha) {
    if (!std::isfinite(a)) throw std::invalid_argument("label model: non-finite alpha");
  }
}

std::size_t LabelModelParams::num_flat_params() const {
  return static_cast<std::size_t>(num_prompts) * num_labels * vocab_size +
         static_cast<std::size_t>(num_prompts);
}

std::vector<double> LabelModelParams::to_flat() const {
  std::vector<double> flat;
  flat.reserve(num_flat_params());
  for (const Matrix& w : W) flat.insert(flat.end(), w.values().begin(), w.values().end());
  flat.insert(flat.end(), alpha.begin(), alpha.end());
  return flat;
}

LabelModelParams LabelModelParams::from_flat(std::span<const double> flat, int num_prompts,
                                             int num_labels, int vocab_size) {
  LabelModelParams p;
  p.num_prompts = num_prompts;
  p.num_labels = num_labels;
  p.vocab_size = vocab_size;
  const std::size_t w_size = static_cast<std::size_t>(num_labels) * vocab_size;
  if (flat.size() != w_size * num_prompts + static_cast<std::size_t>(num_prompts)) {
    throw std::invalid_argument("label model: flat parameter size mismatch");
  }
  for (int i = 0; i < num_prompts; ++i) {
    p.W.emplace_back(num_labels, vocab_size,
                     std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(i * w_size),
                                         flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * w_size)));
  }
  p.alpha.assign(flat.end() - num_prompts, flat.end());
  return p;
}

namespace {

void check_view(const LabelModelParams& params, const PromptViewTensor& view) {
  if (view.num_prompts != static_cast<std::size_t>(params.num_prompts) ||
      view.vocab_size != static_cast<std::size_t>(params.vocab_size) ||
      view.num_labels != params.num_labels) {
    throw std::invalid_argument("label model: view dimensions do not match parameters");
  }
}

// Shared by training batches and the public full-set entry point.
double label_model_loss_grad_impl(std::span<const double> flat, const PromptViewTensor& view,
                                  const std::vector<ConfidentEntry>& entries,
                                  std::span<const std::size_t> batch, std::span<double> grad,
                                  int k, int l, int V) {
  const std::size_t w_size = static_cast<std::size_t>(l) * V;
  const double* alpha = flat.data() + w_size * k;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> z(static_cast<std::size_t>(k) * l);
  std::vector<double> probs(static_cast<std::size_t>(l));
  double loss = 0.0;

  for (std::size_t bi : batch) {
    const ConfidentEntry& entry = entries[bi];
    std::fill(probs.begin(), probs.end(), 0.0);
    for (int i = 0; i < k; ++i) {
      const auto phi = view.slice(entry.index, static_cast<std::size_t>(i));
      const double* w = flat.data() + w_size * i;
      for (int r = 0; r < l; ++r) {
        const double zi =
            kernels::dot(w + static_cast<std::size_t>(r) * V, phi.data(), phi.size());
        z[static_cast<std::size_t>(i) * l + r] = zi;
        if (zi > 0.0) probs[static_cast<std::size_t>(r)] += alpha[i] * zi;
      }
    }
    softmax_inplace(probs);
    loss -= inv_b *
            std::log(std::max(probs[static_cast<std::size_t>(entry.pseudo_label)], 1e-300));

    // backward: d/ds = (p - onehot(y)) / B
    probs[static_cast<std::size_t>(entry.pseudo_label)] -= 1.0;
    double* g_alpha = grad.data() + w_size * k;
    for (int i = 0; i < k; ++i) {
      const auto phi = view.slice(entry.index, static_cast<std::size_t>(i));
      double* g_w = grad.data() + w_size * i;
      double g_a = 0.0;
      for (int r = 0; r < l; ++r) {
        const double zi = z[static_cast<std::size_t>(i) * l + r];
        if (zi <= 0.0) continue;  // relu subgradient at 0 taken as 0
        const double gs = probs[static_cast<std::size_t>(r)] * inv_b;
        g_a += gs * zi;
        kernels::axpy(alpha[i] * gs, phi.data(), g_w + static_cast<std::size_t>(r) * V,
                      phi.size());
      }
      g_alpha[i] += g_a;
    }
  }
  return loss;
}

}  // namespace

double label_model_loss_grad(const LabelModelParams& params, const PromptViewTensor& view,
                             const ConfidentSet& confident, std::span<double> grad) {
  params.validate();
  check_view(params, view);
  if (confident.entries.empty()) {
    throw std::invalid_argument("label model loss: empty confident set");
  }
  confident.validate(view.num_examples, params.num_labels);
  if (grad.size() != params.num_flat_params()) {
    throw std::invalid_argument("label model loss: gradient size mismatch");
  }
  std::vector<std::size_t> all(confident.entries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const std::vector<double> flat = params.to_flat();
  return label_model_loss_grad_impl(flat, view, confident.entries, all, grad,
                                    params.num_prompts, params.num_labels, params.vocab_size);
}

void label_model_preactivation(const LabelModelParams& params, const PromptViewTensor& view,
                               std::size_t example, std::span<double> out) {
  const int l = params.num_labels;
  if (out.size() != static_cast<std::size_t>(l)) {
    throw std::invalid_argument("label model: output size mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (int i = 0; i < params.num_prompts; ++i) {
    const auto phi = view.slice(example, static_cast<std::size_t>(i));
    const Matrix& w = params.W[static_cast<std::size_t>(i)];
    for (int r = 0; r < l; ++r) {
      const double z = kernels::dot(w.row(static_cast<std::size_t>(r)).data(), phi.data(),
                                    phi.size());
      if (z > 0.0) out[static_cast<std::size_t>(r)] += params.alpha[static_cast<std::size_t>(i)] * z;
    }
  }
}

void label_model_forward(const LabelModelParams& params, const PromptViewTensor& view,
                         std::size_t example, std::span<double> probs_out) {
  check_view(params, view);
  label_model_preactivation(params, view, example, probs_out);
  softmax_inplace(probs_out);
}

Matrix label_model_predict(const LabelModelParams& params, const PromptViewTensor& view) {
  check_view(params, view);
  Matrix out(view.num_examples, static_cast<std::size_t>(params.num_labels));
  for (std::size_t e = 0; e < view.num_examples; ++e) {
    label_model_preactivation(params, view, e, out.row(e));
    softmax_inplace(out.row(e));
  }
  return out;
}

Matrix label_model_embed(const LabelModelParams& params, const PromptViewTensor& view) {
  check_view(params, view);
  Matrix out(view.num_examples, static_cast<std::size_t>(params.num_labels));
  for (std::size_t e = 0; e < view.num_examples; ++e) {
    label_model_preactivation(params, view, e, out.row(e));
  }
  return out;
}

LabelModelParams cbu_init(const std::vector<std::vector<std::vector<double>>>& content_free,
                          int num_labels, int vocab_size) {
  if (content_free.empty()) throw std::invalid_argument("cbu: need at least one prompt");
  if (num_labels < 2 || vocab_size < num_labels) {
    throw std::invalid_argument("cbu: need l >= 2 and |V| >= l");
  }
  LabelModelParams params;
  params.num_prompts = static_cast<int>(content_free.size());
  params.num_labels = num_labels;
  params.vocab_size = vocab_size;
  params.alpha.assign(content_free.size(), 1.0);

  const std::size_t l = static_cast<std::size_t>(num_labels);
  for (std::size_t i = 0; i < content_free.size(); ++i) {
    const auto& outputs = content_free[i];
    if (outputs.empty()) {
      throw std::invalid_argument("cbu: prompt " + std::to_string(i) +
                                  " has no content-free outputs");
    }
    std::vector<double> mean(l, 0.0);
    for (const auto& vec : outputs) {
      if (vec.size() != l) {
        throw std::invalid_argument("cbu: content-free vector length mismatch for prompt " +
                                    std::to_string(i));
      }
      double sum = 0.0;
      for (double v : vec) {
        if (!std::isfinite(v) || v < 0.0) {
          throw std::invalid_argument("cbu: invalid content-free probability");
        }
        sum += v;
      }
      if (sum <= 0.0) throw std::invalid_argument("cbu: content-free vector sums to zero");
      for (std::size_t j = 0; j < l; ++j) mean[j] += vec[j] / sum;
    }
    Matrix w(l, static_cast<std::size_t>(vocab_size), 0.0);
    for (std::size_t j = 0; j < l; ++j) {
      mean[j] /= static_cast<double>(outputs.size());
      if (mean[j] == 0.0) {
        throw std::runtime_error("cbu: averaged content-free output has a zero entry at label " +
                                 std::to_string(j) + " for prompt " + std::to_string(i));
      }
      w(j, j) = 1.0 / mean[j];
    }
    params.W.push_back(std::move(w));
  }
  return params;
}

std::vector<std::string> select_verbalizer(
    const std::vector<std::vector<std::map<std::string, double>>>& top_token_lists,
    const std::vector<std::string>& label_tokens) {
  if (label_tokens.empty()) throw std::invalid_argument("verbalizer: no label tokens");
  bool any = false;
  std::map<std::string, double> totals;
  for (const auto& per_example : top_token_lists) {
    for (const auto& token_probs : per_example) {
      for (const auto& [token, prob] : token_probs) {
        totals[token] += prob;
        any = true;
      }
    }
  }
  if (!any) throw std::invalid_argument("verbalizer: empty input");

  std::vector<std::pair<std::string, double>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep =
      static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(ranked.size())));

  std::vector<std::string> verbalizer = label_tokens;
  for (std::size_t i = 0; i < keep; ++i) {
    const std::string& token = ranked[i].first;
    if (std::find(label_tokens.begin(), label_tokens.end(), token) == label_tokens.end()) {
      verbalizer.push_back(token);
    }
  }
  return verbalizer;
}

LabelModelTrainResult train_label_model(const LabelModelParams& init,
                                        const PromptViewTensor& view,
                                        const ConfidentSet& confident,
                                        const ConfidentSet& val_confident,
                                        const PromptViewTensor& val_view,
                                        const TrainConfig& config) {
  init.validate();
  check_view(init, view);
  check_view(init, val_view);
  if (confident.entries.empty()) {
    throw std::invalid_argument("label model train: empty confident set");
  }
  confident.validate(view.num_examples, init.num_labels);
  val_confident.validate(val_view.num_examples, init.num_labels);

  const int k = init.num_prompts;
  const int l = init.num_labels;
  const int V = init.vocab_size;

  auto loss_grad = [&](std::span<const double> flat, std::span<const std::size_t> batch,
                       std::span<double> grad) {
    return label_model_loss_grad_impl(flat, view, confident.entries, batch, grad, k, l, V);
  };

  std::vector<int> val_ref;
  val_ref.reserve(val_confident.entries.size());
  for (const ConfidentEntry& e : val_confident.entries) val_ref.push_back(e.pseudo_label);

  auto val_score = [&](std::span<const double> flat) {
    if (val_ref.empty()) return 0.0;
    const LabelModelParams p = LabelModelParams::from_flat(flat, k, l, V);
    std::vector<int> pred;
    pred.reserve(val_ref.size());
    std::vector<double> out(static_cast<std::size_t>(l));
    for (const ConfidentEntry& e : val_confident.entries) {
      label_model_preactivation(p, val_view, e.index, out);
      pred.push_back(static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin()));
    }
    return balanced_accuracy(pred, val_ref, l);
  };

  TrainLoopResult loop = train_minibatch(init.to_flat(), confident.entries.size(), config,
                                         loss_grad, val_score);
  LabelModelTrainResult result;
  result.params = LabelModelParams::from_flat(loop.best_params, k, l, V);
  result.best_epoch = loop.best_epoch;
  result.log = std::move(loop.log);
  return result;
}

}  // namespace cotrain
