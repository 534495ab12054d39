#include "cotrain/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cotrain/kernels.hpp"
#include "cotrain/label_model.hpp"
#include "cotrain/metrics.hpp"
#include "cotrain/rng.hpp"

namespace cotrain {

namespace {

struct Layout {
  // offsets into the flat parameter vector
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  std::size_t total = 0;
};

Layout layout_of(HeadArch arch, int input_dim, int num_labels, int hidden_dim) {
  Layout lo;
  if (arch == HeadArch::linear) {
    lo.w1 = 0;
    lo.b1 = static_cast<std::size_t>(num_labels) * input_dim;
    lo.total = lo.b1 + static_cast<std::size_t>(num_labels);
  } else {
    lo.w1 = 0;
    lo.b1 = static_cast<std::size_t>(hidden_dim) * input_dim;
    lo.w2 = lo.b1 + static_cast<std::size_t>(hidden_dim);
    lo.b2 = lo.w2 + static_cast<std::size_t>(num_labels) * hidden_dim;
    lo.total = lo.b2 + static_cast<std::size_t>(num_labels);
  }
  return lo;
}

void forward_logits(const HeadClassifier& m, std::span<const double> x,
                    std::span<double> hidden_pre, std::span<double> logits) {
  const Layout lo = layout_of(m.arch, m.input_dim, m.num_labels, m.hidden_dim);
  const double* p = m.params.data();
  if (m.arch == HeadArch::linear) {
    for (int r = 0; r < m.num_labels; ++r) {
      logits[static_cast<std::size_t>(r)] =
          kernels::dot(p + lo.w1 + static_cast<std::size_t>(r) * m.input_dim, x.data(),
                       x.size()) +
          p[lo.b1 + static_cast<std::size_t>(r)];
    }
    return;
  }
  for (int h = 0; h < m.hidden_dim; ++h) {
    hidden_pre[static_cast<std::size_t>(h)] =
        kernels::dot(p + lo.w1 + static_cast<std::size_t>(h) * m.input_dim, x.data(), x.size()) +
        p[lo.b1 + static_cast<std::size_t>(h)];
  }
  for (int r = 0; r < m.num_labels; ++r) {
    double acc = p[lo.b2 + static_cast<std::size_t>(r)];
    const double* w2 = p + lo.w2 + static_cast<std::size_t>(r) * m.hidden_dim;
    for (int h = 0; h < m.hidden_dim; ++h) {
      const double a = hidden_pre[static_cast<std::size_t>(h)];
      if (a > 0.0) acc += w2[h] * a;
    }
    logits[static_cast<std::size_t>(r)] = acc;
  }
}

struct HeadDims {
  HeadArch arch;
  int input_dim, num_labels, hidden_dim;
};

// Shared by training batches and the public full-set entry point.
double head_loss_grad_impl(const HeadDims& dims, std::span<const double> flat,
                           const Matrix& features, const std::vector<ConfidentEntry>& entries,
                           std::span<const std::size_t> batch, std::span<double> grad) {
  const Layout lo = layout_of(dims.arch, dims.input_dim, dims.num_labels, dims.hidden_dim);
  const int l = dims.num_labels;
  const int d = dims.input_dim;
  const int hd = dims.hidden_dim;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  HeadClassifier scratch;
  scratch.arch = dims.arch;
  scratch.input_dim = d;
  scratch.num_labels = l;
  scratch.hidden_dim = hd;
  scratch.params.assign(flat.begin(), flat.end());

  std::vector<double> hidden_pre(static_cast<std::size_t>(std::max(hd, 1)));
  std::vector<double> probs(static_cast<std::size_t>(l));
  double loss = 0.0;

  for (std::size_t bi : batch) {
    const ConfidentEntry& entry = entries[bi];
    const auto x = features.row(entry.index);
    forward_logits(scratch, x, hidden_pre, probs);
    softmax_inplace(probs);
    loss -= inv_b *
            std::log(std::max(probs[static_cast<std::size_t>(entry.pseudo_label)], 1e-300));
    probs[static_cast<std::size_t>(entry.pseudo_label)] -= 1.0;

    if (dims.arch == HeadArch::linear) {
      for (int r = 0; r < l; ++r) {
        const double g = probs[static_cast<std::size_t>(r)] * inv_b;
        kernels::axpy(g, x.data(), grad.data() + lo.w1 + static_cast<std::size_t>(r) * d,
                      x.size());
        grad[lo.b1 + static_cast<std::size_t>(r)] += g;
      }
      continue;
    }
    for (int r = 0; r < l; ++r) {
      const double g = probs[static_cast<std::size_t>(r)] * inv_b;
      double* g_w2 = grad.data() + lo.w2 + static_cast<std::size_t>(r) * hd;
      for (int h = 0; h < hd; ++h) {
        const double a = hidden_pre[static_cast<std::size_t>(h)];
        if (a > 0.0) g_w2[h] += g * a;
      }
      grad[lo.b2 + static_cast<std::size_t>(r)] += g;
    }
    const double* w2 = flat.data() + lo.w2;
    for (int h = 0; h < hd; ++h) {
      if (hidden_pre[static_cast<std::size_t>(h)] <= 0.0) continue;
      double gh = 0.0;
      for (int r = 0; r < l; ++r) {
        gh += probs[static_cast<std::size_t>(r)] * inv_b *
              w2[static_cast<std::size_t>(r) * hd + h];
      }
      kernels::axpy(gh, x.data(), grad.data() + lo.w1 + static_cast<std::size_t>(h) * d,
                    x.size());
      grad[lo.b1 + static_cast<std::size_t>(h)] += gh;
    }
  }
  return loss;
}

}  // namespace

double head_loss_grad(const HeadClassifier& model, const Matrix& features,
                      const ConfidentSet& confident, std::span<double> grad) {
  model.validate();
  if (features.cols() != static_cast<std::size_t>(model.input_dim)) {
    throw std::invalid_argument("head loss: feature dim mismatch");
  }
  if (confident.entries.empty()) throw std::invalid_argument("head loss: empty confident set");
  confident.validate(features.rows(), model.num_labels);
  if (grad.size() != model.params.size()) {
    throw std::invalid_argument("head loss: gradient size mismatch");
  }
  std::vector<std::size_t> all(confident.entries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return head_loss_grad_impl({model.arch, model.input_dim, model.num_labels, model.hidden_dim},
                             model.params, features, confident.entries, all, grad);
}

std::size_t HeadClassifier::num_flat_params() const {
  return layout_of(arch, input_dim, num_labels, hidden_dim).total;
}

void HeadClassifier::validate() const {
  if (input_dim < 1 || num_labels < 2) {
    throw std::invalid_argument("head: need input_dim >= 1 and num_labels >= 2");
  }
  if (arch == HeadArch::one_hidden && hidden_dim < 1) {
    throw std::invalid_argument("head: one_hidden requires hidden_dim >= 1");
  }
  if (params.size() != num_flat_params()) {
    throw std::invalid_argument("head: parameter count mismatch");
  }
  for (double v : params) {
    if (!std::isfinite(v)) throw std::invalid_argument("head: non-finite parameter");
  }
}

HeadClassifier init_head(const HeadSpec& spec, int input_dim, int num_labels,
                         std::uint64_t seed) {
  HeadClassifier m;
  m.arch = spec.arch;
  m.input_dim = input_dim;
  m.num_labels = num_labels;
  m.hidden_dim = spec.arch == HeadArch::one_hidden ? spec.hidden_dim : 0;
  const Layout lo = layout_of(m.arch, input_dim, num_labels, m.hidden_dim);
  m.params.assign(lo.total, 0.0);
  m.validate();

  Rng rng = Rng::stream(seed, {0x1417ULL});
  const auto fill_uniform = [&rng](std::span<double> block, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : block) v = (2.0 * rng.next_double() - 1.0) * scale;
  };
  if (m.arch == HeadArch::linear) {
    fill_uniform({m.params.data() + lo.w1, lo.b1 - lo.w1}, input_dim);
  } else {
    fill_uniform({m.params.data() + lo.w1, lo.b1 - lo.w1}, input_dim);
    fill_uniform({m.params.data() + lo.w2, lo.b2 - lo.w2}, m.hidden_dim);
  }
  return m;
}

Matrix predict_proba(const HeadClassifier& model, const Matrix& features) {
  model.validate();
  if (features.cols() != static_cast<std::size_t>(model.input_dim)) {
    throw std::invalid_argument("head: feature dim " + std::to_string(features.cols()) +
                                " does not match model input dim " +
                                std::to_string(model.input_dim));
  }
  Matrix out(features.rows(), static_cast<std::size_t>(model.num_labels));
  std::vector<double> hidden(static_cast<std::size_t>(std::max(model.hidden_dim, 1)));
  for (std::size_t e = 0; e < features.rows(); ++e) {
    forward_logits(model, features.row(e), hidden, out.row(e));
    softmax_inplace(out.row(e));
  }
  return out;
}

Matrix embed_for_selection(const HeadClassifier& model, const Matrix& features) {
  model.validate();
  if (features.cols() != static_cast<std::size_t>(model.input_dim)) {
    throw std::invalid_argument("head: feature dim does not match model input dim");
  }
  if (model.arch == HeadArch::linear) return features;

  const Layout lo = layout_of(model.arch, model.input_dim, model.num_labels, model.hidden_dim);
  Matrix out(features.rows(), static_cast<std::size_t>(model.hidden_dim));
  const double* p = model.params.data();
  for (std::size_t e = 0; e < features.rows(); ++e) {
    const auto x = features.row(e);
    auto row = out.row(e);
    for (int h = 0; h < model.hidden_dim; ++h) {
      const double z =
          kernels::dot(p + lo.w1 + static_cast<std::size_t>(h) * model.input_dim, x.data(),
                       x.size()) +
          p[lo.b1 + static_cast<std::size_t>(h)];
      row[static_cast<std::size_t>(h)] = z > 0.0 ? z : 0.0;
    }
  }
  return out;
}

HeadTrainResult train_head(const HeadSpec& spec, const Matrix& features,
                           const ConfidentSet& confident, const ConfidentSet& val_confident,
                           const Matrix& val_features, int num_labels,
                           const TrainConfig& config) {
  if (confident.entries.empty()) {
    throw std::invalid_argument("head train: empty confident set");
  }
  confident.validate(features.rows(), num_labels);
  val_confident.validate(val_features.rows(), num_labels);
  if (val_features.cols() != features.cols()) {
    throw std::invalid_argument("head train: train/val feature dim mismatch");
  }

  // Cold restart: fresh parameters from the run seed every call.
  HeadClassifier model = init_head(spec, static_cast<int>(features.cols()), num_labels,
                                   config.seed);
  const int l = num_labels;
  const HeadDims dims{model.arch, model.input_dim, model.num_labels, model.hidden_dim};

  std::vector<double> hidden_pre(static_cast<std::size_t>(std::max(model.hidden_dim, 1)));
  HeadClassifier scratch = model;

  auto loss_grad = [&](std::span<const double> flat, std::span<const std::size_t> batch,
                       std::span<double> grad) {
    return head_loss_grad_impl(dims, flat, features, confident.entries, batch, grad);
  };

  std::vector<int> val_ref;
  val_ref.reserve(val_confident.entries.size());
  for (const ConfidentEntry& e : val_confident.entries) val_ref.push_back(e.pseudo_label);

  auto val_score = [&](std::span<const double> flat) {
    if (val_ref.empty()) return 0.0;
    scratch.params.assign(flat.begin(), flat.end());
    std::vector<int> pred;
    pred.reserve(val_ref.size());
    std::vector<double> logits(static_cast<std::size_t>(l));
    for (const ConfidentEntry& e : val_confident.entries) {
      forward_logits(scratch, val_features.row(e.index), hidden_pre, logits);
      pred.push_back(
          static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()));
    }
    return balanced_accuracy(pred, val_ref, l);
  };

  TrainLoopResult loop = train_minibatch(model.params, confident.entries.size(), config,
                                         loss_grad, val_score);
  HeadTrainResult result;
  result.model = model;
  result.model.params = std::move(loop.best_params);
  result.best_epoch = loop.best_epoch;
  result.log = std::move(loop.log);
  return result;
}

}  // namespace cotrain
