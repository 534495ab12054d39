#include "cotrain/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cotrain/rng.hpp"

namespace cotrain {

PromptViewTensor make_prompt_view_tensor(const std::vector<Matrix>& per_prompt,
                                         std::vector<std::string> verbalizer,
                                         int num_labels) {
  if (per_prompt.empty()) throw std::invalid_argument("prompt view: need at least one prompt");
  const std::size_t U = per_prompt.front().rows();
  const std::size_t V = per_prompt.front().cols();
  if (verbalizer.size() != V) {
    throw std::invalid_argument("prompt view: verbalizer size " +
                                std::to_string(verbalizer.size()) + " != vocab size " +
                                std::to_string(V));
  }
  if (num_labels < 2 || static_cast<std::size_t>(num_labels) > V) {
    throw std::invalid_argument("prompt view: num_labels must be in [2, vocab_size]");
  }

  PromptViewTensor t;
  t.num_examples = U;
  t.num_prompts = per_prompt.size();
  t.vocab_size = V;
  t.num_labels = num_labels;
  t.verbalizer = std::move(verbalizer);
  t.values.resize(U * t.num_prompts * V);

  for (std::size_t p = 0; p < per_prompt.size(); ++p) {
    const Matrix& m = per_prompt[p];
    if (m.rows() != U || m.cols() != V) {
      throw std::invalid_argument("prompt view: prompt " + std::to_string(p) +
                                  " has shape " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + ", expected " +
                                  std::to_string(U) + "x" + std::to_string(V));
    }
    for (std::size_t e = 0; e < U; ++e) {
      auto dst = t.slice(e, p);
      double sum = 0.0;
      for (std::size_t j = 0; j < V; ++j) {
        const double v = m(e, j);
        if (!std::isfinite(v) || v < 0.0) {
          throw std::runtime_error("prompt view: invalid probability at prompt " +
                                   std::to_string(p) + ", row " + std::to_string(e) +
                                   ", col " + std::to_string(j));
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-3) {
        throw std::runtime_error("prompt view: slice at prompt " + std::to_string(p) +
                                 ", row " + std::to_string(e) + " sums to " +
                                 std::to_string(sum) + ", not a probability vector");
      }
      for (std::size_t j = 0; j < V; ++j) dst[j] = m(e, j) / sum;
    }
  }
  return t;
}

std::size_t Dataset::size() const {
  return view0_is_tensor() ? view0_tensor().num_examples : view0_matrix().rows();
}

void Dataset::validate() const {
  const std::size_t U = size();
  if (U == 0) throw std::runtime_error("dataset: no examples");
  if (view1.rows() != U) {
    throw std::runtime_error("dataset: view0 has " + std::to_string(U) +
                             " examples but view1 has " + std::to_string(view1.rows()));
  }
  if (num_labels < 2) throw std::runtime_error("dataset: num_labels must be >= 2");
  if (view0_is_tensor() && view0_tensor().num_labels != num_labels) {
    throw std::runtime_error("dataset: num_labels mismatch with prompt view tensor");
  }
  if (!gold_labels.empty()) {
    if (gold_labels.size() != U) {
      throw std::runtime_error("dataset: gold label count mismatch");
    }
    for (std::size_t i = 0; i < gold_labels.size(); ++i) {
      if (gold_labels[i] < 0 || gold_labels[i] >= num_labels) {
        throw std::runtime_error("dataset: gold label out of range at index " +
                                 std::to_string(i));
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_labels = num_labels;
  if (view0_is_tensor()) {
    const PromptViewTensor& src = view0_tensor();
    PromptViewTensor t;
    t.num_examples = indices.size();
    t.num_prompts = src.num_prompts;
    t.vocab_size = src.vocab_size;
    t.num_labels = src.num_labels;
    t.verbalizer = src.verbalizer;
    t.values.resize(indices.size() * src.num_prompts * src.vocab_size);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      for (std::size_t p = 0; p < src.num_prompts; ++p) {
        auto s = src.slice(indices[i], p);
        std::copy(s.begin(), s.end(), t.slice(i, p).begin());
      }
    }
    out.view0 = std::move(t);
  } else {
    const Matrix& src = view0_matrix();
    Matrix m(indices.size(), src.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto s = src.row(indices[i]);
      std::copy(s.begin(), s.end(), m.row(i).begin());
    }
    out.view0 = std::move(m);
  }
  Matrix v1(indices.size(), view1.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto s = view1.row(indices[i]);
    std::copy(s.begin(), s.end(), v1.row(i).begin());
  }
  out.view1 = std::move(v1);
  if (!gold_labels.empty()) {
    out.gold_labels.reserve(indices.size());
    for (std::size_t idx : indices) out.gold_labels.push_back(gold_labels[idx]);
  }
  return out;
}

void ConfidentSet::validate(std::size_t num_examples, int num_labels) const {
  std::vector<bool> seen(num_examples, false);
  for (const ConfidentEntry& e : entries) {
    if (e.index >= num_examples) {
      throw std::runtime_error("confident set: index " + std::to_string(e.index) +
                               " out of range");
    }
    if (seen[e.index]) {
      throw std::runtime_error("confident set: duplicate index " + std::to_string(e.index));
    }
    seen[e.index] = true;
    if (e.pseudo_label < 0 || e.pseudo_label >= num_labels) {
      throw std::runtime_error("confident set: pseudo-label out of range at index " +
                               std::to_string(e.index));
    }
  }
}

SplitResult split_train_val(const Dataset& dataset, double val_fraction, std::uint64_t seed) {
  const std::size_t U = dataset.size();
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split: val_fraction must be in (0,1)");
  }
  const std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(U)));
  if (U < 2 || n_val < 1) {
    throw std::invalid_argument("split: need U >= 2 and floor(val_fraction*U) >= 1");
  }

  std::vector<std::size_t> order(U);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, {0x5eedULL});
  rng.shuffle(order);

  SplitResult out;
  out.val_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.val_indices.begin(), out.val_indices.end());
  std::sort(out.train_indices.begin(), out.train_indices.end());
  out.train = dataset.subset(out.train_indices);
  out.val = dataset.subset(out.val_indices);
  return out;
}

}  // namespace cotrain
