#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cotrain/matrix.hpp"

namespace cotrain {

// Stack of k prompt probability vectors over |V| verbalizer tokens per
// example. The first num_labels verbalizer entries are the label tokens in
// label order.
struct PromptViewTensor {
  std::size_t num_examples = 0;
  std::size_t num_prompts = 0;
  std::size_t vocab_size = 0;
  int num_labels = 0;
  std::vector<std::string> verbalizer;  // size vocab_size
  std::vector<double> values;           // example-major, then prompt, then token

  std::span<const double> slice(std::size_t example, std::size_t prompt) const {
    return {values.data() + (example * num_prompts + prompt) * vocab_size, vocab_size};
  }
  std::span<double> slice(std::size_t example, std::size_t prompt) {
    return {values.data() + (example * num_prompts + prompt) * vocab_size, vocab_size};
  }
};

// Builds the tensor from one U x |V| probability matrix per prompt.
// Slices whose sum is within 1e-3 of 1 are renormalized; larger deviation
// is an error (genuinely unnormalized input).
PromptViewTensor make_prompt_view_tensor(const std::vector<Matrix>& per_prompt,
                                         std::vector<std::string> verbalizer,
                                         int num_labels);

struct Dataset {
  std::variant<PromptViewTensor, Matrix> view0;
  Matrix view1;
  std::vector<int> gold_labels;  // empty when unavailable; evaluation only
  int num_labels = 0;

  std::size_t size() const;
  bool has_gold() const { return !gold_labels.empty(); }
  bool view0_is_tensor() const { return std::holds_alternative<PromptViewTensor>(view0); }
  const PromptViewTensor& view0_tensor() const { return std::get<PromptViewTensor>(view0); }
  const Matrix& view0_matrix() const { return std::get<Matrix>(view0); }

  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct ConfidentEntry {
  std::size_t index;
  int pseudo_label;
};

// The pseudo-labeled subset extracted in one co-training iteration.
struct ConfidentSet {
  std::vector<ConfidentEntry> entries;
  int iteration = 0;
  int view_of_origin = 0;

  std::size_t size() const { return entries.size(); }
  void validate(std::size_t num_examples, int num_labels) const;
};

struct SplitResult {
  Dataset train;
  Dataset val;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> val_indices;    // ascending
};

// Uniform random split without replacement; validation gets
// floor(val_fraction * U) examples. Deterministic given seed.
SplitResult split_train_val(const Dataset& dataset, double val_fraction, std::uint64_t seed);

}  // namespace cotrain
