#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/matrix.hpp"

namespace cotrain {

// Simulated prompt emitter standing in for one-shot LLM outputs. Each prompt
// emits a distribution that is a point mass at the chosen token mixed with
// uniform; the mixing weight is concentration / (1 + concentration). The
// positive bias vector multiplies the emission elementwise before
// renormalization, injecting the miscalibration that CBU undoes.
struct EmitterSpec {
  int num_prompts = 4;
  int num_labels = 2;
  int vocab_size = 2;
  std::vector<double> accuracy;           // per prompt, in (1/l, 1]
  std::vector<std::vector<double>> bias;  // per prompt, size vocab_size, entries > 0
  double concentration = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BlobSpec {
  int num_labels = 2;
  int dim = 2;
  double separation = 3.0;   // distance of each class mean from the origin
  double noise_scale = 1.0;  // isotropic Gaussian noise
  std::uint64_t seed = 0;

  void validate() const;
};

// I.i.d. gold labels with the given balance.
std::vector<int> gen_labels(std::size_t num_examples, std::span<const double> balance,
                            std::uint64_t seed);

struct PromptViewDraw {
  PromptViewTensor tensor;
  // content_free[i]: probability vectors over the l label tokens for prompt
  // i (the normalized bias restricted to label tokens).
  std::vector<std::vector<std::vector<double>>> content_free;
};

PromptViewDraw gen_prompt_view(std::span<const int> labels, const EmitterSpec& spec);

// Class mean for label j sits at separation * e_j (one-hot axis); features
// are mean plus isotropic noise, independent of view 0 given the label.
Matrix gen_blob_view(std::span<const int> labels, const BlobSpec& spec);

}  // namespace cotrain
