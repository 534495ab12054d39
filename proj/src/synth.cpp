#include "cotrain/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "cotrain/rng.hpp"

namespace cotrain {

void EmitterSpec::validate() const {
  if (num_prompts < 1) throw std::invalid_argument("emitter: need at least one prompt");
  if (num_labels < 2) throw std::invalid_argument("emitter: need at least two labels");
  if (vocab_size < num_labels) throw std::invalid_argument("emitter: vocab_size < num_labels");
  if (accuracy.size() != static_cast<std::size_t>(num_prompts)) {
    throw std::invalid_argument("emitter: accuracy must have one entry per prompt");
  }
  const double chance = 1.0 / static_cast<double>(num_labels);
  for (double a : accuracy) {
    if (!(a > chance && a <= 1.0)) {
      throw std::invalid_argument("emitter: accuracy must be in (1/l, 1]");
    }
  }
  if (bias.size() != static_cast<std::size_t>(num_prompts)) {
    throw std::invalid_argument("emitter: bias must have one vector per prompt");
  }
  for (const auto& b : bias) {
    if (b.size() != static_cast<std::size_t>(vocab_size)) {
      throw std::invalid_argument("emitter: bias vector length must equal vocab_size");
    }
    for (double v : b) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("emitter: bias entries must be positive");
      }
    }
  }
  if (!(concentration >= 0.0)) {  // +inf allowed: exact one-hot emissions
    throw std::invalid_argument("emitter: concentration must be >= 0");
  }
}

void BlobSpec::validate() const {
  if (num_labels < 2) throw std::invalid_argument("blobs: need at least two labels");
  if (dim < num_labels) throw std::invalid_argument("blobs: dim must be >= num_labels");
  if (!(separation >= 0.0)) throw std::invalid_argument("blobs: separation must be >= 0");
  // noise_scale = 0 is permitted: it is the zero-noise limit where all rows
  // of a class coincide.
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("blobs: noise_scale must be >= 0");
}

std::vector<int> gen_labels(std::size_t num_examples, std::span<const double> balance,
                            std::uint64_t seed) {
  if (balance.empty()) throw std::invalid_argument("gen_labels: empty balance");
  double sum = 0.0;
  for (double p : balance) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("gen_labels: balance entries must be >= 0");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("gen_labels: balance must sum to 1, got " + std::to_string(sum));
  }

  Rng rng = Rng::stream(seed, {0x1abe15ULL});
  std::vector<int> labels(num_examples);
  for (std::size_t e = 0; e < num_examples; ++e) {
    const double u = rng.next_double() * sum;
    double acc = 0.0;
    int label = static_cast<int>(balance.size()) - 1;
    for (std::size_t c = 0; c < balance.size(); ++c) {
      acc += balance[c];
      if (u < acc) {
        label = static_cast<int>(c);
        break;
      }
    }
    labels[e] = label;
  }
  return labels;
}

PromptViewDraw gen_prompt_view(std::span<const int> labels, const EmitterSpec& spec) {
  spec.validate();
  const std::size_t U = labels.size();
  const int l = spec.num_labels;
  const int V = spec.vocab_size;
  const double point_mass = std::isinf(spec.concentration)
                                ? 1.0
                                : spec.concentration / (1.0 + spec.concentration);
  const double uniform_part = (1.0 - point_mass) / static_cast<double>(V);

  PromptViewDraw draw;
  PromptViewTensor& t = draw.tensor;
  t.num_examples = U;
  t.num_prompts = static_cast<std::size_t>(spec.num_prompts);
  t.vocab_size = static_cast<std::size_t>(V);
  t.num_labels = l;
  t.verbalizer.reserve(static_cast<std::size_t>(V));
  for (int j = 0; j < l; ++j) t.verbalizer.push_back("label_" + std::to_string(j));
  for (int j = l; j < V; ++j) t.verbalizer.push_back("token_" + std::to_string(j));
  t.values.resize(U * t.num_prompts * t.vocab_size);

  for (int i = 0; i < spec.num_prompts; ++i) {
    Rng rng = Rng::stream(spec.seed, {0xe117ULL, static_cast<std::uint64_t>(i)});
    const auto& bias = spec.bias[static_cast<std::size_t>(i)];
    for (std::size_t e = 0; e < U; ++e) {
      const int gold = labels[e];
      if (gold < 0 || gold >= l) throw std::invalid_argument("gen_prompt_view: label out of range");
      int emitted = gold;
      if (rng.next_double() >= spec.accuracy[static_cast<std::size_t>(i)]) {
        // uniform wrong label
        const int offset = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(l - 1)));
        emitted = offset >= gold ? offset + 1 : offset;
      }
      auto slice = t.slice(e, static_cast<std::size_t>(i));
      double sum = 0.0;
      for (int j = 0; j < V; ++j) {
        double p = uniform_part + (j == emitted ? point_mass : 0.0);
        p *= bias[static_cast<std::size_t>(j)];
        slice[static_cast<std::size_t>(j)] = p;
        sum += p;
      }
      for (int j = 0; j < V; ++j) slice[static_cast<std::size_t>(j)] /= sum;
    }

    std::vector<double> cf(static_cast<std::size_t>(l));
    double label_bias_sum = 0.0;
    for (int j = 0; j < l; ++j) label_bias_sum += bias[static_cast<std::size_t>(j)];
    for (int j = 0; j < l; ++j) cf[static_cast<std::size_t>(j)] = bias[static_cast<std::size_t>(j)] / label_bias_sum;
    draw.content_free.push_back({std::move(cf)});
  }
  return draw;
}

Matrix gen_blob_view(std::span<const int> labels, const BlobSpec& spec) {
  spec.validate();
  Rng rng = Rng::stream(spec.seed, {0xb10bULL});
  Matrix out(labels.size(), static_cast<std::size_t>(spec.dim));
  for (std::size_t e = 0; e < labels.size(); ++e) {
    const int y = labels[e];
    if (y < 0 || y >= spec.num_labels) {
      throw std::invalid_argument("gen_blob_view: label out of range");
    }
    auto row = out.row(e);
    for (int d = 0; d < spec.dim; ++d) {
      row[static_cast<std::size_t>(d)] = spec.noise_scale * rng.normal();
    }
    row[static_cast<std::size_t>(y)] += spec.separation;
  }
  return out;
}

}  // namespace cotrain
