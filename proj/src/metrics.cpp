#include "cotrain/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace cotrain {

double balanced_accuracy(std::span<const int> predicted, std::span<const int> reference,
                         int num_labels) {
  if (predicted.size() != reference.size() || predicted.empty()) {
    throw std::invalid_argument("balanced accuracy: empty input or length mismatch");
  }
  std::vector<std::size_t> total(num_labels, 0), correct(num_labels, 0);
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const int y = reference[i];
    if (y < 0 || y >= num_labels || predicted[i] < 0 || predicted[i] >= num_labels) {
      throw std::invalid_argument("balanced accuracy: label out of range");
    }
    ++total[y];
    if (predicted[i] == y) ++correct[y];
  }
  // Classes absent from the reference are skipped (degenerate sets average
  // recall over the classes actually present).
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_labels; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return sum / static_cast<double>(present);
}

double accuracy(std::span<const int> predicted, std::span<const int> reference) {
  if (predicted.size() != reference.size() || predicted.empty()) {
    throw std::invalid_argument("accuracy: empty input or length mismatch");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == reference[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

SelectionQuality selection_quality(const ConfidentSet& confident, std::span<const int> gold,
                                   int num_labels, std::size_t population) {
  if (gold.size() != population) {
    throw std::invalid_argument("selection quality: gold labels must cover the population");
  }
  confident.validate(population, num_labels);
  const int l = num_labels;

  std::vector<std::size_t> gold_count(l, 0);
  for (int y : gold) ++gold_count[y];

  // Confusion counts over the selection: joint[a][b] = #{pseudo=a, gold=b}.
  std::vector<std::size_t> joint(static_cast<std::size_t>(l) * l, 0);
  std::vector<std::size_t> pseudo_count(l, 0);
  for (const ConfidentEntry& e : confident.entries) {
    ++joint[static_cast<std::size_t>(e.pseudo_label) * l + gold[e.index]];
    ++pseudo_count[e.pseudo_label];
  }

  SelectionQuality q;
  q.size = confident.size();
  q.precision.resize(l, 0.0);
  q.recall.resize(l, 0.0);
  q.normalized_coverage.resize(l, 0.0);
  q.noise_rates.assign(static_cast<std::size_t>(l) * l, 0.0);

  std::vector<std::size_t> selected_gold_count(l, 0);
  for (const ConfidentEntry& e : confident.entries) ++selected_gold_count[gold[e.index]];

  for (int a = 0; a < l; ++a) {
    const std::size_t diag = joint[static_cast<std::size_t>(a) * l + a];
    if (pseudo_count[a] > 0) {
      q.precision[a] = static_cast<double>(diag) / static_cast<double>(pseudo_count[a]);
    }
    if (gold_count[a] > 0) {
      q.recall[a] = static_cast<double>(diag) / static_cast<double>(gold_count[a]);
      q.normalized_coverage[a] =
          static_cast<double>(pseudo_count[a]) / static_cast<double>(gold_count[a]);
    }
    for (int b = 0; b < l; ++b) {
      if (selected_gold_count[b] > 0) {
        q.noise_rates[static_cast<std::size_t>(a) * l + b] =
            static_cast<double>(joint[static_cast<std::size_t>(a) * l + b]) /
            static_cast<double>(selected_gold_count[b]);
      }
    }
  }

  double tvd = 0.0;
  for (int c = 0; c < l; ++c) {
    const double pseudo_freq =
        q.size > 0 ? static_cast<double>(pseudo_count[c]) / static_cast<double>(q.size) : 0.0;
    const double gold_freq = static_cast<double>(gold_count[c]) / static_cast<double>(population);
    tvd += std::abs(pseudo_freq - gold_freq);
  }
  q.balance_tvd = 0.5 * tvd;

  if (l == 2) {
    q.total_noise = q.noise_rates[0 * 2 + 1] + q.noise_rates[1 * 2 + 0];
  }
  return q;
}

}  // namespace cotrain
