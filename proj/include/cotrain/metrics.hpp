#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cotrain/dataset.hpp"

namespace cotrain {

// Mean over classes present in `reference` of per-class recall.
double balanced_accuracy(std::span<const int> predicted, std::span<const int> reference,
                         int num_labels);

double accuracy(std::span<const int> predicted, std::span<const int> reference);

// Per-label quality of a pseudo-labeled selection against gold labels over a
// population of `population` examples.
struct SelectionQuality {
  std::size_t size = 0;
  std::vector<double> precision;            // per label; 0 when the label was never assigned
  std::vector<double> recall;               // correct assignments / gold count
  std::vector<double> normalized_coverage;  // assignments / gold count
  double balance_tvd = 0.0;                 // selection label balance vs gold balance
  std::optional<double> total_noise;        // binary tasks only
  std::vector<double> noise_rates;          // l*l row-major; (a,b) = P[pseudo=a | gold=b]
};

SelectionQuality selection_quality(const ConfidentSet& confident, std::span<const int> gold,
                                   int num_labels, std::size_t population);

}  // namespace cotrain
