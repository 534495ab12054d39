#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cotrain/dataset.hpp"
#include "cotrain/matrix.hpp"

namespace cotrain {

// Exact K-nearest-neighbor graph under Euclidean distance with weights
// w_uv = 1 / (1 + ||e_u - e_v||), so 0 < w_uv <= 1. Each vertex keeps
// min(K, U-1) neighbors, self excluded, distance ties broken by ascending
// index.
struct NeighborGraph {
  std::size_t num_examples = 0;
  int k = 0;
  std::vector<std::vector<std::uint32_t>> neighbors;
  std::vector<std::vector<double>> weights;
};

NeighborGraph knn_graph(const Matrix& embeddings, int k);

// Per-example standardized cut statistic (lower = more confident) together
// with the pseudo-label it was computed from.
struct SelectionScore {
  std::vector<double> score;
  std::vector<int> pseudo_label;
};

// J_u = sum over neighbors of w * [labels differ]; standardized against the
// null hypothesis of i.i.d. pseudo-labels from their empirical marginal.
// Degenerate variance (own-label frequency 0 or 1) scores 0.
SelectionScore cut_statistic_scores(std::span<const int> pseudo_labels,
                                    const NeighborGraph& graph, int num_labels);

// Ascending sort by score (ties by index), first floor(coverage * U).
ConfidentSet select_confident_cs(const SelectionScore& scores, double coverage);

// Model-confidence selection with per-class floor: phase 1 takes the top
// floor(gamma * coverage * U) per predicted class (or all, if a class was
// predicted fewer times); phase 2 fills with the highest scores from the
// remainder up to ceil(coverage * U). Ties by ascending index.
ConfidentSet select_confident_mc(const Matrix& probabilities, double coverage,
                                 double class_floor);

}  // namespace cotrain
