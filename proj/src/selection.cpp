#include "cotrain/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cotrain/kernels.hpp"

namespace cotrain {

NeighborGraph knn_graph(const Matrix& embeddings, int k) {
  const std::size_t U = embeddings.rows();
  if (U < 2) throw std::invalid_argument("knn: need at least 2 examples");
  if (k < 1) throw std::invalid_argument("knn: K must be >= 1");

  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), U - 1);
  NeighborGraph graph;
  graph.num_examples = U;
  graph.k = k;
  graph.neighbors.resize(U);
  graph.weights.resize(U);

  std::vector<std::pair<double, std::uint32_t>> candidates(U - 1);
  for (std::size_t u = 0; u < U; ++u) {
    const auto xu = embeddings.row(u);
    std::size_t n = 0;
    for (std::size_t v = 0; v < U; ++v) {
      if (v == u) continue;
      candidates[n++] = {kernels::squared_distance(xu.data(), embeddings.row(v).data(),
                                                   xu.size()),
                         static_cast<std::uint32_t>(v)};
    }
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end());
    graph.neighbors[u].reserve(keep);
    graph.weights[u].reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      graph.neighbors[u].push_back(candidates[i].second);
      graph.weights[u].push_back(1.0 / (1.0 + std::sqrt(candidates[i].first)));
    }
  }
  return graph;
}

SelectionScore cut_statistic_scores(std::span<const int> pseudo_labels,
                                    const NeighborGraph& graph, int num_labels) {
  const std::size_t U = pseudo_labels.size();
  if (graph.num_examples != U) {
    throw std::invalid_argument("cut statistic: graph does not cover all examples");
  }
  std::vector<double> marginal(num_labels, 0.0);
  for (int y : pseudo_labels) {
    if (y < 0 || y >= num_labels) {
      throw std::invalid_argument("cut statistic: pseudo-label out of range");
    }
    marginal[y] += 1.0;
  }
  for (double& p : marginal) p /= static_cast<double>(U);

  SelectionScore out;
  out.score.resize(U);
  out.pseudo_label.assign(pseudo_labels.begin(), pseudo_labels.end());
  for (std::size_t u = 0; u < U; ++u) {
    const int yu = pseudo_labels[u];
    const double p = marginal[yu];
    double cut = 0.0, w_sum = 0.0, w2_sum = 0.0;
    const auto& nbrs = graph.neighbors[u];
    const auto& ws = graph.weights[u];
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const double w = ws[i];
      w_sum += w;
      w2_sum += w * w;
      if (pseudo_labels[nbrs[i]] != yu) cut += w;
    }
    const double mean = (1.0 - p) * w_sum;
    const double var = p * (1.0 - p) * w2_sum;
    // var == 0 only when p is 0 or 1; all such examples are equally
    // uninformative, so they land mid-ranking at 0.
    out.score[u] = var > 0.0 ? (cut - mean) / std::sqrt(var) : 0.0;
  }
  return out;
}

ConfidentSet select_confident_cs(const SelectionScore& scores, double coverage) {
  const std::size_t U = scores.score.size();
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw std::invalid_argument("cs selection: coverage must be in (0,1]");
  }
  const std::size_t n_select =
      static_cast<std::size_t>(std::floor(coverage * static_cast<double>(U)));
  if (n_select == 0) {
    throw std::invalid_argument("cs selection: empty result at requested coverage");
  }

  std::vector<std::size_t> order(U);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.score[a] != scores.score[b]) return scores.score[a] < scores.score[b];
    return a < b;
  });

  ConfidentSet set;
  set.entries.reserve(n_select);
  for (std::size_t i = 0; i < n_select; ++i) {
    set.entries.push_back({order[i], scores.pseudo_label[order[i]]});
  }
  return set;
}

ConfidentSet select_confident_mc(const Matrix& probabilities, double coverage,
                                 double class_floor) {
  const std::size_t U = probabilities.rows();
  const int l = static_cast<int>(probabilities.cols());
  if (U == 0 || l < 2) throw std::invalid_argument("mc selection: invalid probability matrix");
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw std::invalid_argument("mc selection: coverage must be in (0,1]");
  }
  if (class_floor < 0.0 || class_floor * l > 1.0) {
    throw std::invalid_argument("mc selection: class floor must be in [0, 1/l]");
  }

  std::vector<int> pseudo(U);
  std::vector<double> conf(U);
  for (std::size_t e = 0; e < U; ++e) {
    const auto row = probabilities.row(e);
    const auto it = std::max_element(row.begin(), row.end());
    pseudo[e] = static_cast<int>(it - row.begin());
    conf[e] = *it;
  }

  const std::size_t total =
      static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(U)));
  const std::size_t per_class = static_cast<std::size_t>(
      std::floor(class_floor * coverage * static_cast<double>(U)));

  const auto by_conf_desc = [&](std::size_t a, std::size_t b) {
    if (conf[a] != conf[b]) return conf[a] > conf[b];
    return a < b;
  };

  std::vector<char> selected(U, 0);
  std::size_t num_selected = 0;
  if (per_class > 0) {
    std::vector<std::vector<std::size_t>> by_class(l);
    for (std::size_t e = 0; e < U; ++e) by_class[pseudo[e]].push_back(e);
    for (int c = 0; c < l; ++c) {
      auto& members = by_class[c];
      std::sort(members.begin(), members.end(), by_conf_desc);
      const std::size_t take = std::min(per_class, members.size());
      for (std::size_t i = 0; i < take; ++i) {
        selected[members[i]] = 1;
        ++num_selected;
      }
    }
  }

  std::vector<std::size_t> rest;
  rest.reserve(U - num_selected);
  for (std::size_t e = 0; e < U; ++e) {
    if (!selected[e]) rest.push_back(e);
  }
  std::sort(rest.begin(), rest.end(), by_conf_desc);
  for (std::size_t i = 0; i < rest.size() && num_selected < total; ++i) {
    selected[rest[i]] = 1;
    ++num_selected;
  }

  ConfidentSet set;
  set.entries.reserve(num_selected);
  for (std::size_t e = 0; e < U; ++e) {
    if (selected[e]) set.entries.push_back({e, pseudo[e]});
  }
  return set;
}

}  // namespace cotrain
