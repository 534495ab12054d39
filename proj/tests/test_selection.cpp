#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"

#include "cotrain/rng.hpp"
#include "cotrain/selection.hpp"

using namespace cotrain;

namespace {

Matrix points_1d(const std::vector<double>& xs) {
  Matrix m(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) m(i, 0) = xs[i];
  return m;
}

// Fully independent re-implementation of the J / mu / sigma^2 / s pipeline:
// naive pairwise distances, plain sorting, textbook formulas.
std::vector<double> brute_force_cut_scores(const Matrix& emb, const std::vector<int>& labels,
                                           int num_labels, int k) {
  const std::size_t U = emb.rows();
  std::vector<double> freq(static_cast<std::size_t>(num_labels), 0.0);
  for (int y : labels) freq[static_cast<std::size_t>(y)] += 1.0 / static_cast<double>(U);

  std::vector<double> scores(U);
  for (std::size_t u = 0; u < U; ++u) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t v = 0; v < U; ++v) {
      if (v == u) continue;
      double d2 = 0.0;
      for (std::size_t j = 0; j < emb.cols(); ++j) {
        d2 += (emb(u, j) - emb(v, j)) * (emb(u, j) - emb(v, j));
      }
      dist.push_back({std::sqrt(d2), v});
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());

    double cut = 0.0, w_sum = 0.0, w2_sum = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
      const double w = 1.0 / (1.0 + dist[i].first);
      w_sum += w;
      w2_sum += w * w;
      if (labels[dist[i].second] != labels[u]) cut += w;
    }
    const double p = freq[static_cast<std::size_t>(labels[u])];
    const double mean = (1.0 - p) * w_sum;
    const double var = p * (1.0 - p) * w2_sum;
    scores[u] = var > 0.0 ? (cut - mean) / std::sqrt(var) : 0.0;
  }
  return scores;
}

}  // namespace

TEST_CASE("knn: three collinear points, K=1") {
  const NeighborGraph g = knn_graph(points_1d({0.0, 1.0, 10.0}), 1);
  REQUIRE(g.neighbors.size() == 3);
  CHECK(g.neighbors[0] == std::vector<std::uint32_t>{1});
  CHECK(g.neighbors[1] == std::vector<std::uint32_t>{0});
  CHECK(g.neighbors[2] == std::vector<std::uint32_t>{1});
  CHECK(g.weights[0][0] == doctest::Approx(0.5).epsilon(1e-15));  // 1/(1+1)
}

TEST_CASE("knn: identical points get weight exactly 1") {
  const NeighborGraph g = knn_graph(points_1d({2.5, 2.5}), 1);
  CHECK(g.weights[0][0] == 1.0);
  CHECK(g.weights[1][0] == 1.0);
}

TEST_CASE("knn: K at or above U-1 saturates to all other vertices") {
  const NeighborGraph g = knn_graph(points_1d({0.0, 1.0, 2.0, 5.0}), 10);
  for (std::size_t u = 0; u < 4; ++u) {
    CHECK(g.neighbors[u].size() == 3);
    std::set<std::uint32_t> n(g.neighbors[u].begin(), g.neighbors[u].end());
    CHECK(n.size() == 3);
    CHECK(n.count(static_cast<std::uint32_t>(u)) == 0);  // self excluded
  }
}

TEST_CASE("knn: distance ties break by ascending index") {
  // points at -1 and +1 are equidistant from 0
  const NeighborGraph g = knn_graph(points_1d({0.0, -1.0, 1.0}), 1);
  CHECK(g.neighbors[0] == std::vector<std::uint32_t>{1});
}

TEST_CASE("knn: fewer than two examples is an error") {
  CHECK_THROWS_AS(knn_graph(points_1d({1.0}), 1), std::invalid_argument);
  CHECK_THROWS_AS(knn_graph(points_1d({1.0, 2.0}), 0), std::invalid_argument);
}

TEST_CASE("cut statistic: single shared pseudo-label scores zero everywhere") {
  const NeighborGraph g = knn_graph(points_1d({0.0, 1.0, 2.0}), 1);
  const SelectionScore s = cut_statistic_scores(std::vector<int>{1, 1, 1}, g, 2);
  for (double v : s.score) CHECK(v == 0.0);
}

TEST_CASE("cut statistic: two clean clusters, hand-evaluated") {
  // points (0, 1, 10, 11), labels (0, 0, 1, 1), K=1: all neighbors share
  // labels, w = 1/2, P_hat = 1/2 for both labels, so
  // J = 0, mu = 1/4, sigma = 1/4, s = -1 for every vertex.
  const NeighborGraph g = knn_graph(points_1d({0.0, 1.0, 10.0, 11.0}), 1);
  const SelectionScore s = cut_statistic_scores(std::vector<int>{0, 0, 1, 1}, g, 2);
  for (double v : s.score) CHECK(v == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cut statistic: flipping a label inside a tight cluster raises its score") {
  Rng rng(17);
  Matrix emb(20, 2);
  std::vector<int> labels(20);
  for (std::size_t e = 0; e < 20; ++e) {
    const int c = static_cast<int>(e % 2);
    labels[e] = c;
    emb(e, 0) = (c == 0 ? 0.0 : 20.0) + 0.1 * rng.normal();
    emb(e, 1) = 0.1 * rng.normal();
  }
  const NeighborGraph g = knn_graph(emb, 3);
  const double before = cut_statistic_scores(labels, g, 2).score[4];
  labels[4] = 1 - labels[4];
  const double after = cut_statistic_scores(labels, g, 2).score[4];
  CHECK(after > before);
}

TEST_CASE("cut statistic matches the brute-force oracle on random instances") {
  Rng rng(2023);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t U = 2 + rng.next_below(49);
    const int l = 2 + static_cast<int>(rng.next_below(3));
    const int k = 1 + static_cast<int>(rng.next_below(5));
    const std::size_t dim = 1 + rng.next_below(4);

    Matrix emb(U, dim);
    for (double& v : emb.values()) v = 10.0 * (rng.next_double() - 0.5);
    std::vector<int> labels(U);
    for (int& y : labels) y = static_cast<int>(rng.next_below(l));

    const NeighborGraph g = knn_graph(emb, k);
    const SelectionScore got = cut_statistic_scores(labels, g, l);
    const std::vector<double> expected = brute_force_cut_scores(emb, labels, l, k);
    for (std::size_t u = 0; u < U; ++u) {
      CHECK(std::abs(got.score[u] - expected[u]) <= 1e-9);
    }
  }
}

TEST_CASE("cs selection: full coverage selects everything") {
  SelectionScore s;
  s.score = {0.3, -0.2, 1.5, 0.0};
  s.pseudo_label = {0, 1, 0, 1};
  const ConfidentSet set = select_confident_cs(s, 1.0);
  CHECK(set.size() == 4);
}

TEST_CASE("cs selection: lowest scores win") {
  SelectionScore s;
  s.score = {9, 1, 8, 2, 7, 3, 6, 4, 5, 0};
  s.pseudo_label.assign(10, 0);
  const ConfidentSet set = select_confident_cs(s, 0.5);
  std::set<std::size_t> got;
  for (const auto& e : set.entries) got.insert(e.index);
  CHECK(got == std::set<std::size_t>{9, 1, 3, 5, 7});
}

TEST_CASE("cs selection: empty result is an error") {
  SelectionScore s;
  s.score = {0.1, 0.2};
  s.pseudo_label = {0, 1};
  CHECK_THROWS_AS(select_confident_cs(s, 0.4), std::invalid_argument);  // floor(0.8) = 0
  CHECK_THROWS_AS(select_confident_cs(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(select_confident_cs(s, 1.5), std::invalid_argument);
}

TEST_CASE("cs selection: coverage monotonicity (subset property)") {
  Rng rng(5);
  SelectionScore s;
  for (int i = 0; i < 37; ++i) {
    s.score.push_back(rng.next_double());
    s.pseudo_label.push_back(static_cast<int>(rng.next_below(3)));
  }
  std::set<std::size_t> previous;
  for (double coverage : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    const ConfidentSet set = select_confident_cs(s, coverage);
    CHECK(set.size() == static_cast<std::size_t>(std::floor(coverage * 37)));
    std::set<std::size_t> current;
    for (const auto& e : set.entries) current.insert(e.index);
    CHECK(std::includes(current.begin(), current.end(), previous.begin(), previous.end()));
    previous = std::move(current);
  }
}

TEST_CASE("mc selection: gamma 0 is a pure top-confidence cut") {
  Rng rng(6);
  Matrix probs(10, 2);
  for (std::size_t e = 0; e < 10; ++e) {
    const double p = 0.5 + 0.05 * static_cast<double>(e);
    probs(e, 0) = p;
    probs(e, 1) = 1.0 - p;
  }
  const ConfidentSet set = select_confident_mc(probs, 0.5, 0.0);
  // ceil(5) = 5 most confident = the last five rows
  std::set<std::size_t> got;
  for (const auto& e : set.entries) got.insert(e.index);
  CHECK(got == std::set<std::size_t>{5, 6, 7, 8, 9});
}

TEST_CASE("mc selection: spec size arithmetic at gamma 0.01") {
  Rng rng(8);
  Matrix probs(100, 2);
  for (std::size_t e = 0; e < 100; ++e) {
    const double p = 0.4 + 0.005 * static_cast<double>(e);
    probs(e, 0) = p;
    probs(e, 1) = 1.0 - p;
  }
  // ms = floor(0.01 * 0.5 * 100) = 0, so phase 1 selects nothing;
  // total = ceil(50) = 50
  const ConfidentSet set = select_confident_mc(probs, 0.5, 0.01);
  CHECK(set.size() == 50);
}

TEST_CASE("mc selection: class floor rescues a rare low-confidence class") {
  // U=200, coverage 0.5, gamma 0.05, l=2: ms = 5. Class 1 is predicted only
  // 3 times, all with low confidence; phase 1 must still take all 3.
  Matrix probs(200, 2);
  for (std::size_t e = 0; e < 200; ++e) {
    if (e < 3) {
      probs(e, 1) = 0.51;  // weakly predicted class 1
      probs(e, 0) = 0.49;
    } else {
      probs(e, 0) = 0.6 + 0.3 * static_cast<double>(e) / 200.0;
      probs(e, 1) = 1.0 - probs(e, 0);
    }
  }
  const ConfidentSet set = select_confident_mc(probs, 0.5, 0.05);
  CHECK(set.size() == 100);
  std::size_t class1 = 0;
  bool has_all_three = true;
  std::set<std::size_t> got;
  for (const auto& e : set.entries) got.insert(e.index);
  for (std::size_t e = 0; e < 3; ++e) has_all_three = has_all_three && got.count(e);
  for (const auto& e : set.entries) {
    if (e.pseudo_label == 1) ++class1;
  }
  CHECK(has_all_three);
  CHECK(class1 == 3);
}

TEST_CASE("mc selection: exact cardinality and per-class floor across a grid") {
  Rng rng(99);
  for (std::size_t U : {3u, 10u, 17u, 50u, 101u}) {
    for (double coverage : {0.1, 0.33, 0.5, 0.77, 1.0}) {
      for (int l : {2, 3, 4}) {
        for (double gamma : {0.0, 0.01, 0.05, 1.0 / l}) {
          Matrix probs(U, static_cast<std::size_t>(l));
          for (std::size_t e = 0; e < U; ++e) {
            double sum = 0.0;
            for (int c = 0; c < l; ++c) {
              probs(e, static_cast<std::size_t>(c)) = 0.05 + rng.next_double();
              sum += probs(e, static_cast<std::size_t>(c));
            }
            for (int c = 0; c < l; ++c) probs(e, static_cast<std::size_t>(c)) /= sum;
          }
          const ConfidentSet set = select_confident_mc(probs, coverage, gamma);
          const std::size_t expected =
              static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(U)));
          CHECK(set.size() == expected);

          // per-class floor
          const std::size_t ms = static_cast<std::size_t>(
              std::floor(gamma * coverage * static_cast<double>(U)));
          std::vector<std::size_t> predicted(static_cast<std::size_t>(l), 0),
              selected(static_cast<std::size_t>(l), 0);
          for (std::size_t e = 0; e < U; ++e) {
            const auto row = probs.row(e);
            const int y = static_cast<int>(std::max_element(row.begin(), row.end()) -
                                           row.begin());
            ++predicted[static_cast<std::size_t>(y)];
          }
          for (const auto& e : set.entries) ++selected[static_cast<std::size_t>(e.pseudo_label)];
          for (int c = 0; c < l; ++c) {
            if (predicted[static_cast<std::size_t>(c)] >= ms) {
              CHECK(selected[static_cast<std::size_t>(c)] >= ms);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("mc selection: invalid floor rejected") {
  Matrix probs(4, 2, 0.5);
  CHECK_THROWS_AS(select_confident_mc(probs, 0.5, 0.6), std::invalid_argument);  // l*gamma > 1
  CHECK_THROWS_AS(select_confident_mc(probs, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("selectors are permutation-equivariant for distinct scores") {
  Rng rng(123);
  const std::size_t U = 31;
  SelectionScore s;
  for (std::size_t i = 0; i < U; ++i) {
    s.score.push_back(rng.next_double());
    s.pseudo_label.push_back(static_cast<int>(rng.next_below(2)));
  }
  const ConfidentSet base = select_confident_cs(s, 0.4);

  std::vector<std::size_t> perm(U);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  SelectionScore permuted;
  permuted.score.resize(U);
  permuted.pseudo_label.resize(U);
  for (std::size_t i = 0; i < U; ++i) {
    permuted.score[perm[i]] = s.score[i];
    permuted.pseudo_label[perm[i]] = s.pseudo_label[i];
  }
  const ConfidentSet moved = select_confident_cs(permuted, 0.4);

  std::set<std::size_t> expect, got;
  for (const auto& e : base.entries) expect.insert(perm[e.index]);
  for (const auto& e : moved.entries) got.insert(e.index);
  CHECK(expect == got);

  // same property for the model-confidence selector
  Matrix probs(U, 2);
  for (std::size_t e = 0; e < U; ++e) {
    probs(e, 0) = rng.next_double();
    probs(e, 1) = 1.0 - probs(e, 0);
  }
  const ConfidentSet mc_base = select_confident_mc(probs, 0.4, 0.05);
  Matrix probs_moved(U, 2);
  for (std::size_t e = 0; e < U; ++e) {
    probs_moved(perm[e], 0) = probs(e, 0);
    probs_moved(perm[e], 1) = probs(e, 1);
  }
  const ConfidentSet mc_moved = select_confident_mc(probs_moved, 0.4, 0.05);
  std::set<std::size_t> mc_expect, mc_got;
  for (const auto& e : mc_base.entries) mc_expect.insert(perm[e.index]);
  for (const auto& e : mc_moved.entries) mc_got.insert(e.index);
  CHECK(mc_expect == mc_got);
}

TEST_CASE("cut-statistic selection concentrates correct pseudo-labels") {
  // planted clusters with 10% flipped labels: the selected half must be
  // cleaner than the full set on every tested seed majority
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const std::size_t U = 200;
    Matrix emb(U, 2);
    std::vector<int> gold(U), pseudo(U);
    for (std::size_t e = 0; e < U; ++e) {
      const int c = static_cast<int>(e % 2);
      gold[e] = c;
      emb(e, 0) = (c == 0 ? 0.0 : 6.0) + rng.normal();
      emb(e, 1) = rng.normal();
    }
    pseudo = gold;
    for (std::size_t e = 0; e < U / 10; ++e) {
      const std::size_t i = rng.next_below(U);
      pseudo[i] = 1 - pseudo[i];
    }
    const NeighborGraph g = knn_graph(emb, 10);
    const SelectionScore scores = cut_statistic_scores(pseudo, g, 2);
    const ConfidentSet set = select_confident_cs(scores, 0.5);

    std::size_t full_correct = 0, sel_correct = 0;
    for (std::size_t e = 0; e < U; ++e) {
      if (pseudo[e] == gold[e]) ++full_correct;
    }
    for (const auto& e : set.entries) {
      if (e.pseudo_label == gold[e.index]) ++sel_correct;
    }
    const double full_acc = static_cast<double>(full_correct) / static_cast<double>(U);
    const double sel_acc = static_cast<double>(sel_correct) / static_cast<double>(set.size());
    if (sel_acc > full_acc) ++wins;
  }
  CHECK(wins >= 4);
}
