#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "cotrain/cotrain.hpp"
#include "cotrain/head.hpp"
#include "cotrain/label_model.hpp"
#include "cotrain/metrics.hpp"
#include "cotrain/rng.hpp"
#include "cotrain/synth.hpp"

using namespace cotrain;

namespace {

EmitterSpec basic_emitters(int k, int l, int V, double accuracy, double concentration,
                           std::uint64_t seed) {
  EmitterSpec spec;
  spec.num_prompts = k;
  spec.num_labels = l;
  spec.vocab_size = V;
  spec.accuracy.assign(static_cast<std::size_t>(k), accuracy);
  spec.bias.assign(static_cast<std::size_t>(k),
                   std::vector<double>(static_cast<std::size_t>(V), 1.0));
  spec.concentration = concentration;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("gen_labels: degenerate balance pins every label") {
  const std::vector<double> balance{1.0, 0.0};
  const auto labels = gen_labels(50, balance, 3);
  for (int y : labels) CHECK(y == 0);
}

TEST_CASE("gen_labels: law of large numbers at 10k draws") {
  const std::vector<double> balance{0.5, 0.5};
  const auto labels = gen_labels(10000, balance, 11);
  const double freq0 =
      static_cast<double>(std::count(labels.begin(), labels.end(), 0)) / 10000.0;
  CHECK(std::abs(freq0 - 0.5) < 0.02);
}

TEST_CASE("gen_labels: deterministic per seed") {
  const std::vector<double> balance{0.3, 0.3, 0.4};
  CHECK(gen_labels(100, balance, 5) == gen_labels(100, balance, 5));
  CHECK(gen_labels(100, balance, 5) != gen_labels(100, balance, 6));
}

TEST_CASE("gen_labels: invalid balance rejected") {
  CHECK_THROWS_AS(gen_labels(10, std::vector<double>{0.5, 0.4}, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_labels(10, std::vector<double>{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_labels(10, std::vector<double>{1.5, -0.5}, 1), std::invalid_argument);
}

TEST_CASE("emitter: infinite concentration gives exact one-hot emissions") {
  EmitterSpec spec =
      basic_emitters(2, 2, 3, 1.0, std::numeric_limits<double>::infinity(), 9);
  const auto labels = gen_labels(20, std::vector<double>{0.5, 0.5}, 9);
  const PromptViewDraw draw = gen_prompt_view(labels, spec);
  for (std::size_t e = 0; e < 20; ++e) {
    for (std::size_t p = 0; p < 2; ++p) {
      const auto s = draw.tensor.slice(e, p);
      // accuracy 1: the point mass sits exactly on the gold token
      CHECK(s[static_cast<std::size_t>(labels[e])] == 1.0);
      for (std::size_t j = 0; j < 3; ++j) {
        if (j != static_cast<std::size_t>(labels[e])) CHECK(s[j] == 0.0);
      }
    }
  }
}

TEST_CASE("emitter: perfect accuracy with neutral bias preserves the gold argmax") {
  EmitterSpec spec = basic_emitters(3, 3, 4, 1.0, 4.0, 21);
  const auto labels = gen_labels(50, std::vector<double>{0.3, 0.3, 0.4}, 21);
  const PromptViewDraw draw = gen_prompt_view(labels, spec);
  for (std::size_t e = 0; e < 50; ++e) {
    for (std::size_t p = 0; p < 3; ++p) {
      const auto s = draw.tensor.slice(e, p);
      const auto it = std::max_element(s.begin(), s.end());
      CHECK(static_cast<int>(it - s.begin()) == labels[e]);
    }
  }
}

TEST_CASE("emitter: accuracy controls the argmax hit rate") {
  EmitterSpec spec = basic_emitters(1, 2, 2, 0.7, 50.0, 33);
  const auto labels = gen_labels(5000, std::vector<double>{0.5, 0.5}, 33);
  const PromptViewDraw draw = gen_prompt_view(labels, spec);
  std::size_t hits = 0;
  for (std::size_t e = 0; e < 5000; ++e) {
    const auto s = draw.tensor.slice(e, 0);
    if ((s[0] > s[1] ? 0 : 1) == labels[e]) ++hits;
  }
  const double rate = static_cast<double>(hits) / 5000.0;
  CHECK(std::abs(rate - 0.7) < 0.03);
}

TEST_CASE("emitter: content-free outputs are the normalized label-token bias") {
  EmitterSpec spec = basic_emitters(1, 2, 3, 0.9, 4.0, 1);
  spec.bias[0] = {2.0, 6.0, 1.0};
  const auto labels = gen_labels(5, std::vector<double>{0.5, 0.5}, 1);
  const PromptViewDraw draw = gen_prompt_view(labels, spec);
  REQUIRE(draw.content_free.size() == 1);
  REQUIRE(draw.content_free[0].size() == 1);
  const auto& cf = draw.content_free[0][0];
  CHECK(cf[0] == doctest::Approx(0.25).epsilon(1e-15));  // 2 / (2 + 6)
  CHECK(cf[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("cbu composition: calibrating an unbiased uniform emission is neutral") {
  // concentration 0 emits bias/sum(bias) for every example; after CBU the
  // pre-activation must be uniform (all ones when |V| = l).
  EmitterSpec spec = basic_emitters(2, 2, 2, 0.9, 0.0, 77);
  spec.bias[0] = {0.75, 0.25};
  spec.bias[1] = {1.5, 0.5};
  const auto labels = gen_labels(4, std::vector<double>{0.5, 0.5}, 77);
  const PromptViewDraw draw = gen_prompt_view(labels, spec);

  const LabelModelParams params = cbu_init(draw.content_free, 2, 2);

  // per prompt: relu(W_i phi_i) is the all-ones vector
  for (std::size_t p = 0; p < 2; ++p) {
    LabelModelParams solo;
    solo.num_prompts = 1;
    solo.num_labels = 2;
    solo.vocab_size = 2;
    solo.W.push_back(params.W[p]);
    solo.alpha.push_back(1.0);
    PromptViewTensor one = draw.tensor;
    one.num_prompts = 1;
    one.values.clear();
    for (std::size_t e = 0; e < 4; ++e) {
      const auto s = draw.tensor.slice(e, p);
      one.values.insert(one.values.end(), s.begin(), s.end());
    }
    std::vector<double> pre(2);
    for (std::size_t e = 0; e < 4; ++e) {
      label_model_preactivation(solo, one, e, pre);
      CHECK(pre[0] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(pre[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  // the ensemble therefore pre-activates to exactly k on every coordinate
  std::vector<double> pre(2);
  for (std::size_t e = 0; e < 4; ++e) {
    label_model_preactivation(params, draw.tensor, e, pre);
    CHECK(pre[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(pre[1] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("skewed bias: CBU beats uncalibrated uniform averaging") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng bias_rng = Rng::stream(seed, {0xb1a5ULL});
    EmitterSpec spec = basic_emitters(4, 3, 3, 0.7, 1.0, seed);
    const double lo = std::log(0.25), hi = std::log(4.0);
    for (auto& b : spec.bias) {
      for (double& v : b) v = std::exp(lo + (hi - lo) * bias_rng.next_double());
    }
    const auto labels = gen_labels(2000, std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, seed);
    const PromptViewDraw draw = gen_prompt_view(labels, spec);

    // uncalibrated uniform averaging over the label tokens
    std::size_t avg_hits = 0;
    for (std::size_t e = 0; e < labels.size(); ++e) {
      std::vector<double> mean(3, 0.0);
      for (std::size_t p = 0; p < 4; ++p) {
        const auto s = draw.tensor.slice(e, p);
        for (std::size_t j = 0; j < 3; ++j) mean[j] += s[j];
      }
      const int pred = static_cast<int>(std::max_element(mean.begin(), mean.end()) -
                                        mean.begin());
      if (pred == labels[e]) ++avg_hits;
    }

    const LabelModelParams params = cbu_init(draw.content_free, 3, 3);
    const Matrix probs = label_model_predict(params, draw.tensor);
    const std::vector<int> pred = argmax_rows(probs);
    const double cbu_acc = accuracy(pred, labels);
    const double avg_acc = static_cast<double>(avg_hits) / static_cast<double>(labels.size());
    if (cbu_acc > avg_acc) ++wins;
  }
  CHECK(wins >= 4);
}

TEST_CASE("blobs: zero noise collapses each class to its mean") {
  BlobSpec spec{2, 3, 5.0, 0.0, 4};
  const std::vector<int> labels{0, 0, 1, 1, 1};
  const Matrix m = gen_blob_view(labels, spec);
  CHECK(m.row(0)[0] == 5.0);
  CHECK(m.row(0)[1] == 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(m(0, j) == m(1, j));
    CHECK(m(2, j) == m(3, j));
    CHECK(m(3, j) == m(4, j));
  }
}

TEST_CASE("blobs: zero separation carries no label signal") {
  double acc_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    BlobSpec spec{2, 4, 0.0, 1.0, seed};
    const auto labels = gen_labels(2000, std::vector<double>{0.5, 0.5}, seed + 100);
    const Matrix x = gen_blob_view(labels, spec);

    // train on the first half with gold labels, test on the second half
    ConfidentSet train;
    for (std::size_t e = 0; e < 1000; ++e) train.entries.push_back({e, labels[e]});
    Matrix x_train(1000, 4), x_test(1000, 4);
    std::vector<int> y_test(1000);
    for (std::size_t e = 0; e < 1000; ++e) {
      std::copy(x.row(e).begin(), x.row(e).end(), x_train.row(e).begin());
      std::copy(x.row(e + 1000).begin(), x.row(e + 1000).end(), x_test.row(e).begin());
      y_test[e] = labels[e + 1000];
    }
    TrainConfig cfg{0.05, 0.0, 64, 10, seed};
    const HeadTrainResult r =
        train_head({HeadArch::linear, 0}, x_train, train, train, x_train, 2, cfg);
    acc_sum += accuracy(argmax_rows(predict_proba(r.model, x_test)), y_test);
  }
  CHECK(std::abs(acc_sum / 3.0 - 0.5) < 0.05);  // max prior for a balanced draw
}

TEST_CASE("blobs: high separation is trivially learnable from 50 labels") {
  BlobSpec spec{2, 4, 6.0, 1.0, 12};
  const auto labels = gen_labels(550, std::vector<double>{0.5, 0.5}, 12);
  const Matrix x = gen_blob_view(labels, spec);

  ConfidentSet train;
  for (std::size_t e = 0; e < 50; ++e) train.entries.push_back({e, labels[e]});
  TrainConfig cfg{0.05, 0.0, 16, 20, 5};
  const HeadTrainResult r = train_head({HeadArch::linear, 0}, x, train, train, x, 2, cfg);

  Matrix x_test(500, 4);
  std::vector<int> y_test(500);
  for (std::size_t e = 0; e < 500; ++e) {
    std::copy(x.row(e + 50).begin(), x.row(e + 50).end(), x_test.row(e).begin());
    y_test[e] = labels[e + 50];
  }
  CHECK(accuracy(argmax_rows(predict_proba(r.model, x_test)), y_test) >= 0.99);
}

TEST_CASE("view draws are independent given the labels") {
  const auto labels = gen_labels(100, std::vector<double>{0.5, 0.5}, 42);
  EmitterSpec e1 = basic_emitters(2, 2, 2, 0.8, 4.0, 42);
  const PromptViewDraw d1 = gen_prompt_view(labels, e1);
  const PromptViewDraw d2 = gen_prompt_view(labels, e1);
  CHECK(d1.tensor.values == d2.tensor.values);  // deterministic

  // the blob stream does not perturb the prompt stream even at equal seeds
  BlobSpec b{2, 2, 3.0, 1.0, 42};
  const Matrix m1 = gen_blob_view(labels, b);
  const PromptViewDraw d3 = gen_prompt_view(labels, e1);
  CHECK(d1.tensor.values == d3.tensor.values);
  const Matrix m2 = gen_blob_view(labels, b);
  CHECK(m1 == m2);
}

TEST_CASE("spec validation errors") {
  EmitterSpec bad = basic_emitters(1, 2, 2, 0.5, 4.0, 1);  // accuracy at chance
  const auto labels = gen_labels(5, std::vector<double>{0.5, 0.5}, 1);
  CHECK_THROWS_AS(gen_prompt_view(labels, bad), std::invalid_argument);

  EmitterSpec neg_bias = basic_emitters(1, 2, 2, 0.8, 4.0, 1);
  neg_bias.bias[0][0] = 0.0;
  CHECK_THROWS_AS(gen_prompt_view(labels, neg_bias), std::invalid_argument);

  BlobSpec bad_blob{2, 1, 3.0, 1.0, 0};  // dim < num_labels
  CHECK_THROWS_AS(gen_blob_view(labels, bad_blob), std::invalid_argument);
}
