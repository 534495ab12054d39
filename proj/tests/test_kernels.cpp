#include <cmath>
#include <vector>

#include "doctest.h"

#include "cotrain/kernels.hpp"
#include "cotrain/rng.hpp"

using namespace cotrain;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 2.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (2.0 * rng.next_double() - 1.0);
  return v;
}

// sizes chosen to exercise full lanes, tails and the empty case
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 100, 1000};

}  // namespace

TEST_CASE("scalar dot and squared distance agree with plain loops") {
  Rng rng(42);
  for (std::size_t n : kSizes) {
    const auto a = random_vector(rng, n);
    const auto b = random_vector(rng, n);
    double dot = 0.0, dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dot += a[i] * b[i];
      dist += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(kernels::scalar::dot(a.data(), b.data(), n) == doctest::Approx(dot).epsilon(1e-14));
    CHECK(kernels::scalar::squared_distance(a.data(), b.data(), n) ==
          doctest::Approx(dist).epsilon(1e-14));
  }
}

TEST_CASE("dispatched kernels match the scalar reference") {
  // On machines without AVX2 this compares scalar against scalar, which is
  // still a valid (if vacuous) equivalence check.
  Rng rng(7);
  for (std::size_t n : kSizes) {
    const auto a = random_vector(rng, n);
    const auto b = random_vector(rng, n);

    const double dot_ref = kernels::scalar::dot(a.data(), b.data(), n);
    const double dot_got = kernels::dot(a.data(), b.data(), n);
    CHECK(std::abs(dot_got - dot_ref) <=
          1e-12 * std::max({1.0, std::abs(dot_ref), std::abs(dot_got)}));

    const double d_ref = kernels::scalar::squared_distance(a.data(), b.data(), n);
    const double d_got = kernels::squared_distance(a.data(), b.data(), n);
    CHECK(std::abs(d_got - d_ref) <= 1e-12 * std::max(1.0, d_ref));

    auto y_ref = random_vector(rng, n);
    auto y_got = y_ref;
    kernels::scalar::axpy(0.37, a.data(), y_ref.data(), n);
    kernels::axpy(0.37, a.data(), y_got.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(y_got[i] - y_ref[i]) <= 1e-13 * std::max(1.0, std::abs(y_ref[i])));
    }
  }
}

TEST_CASE("adamw update matches scalar reference across backends") {
  Rng rng(99);
  for (std::size_t n : {1u, 4u, 7u, 64u, 129u}) {
    auto p_ref = random_vector(rng, n);
    auto p_got = p_ref;
    auto g = random_vector(rng, n);
    std::vector<double> m_ref(n, 0.0), v_ref(n, 0.0), m_got(n, 0.0), v_got(n, 0.0);

    for (int step = 1; step <= 5; ++step) {
      const kernels::AdamWStep s{1e-2, 0.9,
                                 0.999, 1e-8,
                                 0.01,  1.0 - std::pow(0.9, step),
                                 1.0 - std::pow(0.999, step)};
      kernels::scalar::adamw_update(p_ref.data(), g.data(), m_ref.data(), v_ref.data(), n, s);
      kernels::adamw_update(p_got.data(), g.data(), m_got.data(), v_got.data(), n, s);
    }
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(p_got[i] - p_ref[i]) <= 1e-12 * std::max(1.0, std::abs(p_ref[i])));
    }
  }
}

TEST_CASE("forced scalar backend is honored") {
  kernels::force_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);

  Rng rng(5);
  const auto a = random_vector(rng, 37);
  const auto b = random_vector(rng, 37);
  // with the override the dispatched value must be bit-identical to scalar
  CHECK(kernels::dot(a.data(), b.data(), a.size()) ==
        kernels::scalar::dot(a.data(), b.data(), a.size()));
  kernels::force_backend(std::nullopt);
}

#if COTRAIN_HAVE_AVX2
TEST_CASE("avx2 variants agree with scalar on random data") {
  if (kernels::active_backend() != kernels::Backend::avx2) return;  // no AVX2 at runtime
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_below(300);
    const auto a = random_vector(rng, n, 5.0);
    const auto b = random_vector(rng, n, 5.0);
    const double ref = kernels::scalar::dot(a.data(), b.data(), n);
    const double got = kernels::avx2::dot(a.data(), b.data(), n);
    CHECK(std::abs(got - ref) <= 1e-11 * std::max(1.0, std::abs(ref)));

    const double dref = kernels::scalar::squared_distance(a.data(), b.data(), n);
    const double dgot = kernels::avx2::squared_distance(a.data(), b.data(), n);
    CHECK(std::abs(dgot - dref) <= 1e-11 * std::max(1.0, dref));
  }
}
#endif
