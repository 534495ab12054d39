#include <immintrin.h>

#include <cmath>

#include "cotrain/kernels.hpp"

// AVX2/FMA variants. Four doubles per lane, remainder handled by the scalar
// tail so any length is valid.
namespace cotrain::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void adamw_update(double* params, const double* grad, double* m, double* v, std::size_t n,
                  const AdamWStep& s) {
  const __m256d beta1 = _mm256_set1_pd(s.beta1);
  const __m256d beta2 = _mm256_set1_pd(s.beta2);
  const __m256d one_minus_beta1 = _mm256_set1_pd(1.0 - s.beta1);
  const __m256d one_minus_beta2 = _mm256_set1_pd(1.0 - s.beta2);
  const __m256d bc1 = _mm256_set1_pd(s.bias_corr1);
  const __m256d bc2 = _mm256_set1_pd(s.bias_corr2);
  const __m256d eps = _mm256_set1_pd(s.epsilon);
  const __m256d lr = _mm256_set1_pd(s.learning_rate);
  const __m256d wd = _mm256_set1_pd(s.weight_decay);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d mi = _mm256_loadu_pd(m + i);
    __m256d vi = _mm256_loadu_pd(v + i);
    mi = _mm256_fmadd_pd(beta1, mi, _mm256_mul_pd(one_minus_beta1, g));
    vi = _mm256_fmadd_pd(beta2, vi, _mm256_mul_pd(one_minus_beta2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps);
    __m256d p = _mm256_loadu_pd(params + i);
    const __m256d update =
        _mm256_fmadd_pd(wd, p, _mm256_div_pd(m_hat, denom));
    p = _mm256_fnmadd_pd(lr, update, p);
    _mm256_storeu_pd(params + i, p);
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = m[i] / s.bias_corr1;
    const double v_hat = v[i] / s.bias_corr2;
    params[i] -= s.learning_rate *
                 (m_hat / (std::sqrt(v_hat) + s.epsilon) + s.weight_decay * params[i]);
  }
}

}  // namespace cotrain::kernels::avx2
