#include "cotrain/kernels.hpp"

#include <atomic>
#include <cmath>

namespace cotrain::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void adamw_update(double* params, const double* grad, double* m, double* v,
                  std::size_t n, const AdamWStep& s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = m[i] / s.bias_corr1;
    const double v_hat = v[i] / s.bias_corr2;
    params[i] -= s.learning_rate *
                 (m_hat / (std::sqrt(v_hat) + s.epsilon) + s.weight_decay * params[i]);
  }
}

}  // namespace scalar

namespace {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*adamw_update)(double*, const double*, double*, double*, std::size_t,
                       const AdamWStep&);
};

constexpr KernelTable kScalarTable{scalar::dot, scalar::squared_distance, scalar::axpy,
                                   scalar::adamw_update};

#if COTRAIN_HAVE_AVX2
constexpr KernelTable kAvx2Table{avx2::dot, avx2::squared_distance, avx2::axpy,
                                 avx2::adamw_update};
#endif

bool cpu_has_avx2() {
#if COTRAIN_HAVE_AVX2
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<int> g_override{-1};  // -1 auto, else Backend value

Backend resolve_backend() {
  const int forced = g_override.load(std::memory_order_relaxed);
  if (forced == static_cast<int>(Backend::scalar)) return Backend::scalar;
  if (forced == static_cast<int>(Backend::avx2)) {
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

const KernelTable& table() {
#if COTRAIN_HAVE_AVX2
  if (resolve_backend() == Backend::avx2) return kAvx2Table;
#endif
  return kScalarTable;
}

}  // namespace

Backend active_backend() { return resolve_backend(); }

const char* backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(std::optional<Backend> backend) {
  g_override.store(backend ? static_cast<int>(*backend) : -1, std::memory_order_relaxed);
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }

double squared_distance(const double* a, const double* b, std::size_t n) {
  return table().squared_distance(a, b, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }

void adamw_update(double* params, const double* grad, double* m, double* v, std::size_t n,
                  const AdamWStep& step) {
  table().adamw_update(params, grad, m, v, n, step);
}

}  // namespace cotrain::kernels
