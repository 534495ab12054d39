#pragma once

#include <cstddef>
#include <optional>

// Data-parallel inner loops shared by the hot paths: k-NN distances,
// model forward/backward passes, and the optimizer update. Each kernel has
// a scalar reference implementation and (on x86-64) an AVX2 variant chosen
// once at runtime. The two variants may differ by summation order only;
// tests bound the drift.
namespace cotrain::kernels {

enum class Backend { scalar, avx2 };

// Backend selected for this process (capability probe + override).
Backend active_backend();
const char* backend_name(Backend backend);

// Test hook: pin the backend, or pass nullopt to restore auto-detection.
// Requesting avx2 on a machine without it falls back to scalar.
void force_backend(std::optional<Backend> backend);

double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

struct AdamWStep {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double weight_decay;   // decoupled, applied as p -= lr * wd * p
  double bias_corr1;     // 1 - beta1^t
  double bias_corr2;     // 1 - beta2^t
};

// In-place moment update plus parameter step for one flat slab.
void adamw_update(double* params, const double* grad, double* m, double* v,
                  std::size_t n, const AdamWStep& step);

// Scalar reference implementations, always available (oracles for the
// dispatch equivalence tests).
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void adamw_update(double* params, const double* grad, double* m, double* v,
                  std::size_t n, const AdamWStep& step);
}  // namespace scalar

#if COTRAIN_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void adamw_update(double* params, const double* grad, double* m, double* v,
                  std::size_t n, const AdamWStep& step);
}  // namespace avx2
#endif

}  // namespace cotrain::kernels
