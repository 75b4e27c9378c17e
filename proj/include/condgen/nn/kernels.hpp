#pragma once

#include <cstddef>

namespace condgen::nn {

/// Which implementation the dispatching kernels use. `reference` is a plain
/// serial loop nest kept as the testing baseline; `parallel` uses blocked
/// GEMM and OpenMP over rows.
enum class KernelMode { reference, parallel };

void set_kernel_mode(KernelMode mode);
KernelMode kernel_mode();

/// RAII switch for tests and benchmarks.
class ScopedKernelMode {
 public:
  explicit ScopedKernelMode(KernelMode mode) : saved_(kernel_mode()) { set_kernel_mode(mode); }
  ~ScopedKernelMode() { set_kernel_mode(saved_); }
  ScopedKernelMode(const ScopedKernelMode&) = delete;
  ScopedKernelMode& operator=(const ScopedKernelMode&) = delete;

 private:
  KernelMode saved_;
};

// All matrices are row-major with explicit leading dimensions; beta is 0 or 1.
//   gemm_nn: C = beta*C + A(m x k) * B(k x n)
//   gemm_tn: C = beta*C + A(k x m)^T * B(k x n)
//   gemm_nt: C = beta*C + A(m x k) * B(n x k)^T
//
// lstm_pointwise_forward: `gates` (n x 4H, order i f g o) holds
// pre-activations on entry and activations on exit; c = f*c_prev + i*g,
// h = o*tanh(c), tanh_c = tanh(c). c_prev may be null (zero state).
//
// lstm_pointwise_backward: dh/dc are gradients w.r.t. the cell outputs (dc
// may be null). Writes pre-activation gradients to dgates and adds the
// gradient w.r.t. c_prev into dc_prev when non-null.

namespace reference {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void lstm_pointwise_forward(std::size_t n, std::size_t hidden, double* gates, const double* c_prev, double* c,
                            double* h, double* tanh_c);
void lstm_pointwise_backward(std::size_t n, std::size_t hidden, const double* gates, const double* c_prev,
                             const double* tanh_c, const double* dh, const double* dc, double* dgates,
                             double* dc_prev);
}  // namespace reference

namespace parallel {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void lstm_pointwise_forward(std::size_t n, std::size_t hidden, double* gates, const double* c_prev, double* c,
                            double* h, double* tanh_c);
void lstm_pointwise_backward(std::size_t n, std::size_t hidden, const double* gates, const double* c_prev,
                             const double* tanh_c, const double* dh, const double* dc, double* dgates,
                             double* dc_prev);
}  // namespace parallel

// Dispatch on kernel_mode().
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc);
void lstm_pointwise_forward(std::size_t n, std::size_t hidden, double* gates, const double* c_prev, double* c,
                            double* h, double* tanh_c);
void lstm_pointwise_backward(std::size_t n, std::size_t hidden, const double* gates, const double* c_prev,
                             const double* tanh_c, const double* dh, const double* dc, double* dgates,
                             double* dc_prev);

}  // namespace condgen::nn
