#define EIGEN_DONT_PARALLELIZE
#include "condgen/nn/kernels.hpp"

#include <Eigen/Core>
#include <atomic>
#include <cmath>

namespace condgen::nn {

namespace {

std::atomic<KernelMode> g_mode{KernelMode::parallel};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using View = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

ConstView cview(const double* p, std::size_t rows, std::size_t cols, std::size_t ld) {
  return ConstView(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                   Eigen::OuterStride<>(static_cast<Eigen::Index>(ld)));
}
View view(double* p, std::size_t rows, std::size_t cols, std::size_t ld) {
  return View(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
              Eigen::OuterStride<>(static_cast<Eigen::Index>(ld)));
}

// Element count below which the pointwise kernels stay serial.
constexpr std::size_t kParallelMinElements = 1 << 14;

inline void pointwise_forward_row(std::size_t hd, double* g, const double* cp, double* c, double* h, double* tc) {
  for (std::size_t j = 0; j < hd; ++j) {
    const double i = sigmoid(g[j]);
    const double f = sigmoid(g[hd + j]);
    const double gg = std::tanh(g[2 * hd + j]);
    const double o = sigmoid(g[3 * hd + j]);
    g[j] = i;
    g[hd + j] = f;
    g[2 * hd + j] = gg;
    g[3 * hd + j] = o;
    const double cv = f * (cp ? cp[j] : 0.0) + i * gg;
    const double t = std::tanh(cv);
    c[j] = cv;
    tc[j] = t;
    h[j] = o * t;
  }
}

// SIMD variant: logistic via Eigen's vectorized exp, tanh(x) = 2*logistic(2x) - 1.
// Works on owned (aligned) buffers: on unaligned maps Eigen peels a
// heap-address-dependent number of leading elements onto the scalar path,
// whose logistic differs in the last bits, and runs stop being reproducible.
inline void vector_forward_row(std::size_t hd, double* g, const double* cp, double* c, double* h, double* tc) {
  thread_local Eigen::ArrayXd gates, prev, cell;
  const auto len = static_cast<Eigen::Index>(hd);
  gates = Eigen::Map<const Eigen::ArrayXd>(g, 4 * len);
  auto i = gates.segment(0, len), f = gates.segment(len, len), gg = gates.segment(2 * len, len),
       o = gates.segment(3 * len, len);
  i = i.logistic();
  f = f.logistic();
  gg = 2.0 * (2.0 * gg).logistic() - 1.0;
  o = o.logistic();
  if (cp) {
    prev = Eigen::Map<const Eigen::ArrayXd>(cp, len);
    cell = f * prev + i * gg;
  } else {
    cell = i * gg;
  }
  Eigen::Map<Eigen::ArrayXd>(g, 4 * len) = gates;
  Eigen::Map<Eigen::ArrayXd>(c, len) = cell;
  cell = 2.0 * (2.0 * cell).logistic() - 1.0;
  Eigen::Map<Eigen::ArrayXd>(tc, len) = cell;
  Eigen::Map<Eigen::ArrayXd>(h, len) = gates.segment(3 * len, len) * cell;
}

inline void pointwise_backward_row(std::size_t hd, const double* g, const double* cp, const double* tc,
                                   const double* dh, const double* dc, double* dg, double* dcp) {
  for (std::size_t j = 0; j < hd; ++j) {
    const double i = g[j], f = g[hd + j], gg = g[2 * hd + j], o = g[3 * hd + j];
    const double t = tc[j];
    const double dct = (dc ? dc[j] : 0.0) + dh[j] * o * (1.0 - t * t);
    const double prev = cp ? cp[j] : 0.0;
    dg[j] = dct * gg * i * (1.0 - i);
    dg[hd + j] = dct * prev * f * (1.0 - f);
    dg[2 * hd + j] = dct * i * (1.0 - gg * gg);
    dg[3 * hd + j] = dh[j] * t * o * (1.0 - o);
    if (dcp) dcp[j] += dct * f;
  }
}

}  // namespace

void set_kernel_mode(KernelMode mode) { g_mode.store(mode); }
KernelMode kernel_mode() { return g_mode.load(); }

namespace reference {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = (beta == 0.0 ? 0.0 : c[i * ldc + j]) + s;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[p * lda + i] * b[p * ldb + j];
      c[i * ldc + j] = (beta == 0.0 ? 0.0 : c[i * ldc + j]) + s;
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[j * ldb + p];
      c[i * ldc + j] = (beta == 0.0 ? 0.0 : c[i * ldc + j]) + s;
    }
}

void lstm_pointwise_forward(std::size_t n, std::size_t hidden, double* gates, const double* c_prev, double* c,
                            double* h, double* tanh_c) {
  for (std::size_t r = 0; r < n; ++r)
    pointwise_forward_row(hidden, gates + r * 4 * hidden, c_prev ? c_prev + r * hidden : nullptr, c + r * hidden,
                          h + r * hidden, tanh_c + r * hidden);
}

void lstm_pointwise_backward(std::size_t n, std::size_t hidden, const double* gates, const double* c_prev,
                             const double* tanh_c, const double* dh, const double* dc, double* dgates,
                             double* dc_prev) {
  for (std::size_t r = 0; r < n; ++r)
    pointwise_backward_row(hidden, gates + r * 4 * hidden, c_prev ? c_prev + r * hidden : nullptr,
                           tanh_c + r * hidden, dh + r * hidden, dc ? dc + r * hidden : nullptr,
                           dgates + r * 4 * hidden, dc_prev ? dc_prev + r * hidden : nullptr);
}

}  // namespace reference

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  auto C = view(c, m, n, ldc);
  if (beta == 0.0)
    C.noalias() = cview(a, m, k, lda) * cview(b, k, n, ldb);
  else
    C.noalias() += cview(a, m, k, lda) * cview(b, k, n, ldb);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  auto C = view(c, m, n, ldc);
  if (beta == 0.0)
    C.noalias() = cview(a, k, m, lda).transpose() * cview(b, k, n, ldb);
  else
    C.noalias() += cview(a, k, m, lda).transpose() * cview(b, k, n, ldb);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  auto C = view(c, m, n, ldc);
  if (beta == 0.0)
    C.noalias() = cview(a, m, k, lda) * cview(b, n, k, ldb).transpose();
  else
    C.noalias() += cview(a, m, k, lda) * cview(b, n, k, ldb).transpose();
}

void lstm_pointwise_forward(std::size_t n, std::size_t hidden, double* gates, const double* c_prev, double* c,
                            double* h, double* tanh_c) {
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n * hidden >= kParallelMinElements)
  for (long r = 0; r < rows; ++r)
    vector_forward_row(hidden, gates + r * 4 * hidden, c_prev ? c_prev + r * hidden : nullptr, c + r * hidden,
                       h + r * hidden, tanh_c + r * hidden);
}

void lstm_pointwise_backward(std::size_t n, std::size_t hidden, const double* gates, const double* c_prev,
                             const double* tanh_c, const double* dh, const double* dc, double* dgates,
                             double* dc_prev) {
  const long rows = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (n * hidden >= kParallelMinElements)
  for (long r = 0; r < rows; ++r)
    pointwise_backward_row(hidden, gates + r * 4 * hidden, c_prev ? c_prev + r * hidden : nullptr,
                           tanh_c + r * hidden, dh + r * hidden, dc ? dc + r * hidden : nullptr,
                           dgates + r * 4 * hidden, dc_prev ? dc_prev + r * hidden : nullptr);
}

}  // namespace parallel

#define CONDGEN_DISPATCH(name, ...) \
  (kernel_mode() == KernelMode::reference ? reference::name(__VA_ARGS__) : parallel::name(__VA_ARGS__))

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  CONDGEN_DISPATCH(gemm_nn, m, n, k, a, lda, b, ldb, beta, c, ldc);
}
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  CONDGEN_DISPATCH(gemm_tn, m, n, k, a, lda, b, ldb, beta, c, ldc);
}
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double beta, double* c, std::size_t ldc) {
  CONDGEN_DISPATCH(gemm_nt, m, n, k, a, lda, b, ldb, beta, c, ldc);
}
void lstm_pointwise_forward(std::size_t n, std::size_t hidden, double* gates, const double* c_prev, double* c,
                            double* h, double* tanh_c) {
  CONDGEN_DISPATCH(lstm_pointwise_forward, n, hidden, gates, c_prev, c, h, tanh_c);
}
void lstm_pointwise_backward(std::size_t n, std::size_t hidden, const double* gates, const double* c_prev,
                             const double* tanh_c, const double* dh, const double* dc, double* dgates,
                             double* dc_prev) {
  CONDGEN_DISPATCH(lstm_pointwise_backward, n, hidden, gates, c_prev, tanh_c, dh, dc, dgates, dc_prev);
}

#undef CONDGEN_DISPATCH

}  // namespace condgen::nn
