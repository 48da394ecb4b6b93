#include "itformer/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#ifdef ITFORMER_HAVE_OPENMP
#include <omp.h>
#endif

namespace itf::kernels {
namespace {

int g_threads = 1;

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 16;

bool go_parallel(std::size_t work) { return g_threads > 1 && work >= kParallelWork; }

}  // namespace

void set_num_threads(int threads) { g_threads = std::max(1, threads); }
int num_threads() { return g_threads; }

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t p) {
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for num_threads(g_threads) if (go_parallel(m * k * p)) schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* ci = C + i * p;
    std::fill(ci, ci + p, 0.0);
    const double* ai = A + i * k;
    for (std::size_t t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = B + t * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += av * bt[j];
    }
  }
}

void gemm_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p) {
  // Transposing b once turns the strided dot products into the streaming gemm loop.
  std::vector<double> bt(k * p);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t t = 0; t < k; ++t) bt[t * p + j] = b[j * k + t];
  gemm(a, bt, c, m, k, p);
}

void gemm_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p) {
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for num_threads(g_threads) if (go_parallel(m * k * p)) schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    double* cr = C + r * p;
    std::fill(cr, cr + p, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double av = A[i * k + r];
      const double* bi = B + i * p;
      for (std::size_t j = 0; j < p; ++j) cr[j] += av * bi[j];
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for num_threads(g_threads) if (go_parallel(rows * cols * 8)) schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= total;
  }
}

namespace reference {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[t * p + j];
      c[i * p + j] = acc;
    }
}

void gemm_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += a[i * k + t] * b[j * k + t];
      c[i * p + j] = acc;
    }
}

void gemm_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p) {
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + r] * b[i * p + j];
      c[r * p + j] = acc;
    }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = x[r * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[r * cols + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[r * cols + j] = std::exp(x[r * cols + j] - mx);
      total += y[r * cols + j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] /= total;
  }
}

}  // namespace reference
}  // namespace itf::kernels
