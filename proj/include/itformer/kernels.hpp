#pragma once

#include <cstddef>
#include <span>

// Dense compute kernels on raw row-major buffers.
//
// Two implementations are kept side by side:
//   itf::kernels::reference  plain serial loops, the ground truth for tests
//   itf::kernels             cache-friendly loop order, OpenMP-parallel over output rows
//
// Every output element accumulates its terms in the same (ascending) order in both
// implementations and for any thread count, so results are bit-identical.

namespace itf::kernels {

/// Threads used by the parallel kernels. Defaults to 1; the training loop stays single-threaded.
void set_num_threads(int threads);
int num_threads();

/// c[m×p] = a[m×k] · b[k×p]
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t p);
/// c[m×p] = a[m×k] · b[p×k]ᵀ
void gemm_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p);
/// c[k×p] = a[m×k]ᵀ · b[m×p]
void gemm_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p);
/// Row-wise softmax with max subtraction.
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols);

namespace reference {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t p);
void gemm_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p);
void gemm_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t p);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows, std::size_t cols);

}  // namespace reference
}  // namespace itf::kernels
