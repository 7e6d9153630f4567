#include "tdps/nn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#ifdef __FMA__
#include <immintrin.h>
#endif

#include "tdps/error.hpp"

namespace tdps::nn {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  require(data.size() == r * c, "matrix data size does not match its shape");
}

void Matrix::fill(double v) {
  std::fill(data.begin(), data.end(), v);
}

namespace kernels {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 16;

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 8;

// C rows [i0, i0 + rows) += A B. With FMA available a 4x8 tile of C stays in
// registers while p runs over k. Every element accumulates fma(a, b, c) over p
// in ascending order, so results match the reference loops bit for bit.
inline void gemm_rows(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i0, std::size_t rows) {
  const std::size_t k = a.cols;
  const std::size_t n = b.cols;
  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  std::size_t j0 = 0;
#ifdef __FMA__
  if (rows == kRowBlock) {
    for (; j0 + kColBlock <= n; j0 += kColBlock) {
      __m256d acc[kRowBlock][2];
      for (std::size_t r = 0; r < kRowBlock; ++r) {
        acc[r][0] = _mm256_loadu_pd(C + (i0 + r) * n + j0);
        acc[r][1] = _mm256_loadu_pd(C + (i0 + r) * n + j0 + 4);
      }
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(B + p * n + j0);
        const __m256d b1 = _mm256_loadu_pd(B + p * n + j0 + 4);
        for (std::size_t r = 0; r < kRowBlock; ++r) {
          const __m256d av = _mm256_set1_pd(A[(i0 + r) * k + p]);
          acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
        }
      }
      for (std::size_t r = 0; r < kRowBlock; ++r) {
        _mm256_storeu_pd(C + (i0 + r) * n + j0, acc[r][0]);
        _mm256_storeu_pd(C + (i0 + r) * n + j0 + 4, acc[r][1]);
      }
    }
  }
#endif
  for (std::size_t r = 0; r < rows; ++r) {
    double* crow = C + (i0 + r) * n;
    const double* arow = A + (i0 + r) * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = B + p * n;
      for (std::size_t j = j0; j < n; ++j) {
        crow[j] = std::fma(av, brow[j], crow[j]);
      }
    }
  }
}

Matrix transposed(const Matrix& b) {
  Matrix t(b.cols, b.rows);
  for (std::size_t r = 0; r < b.rows; ++r) {
    for (std::size_t c = 0; c < b.cols; ++c) {
      t.data[c * b.rows + r] = b.data[r * b.cols + c];
    }
  }
  return t;
}

}  // namespace

void gemm(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "gemm shape mismatch");
  const auto blocks = static_cast<std::int64_t>((a.rows + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static) if (a.rows * a.cols * b.cols > kParallelWork)
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
    gemm_rows(a, b, c, i0, std::min(kRowBlock, a.rows - i0));
  }
}

void gemm_bt(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "gemm_bt shape mismatch");
  // Transposing first keeps the inner loop a contiguous axpy.
  gemm(a, transposed(b), c);
}

void gemm_at(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "gemm_at shape mismatch");
  gemm(transposed(a), b, c);
}

void gemm_reference(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "gemm shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t p = 0; p < a.cols; ++p) {
      for (std::size_t j = 0; j < b.cols; ++j) {
        c(i, j) = std::fma(a(i, p), b(p, j), c(i, j));
      }
    }
  }
}

void gemm_bt_reference(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "gemm_bt shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.rows; ++j) {
      for (std::size_t p = 0; p < a.cols; ++p) {
        c(i, j) = std::fma(a(i, p), b(j, p), c(i, j));
      }
    }
  }
}

void gemm_at_reference(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "gemm_at shape mismatch");
  for (std::size_t q = 0; q < a.cols; ++q) {
    for (std::size_t i = 0; i < a.rows; ++i) {
      for (std::size_t j = 0; j < b.cols; ++j) {
        c(q, j) = std::fma(a(i, q), b(i, j), c(q, j));
      }
    }
  }
}

}  // namespace kernels

}  // namespace tdps::nn
