#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tdps::nn {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  void fill(double v);

  bool operator==(const Matrix&) const = default;
};

namespace kernels {

// C (m x n) += A (m x k) * B (k x n). Rows of C are split across OpenMP
// threads; each output element keeps the serial summation order, so the
// result is bitwise identical to gemm_reference.
void gemm(const Matrix& a, const Matrix& b, Matrix& c);
// C (m x n) += A (m x k) * B^T where B is (n x k).
void gemm_bt(const Matrix& a, const Matrix& b, Matrix& c);
// C (k x n) += A^T * B where A is (m x k) and B is (m x n).
void gemm_at(const Matrix& a, const Matrix& b, Matrix& c);

// Single-threaded references kept for testing and benchmarking.
void gemm_reference(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_bt_reference(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_at_reference(const Matrix& a, const Matrix& b, Matrix& c);

}  // namespace kernels

}  // namespace tdps::nn
