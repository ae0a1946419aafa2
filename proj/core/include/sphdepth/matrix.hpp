/*
 * Copyright (c) 2026, the spheredepth authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sphdepth {

/// Dense row-major matrix of doubles. Rows are pixels (or tokens), columns are
/// channels throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(double v);
  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  bool all_finite() const noexcept;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Products below accumulate each output element over the inner dimension in
// ascending order, independently of the element's row position. Row
// permutations of an input therefore permute the output bitwise.

/// a (n x k) * b (k x m).
Matrix matmul(const Matrix& a, const Matrix& b);
/// a (n x k) * b^T, b is (m x k).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// a^T * b, a is (n x k), b is (n x m). Accumulates over rows in order.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

/// Adds the 1 x cols row vector to every row.
void add_row_vector(Matrix& a, const Matrix& row);
/// 1 x cols sums over rows.
Matrix column_sums(const Matrix& a);

/// Columns [begin, begin + count) as a new matrix.
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count);
/// Writes src into columns [begin, begin + src.cols()) of dst.
void set_cols(Matrix& dst, std::size_t begin, const Matrix& src);

Matrix hadamard(const Matrix& a, const Matrix& b);

}  // namespace sphdepth
