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

#include "sphdepth/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sphdepth/error.hpp"

namespace sphdepth {
namespace {

void require_same(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same(*this, o, "matrix add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same(*this, o, "matrix subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict crow = c.data() + i * m;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* __restrict brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  return matmul(a, transpose(b));
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(k, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    const double* __restrict brow = b.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* __restrict crow = c.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

void add_row_vector(Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row_vector: bad shape");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* r = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) r[j] += row.data()[j];
  }
}

Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* r = a.data() + i * a.cols();
    for (std::size_t j = 0; j < a.cols(); ++j) s.data()[j] += r[j];
  }
  return s;
}

Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("slice_cols: range exceeds columns");
  Matrix s(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy_n(a.data() + i * a.cols() + begin, count, s.data() + i * count);
  }
  return s;
}

void set_cols(Matrix& dst, std::size_t begin, const Matrix& src) {
  if (src.rows() != dst.rows() || begin + src.cols() > dst.cols()) {
    throw ShapeError("set_cols: range exceeds destination");
  }
  for (std::size_t i = 0; i < src.rows(); ++i) {
    std::copy_n(src.data() + i * src.cols(), src.cols(), dst.data() + i * dst.cols() + begin);
  }
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same(a, b, "hadamard");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
  return c;
}

}  // namespace sphdepth
