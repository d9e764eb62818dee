#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace segrefine {

// Patch grid geometry; patches are laid out row-major.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Grid&) const = default;
};

// Dense row-major matrix of doubles. All numerics run in double; f32 only
// appears at the file boundary.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// Scales every row to unit l2 norm; zero rows stay zero.
void normalize_rows_l2(Matrix& m);

// Scales every row to unit l1 norm; rows summing to zero stay zero.
void normalize_rows_l1(Matrix& m);

// Drops the first row (the class token).
Matrix drop_first_row(const Matrix& m);

// Bilinear resampling of a spatial axis. `m` has one row per patch of
// `from`; each column is treated as an independent image and resampled to
// `to` with half-pixel centres (align_corners = false). Identity when the
// grids match.
Matrix resample_rows(const Matrix& m, Grid from, Grid to);

// Rounds every entry through f32, matching what a stage dump would store.
Matrix round_to_f32(const Matrix& m);

}  // namespace segrefine
