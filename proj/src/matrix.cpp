#include "segrefine/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "segrefine/error.hpp"

namespace segrefine {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw Error(ErrorCode::ShapeMismatch, "matrix data size mismatch");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

void normalize_rows_l2(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    if (sq <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (double& v : row) v *= inv;
  }
}

void normalize_rows_l1(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    if (s <= 0.0) continue;
    for (double& v : row) v /= s;
  }
}

Matrix drop_first_row(const Matrix& m) {
  if (m.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "cannot drop a row from an empty matrix");
  std::vector<double> data(m.data().begin() + static_cast<std::ptrdiff_t>(m.cols()), m.data().end());
  return Matrix(m.rows() - 1, m.cols(), std::move(data));
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double w_hi;
};

// Half-pixel source coordinate for each destination index.
std::vector<Tap> make_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const auto hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Matrix resample_rows(const Matrix& m, Grid from, Grid to) {
  if (m.rows() != from.size()) throw Error(ErrorCode::ShapeMismatch, "row count does not match source grid");
  if (from == to) return m;
  if (to.size() == 0) throw Error(ErrorCode::ShapeMismatch, "empty target grid");
  const auto ty = make_taps(from.rows, to.rows);
  const auto tx = make_taps(from.cols, to.cols);
  Matrix out(to.size(), m.cols());
  for (std::size_t y = 0; y < to.rows; ++y) {
    for (std::size_t x = 0; x < to.cols; ++x) {
      const auto& a = ty[y];
      const auto& b = tx[x];
      const double w00 = (1 - a.w_hi) * (1 - b.w_hi), w01 = (1 - a.w_hi) * b.w_hi;
      const double w10 = a.w_hi * (1 - b.w_hi), w11 = a.w_hi * b.w_hi;
      auto r00 = m.row(a.lo * from.cols + b.lo), r01 = m.row(a.lo * from.cols + b.hi);
      auto r10 = m.row(a.hi * from.cols + b.lo), r11 = m.row(a.hi * from.cols + b.hi);
      auto dst = out.row(y * to.cols + x);
      for (std::size_t c = 0; c < m.cols(); ++c)
        dst[c] = w00 * r00[c] + w01 * r01[c] + w10 * r10[c] + w11 * r11[c];
    }
  }
  return out;
}

Matrix round_to_f32(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace segrefine
