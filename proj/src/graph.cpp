#include "segrefine/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "segrefine/error.hpp"

namespace segrefine {

TransitionMatrix::TransitionMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::uint32_t> cols,
                                   std::vector<double> values, Grid grid)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)), grid_(grid) {
  if (row_ptr_.size() != n_ + 1 || cols_.size() != values_.size() || row_ptr_.back() != values_.size())
    throw Error(ErrorCode::ShapeMismatch, "malformed sparse matrix");
}

Matrix TransitionMatrix::apply(const Matrix& x) const {
  if (x.rows() != n_) throw Error(ErrorCode::ShapeMismatch, "transition size does not match score rows");
  Matrix y(n_, x.cols());
  for (std::size_t r = 0; r < n_; ++r) {
    auto dst = y.row(r);
    const auto cols = row_cols(r);
    const auto vals = row_values(r);
    for (std::size_t e = 0; e < cols.size(); ++e) {
      const auto src = x.row(cols[e]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += vals[e] * src[c];
    }
  }
  return y;
}

Matrix TransitionMatrix::to_dense() const {
  Matrix d(n_, n_);
  for (std::size_t r = 0; r < n_; ++r) {
    const auto cols = row_cols(r);
    const auto vals = row_values(r);
    for (std::size_t e = 0; e < cols.size(); ++e) d(r, cols[e]) = vals[e];
  }
  return d;
}

Matrix mean_features(std::span<const Matrix> stack) {
  if (stack.empty()) throw Error(ErrorCode::EmptyLayerAxis, "no feature layers");
  Matrix mean(stack.front().rows(), stack.front().cols());
  for (const auto& layer : stack) {
    if (layer.rows() != mean.rows() || layer.cols() != mean.cols())
      throw Error(ErrorCode::ShapeMismatch, "feature layers differ in shape");
    for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += layer.data()[i];
  }
  for (double& v : mean.data()) v /= static_cast<double>(stack.size());
  normalize_rows_l2(mean);
  return mean;
}

TransitionBuild build_transition(const Matrix& features, std::size_t k, double tau, Grid grid) {
  const std::size_t p = features.rows();
  if (p < 2) throw Error(ErrorCode::InvalidArgument, "transition graph needs at least two nodes");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  if (grid.size() != p) throw Error(ErrorCode::GeometryMismatch, "feature rows do not match grid");

  TransitionBuild out;
  out.k_clamped = k >= p;
  out.effective_k = std::min(k, p - 1);
  if (out.k_clamped)
    std::cerr << "warning: InvalidK: k=" << k << " >= P=" << p << ", clamped to " << out.effective_k << "\n";
  const std::size_t kk = out.effective_k;

  std::vector<std::size_t> row_ptr(p + 1, 0);
  std::vector<std::uint32_t> cols(p * kk);
  std::vector<double> values(p * kk);
  std::vector<double> sim(p);
  std::vector<std::uint32_t> order(p - 1);

  for (std::size_t i = 0; i < p; ++i) {
    const auto fi = features.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      const auto fj = features.row(j);
      double dot = 0.0;
      for (std::size_t d = 0; d < fi.size(); ++d) dot += fi[d] * fj[d];
      sim[j] = std::isnan(dot) ? -std::numeric_limits<double>::infinity() : dot;
    }
    std::size_t m = 0;
    for (std::uint32_t j = 0; j < p; ++j)
      if (j != i) order[m++] = j;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) { return sim[a] > sim[b] || (sim[a] == sim[b] && a < b); });
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk));

    // Shift by the row maximum before exponentiating; cancels in the normalisation.
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < kk; ++e) top = std::max(top, sim[order[e]]);
    double total = 0.0;
    const std::size_t base = i * kk;
    for (std::size_t e = 0; e < kk; ++e) {
      cols[base + e] = order[e];
      values[base + e] = std::exp((sim[order[e]] - top) / tau);
      total += values[base + e];
    }
    if (total > 0.0 && std::isfinite(total)) {
      for (std::size_t e = 0; e < kk; ++e) values[base + e] /= total;
    } else {
      // Unreachable with finite features; falls back to a uniform row.
      for (std::size_t e = 0; e < kk; ++e) values[base + e] = 1.0 / static_cast<double>(kk);
    }
    row_ptr[i + 1] = base + kk;
  }
  out.matrix = TransitionMatrix(p, std::move(row_ptr), std::move(cols), std::move(values), grid);
  return out;
}

}  // namespace segrefine
