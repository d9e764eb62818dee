#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "segrefine/matrix.hpp"

namespace segrefine {

// Row-compressed sparse row-stochastic matrix over patch nodes.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  TransitionMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::uint32_t> cols,
                   std::vector<double> values, Grid grid);

  std::size_t size() const { return n_; }
  const Grid& grid() const { return grid_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {cols_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  // y = T * x for a dense P x K right-hand side.
  Matrix apply(const Matrix& x) const;

  Matrix to_dense() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
  Grid grid_;
};

// Mean over layers, then unit l2 rows.
Matrix mean_features(std::span<const Matrix> stack);

struct TransitionBuild {
  TransitionMatrix matrix;
  std::size_t effective_k = 0;
  bool k_clamped = false;  // k >= P was requested and clamped to P - 1
};

// kNN-sparsified exp(cos / tau) affinities, row-normalised. Ties in the top-k
// selection go to the lower column index.
TransitionBuild build_transition(const Matrix& features, std::size_t k, double tau, Grid grid);

}  // namespace segrefine
