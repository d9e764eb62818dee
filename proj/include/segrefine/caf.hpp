#pragma once

#include <span>
#include <vector>

#include "segrefine/bundle.hpp"
#include "segrefine/matrix.hpp"
#include "segrefine/tensor.hpp"

namespace segrefine {

// P x P attention over spatial patches, class token already removed.
struct AttentionMap {
  Matrix values;
  Grid grid;
};

// P x K per-patch class scores.
struct ScoreMap {
  Matrix values;
  Grid grid;

  std::size_t num_classes() const { return values.cols(); }
};

// One P' x P' matrix per attention head.
using HeadStack = std::vector<Matrix>;

// Slices a f32 tensor of shape L x R x C into L matrices.
std::vector<Matrix> layers_from_tensor(const Tensor& t);
Matrix matrix_from_tensor(const Tensor& t);

// Mean over the layer axis of a (N-1) x heads x P' x P' stack.
HeadStack average_attention(const Tensor& layer_attn);

// Per head: B = ReLU(Sym(A) - mean(A)), rows l1-normalised, then B * V;
// heads are averaged. The class-token row is dropped from the result.
Matrix sharpen_and_project(const HeadStack& a_avg, const Matrix& v_last, bool has_class_token);

// Mean over heads with the class-token row and column stripped.
AttentionMap head_average(const HeadStack& a_avg, Grid grid, bool has_class_token);

// l2-normalises every patch vector of every layer.
std::vector<Matrix> normalize_dino_layers(const Tensor& raw);

// Cosine similarity between every feature row and every text row.
ScoreMap compute_logits(const Matrix& features, const Matrix& text, Grid grid);

// Bilinearly resamples both spatial index pairs to `target`, clamps
// negatives and l1-normalises rows. Identity when the grids already match.
AttentionMap align(const AttentionMap& a, Grid target);

// (a_self + lambda1 * a_other) * s_last + mean(s_layers). An empty layer
// list contributes nothing.
ScoreMap cross_fuse(const ScoreMap& s_last, std::span<const ScoreMap> s_layers, const AttentionMap& a_self,
                    const AttentionMap& a_other, double lambda1);

// Bilinear resampling of a score map to another grid.
ScoreMap resample_scores(const ScoreMap& s, Grid target);

struct CafResult {
  ScoreMap s_clip;  // on the CLIP grid
  ScoreMap s_dino;  // resampled to the CLIP grid
  // F_1..F_N of the semantic branch (F_N is the sharpened projection).
  std::vector<Matrix> clip_layer_feats;
  // Normalised structural layers, resampled to the CLIP grid.
  std::vector<Matrix> dino_layer_feats;
};

CafResult run_caf(const FeatureBundle& bundle, double lambda1);

}  // namespace segrefine
