#include "segrefine/caf.hpp"

#include <algorithm>
#include <cmath>

#include "segrefine/error.hpp"

namespace segrefine {

namespace {

void require(bool cond, ErrorCode code, const char* msg) {
  if (!cond) throw Error(code, msg);
}

Matrix strip_class_token(const Matrix& m) {
  Matrix out(m.rows() - 1, m.cols() - 1);
  for (std::size_t r = 1; r < m.rows(); ++r)
    for (std::size_t c = 1; c < m.cols(); ++c) out(r - 1, c - 1) = m(r, c);
  return out;
}

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteEncountered, std::string(what) + " has non-finite entries");
}

}  // namespace

std::vector<Matrix> layers_from_tensor(const Tensor& t) {
  require(t.ndim() == 3, ErrorCode::ShapeMismatch, "expected a 3-d tensor");
  const auto data = t.f32();
  const std::size_t layers = t.dim(0), rows = t.dim(1), cols = t.dim(2);
  std::vector<Matrix> out;
  out.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto base = data.begin() + static_cast<std::ptrdiff_t>(l * rows * cols);
    out.emplace_back(rows, cols, std::vector<double>(base, base + static_cast<std::ptrdiff_t>(rows * cols)));
  }
  return out;
}

Matrix matrix_from_tensor(const Tensor& t) {
  require(t.ndim() == 2, ErrorCode::ShapeMismatch, "expected a 2-d tensor");
  const auto data = t.f32();
  return Matrix(t.dim(0), t.dim(1), std::vector<double>(data.begin(), data.end()));
}

HeadStack average_attention(const Tensor& layer_attn) {
  require(layer_attn.ndim() == 4, ErrorCode::ShapeMismatch, "attention stack must be layers x heads x P x P");
  const std::size_t layers = layer_attn.dim(0), heads = layer_attn.dim(1);
  const std::size_t rows = layer_attn.dim(2), cols = layer_attn.dim(3);
  require(layers >= 1, ErrorCode::EmptyLayerAxis, "no attention layers");
  require(rows == cols, ErrorCode::ShapeMismatch, "attention maps must be square");
  const auto data = layer_attn.f32();
  const std::size_t plane = rows * cols;

  HeadStack out(heads, Matrix(rows, cols));
  for (std::size_t h = 0; h < heads; ++h) {
    auto& dst = out[h].data();
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t base = (l * heads + h) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += data[base + i];
    }
    for (double& v : dst) v /= static_cast<double>(layers);
  }
  return out;
}

Matrix sharpen_and_project(const HeadStack& a_avg, const Matrix& v_last, bool has_class_token) {
  require(!a_avg.empty(), ErrorCode::ShapeMismatch, "no attention heads");
  const std::size_t p = a_avg.front().rows();
  require(v_last.rows() == p, ErrorCode::ShapeMismatch, "value matrix rows must match attention size");
  require(!has_class_token || p >= 2, ErrorCode::ShapeMismatch, "class token needs at least one patch");

  Matrix acc(p, v_last.cols());
  for (const auto& a : a_avg) {
    require(a.rows() == p && a.cols() == p, ErrorCode::ShapeMismatch, "heads must share a square shape");
    double mu = 0.0;
    for (double v : a.data()) mu += v;
    mu /= static_cast<double>(p * p);

    Matrix b(p, p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) b(i, j) = std::max(0.0, 0.5 * (a(i, j) + a(j, i)) - mu);
    normalize_rows_l1(b);

    const Matrix proj = matmul(b, v_last);
    for (std::size_t i = 0; i < acc.data().size(); ++i) acc.data()[i] += proj.data()[i];
  }
  for (double& v : acc.data()) v /= static_cast<double>(a_avg.size());
  return has_class_token ? drop_first_row(acc) : acc;
}

AttentionMap head_average(const HeadStack& a_avg, Grid grid, bool has_class_token) {
  require(!a_avg.empty(), ErrorCode::ShapeMismatch, "no attention heads");
  Matrix mean(a_avg.front().rows(), a_avg.front().cols());
  for (const auto& a : a_avg) {
    require(a.rows() == mean.rows() && a.cols() == mean.cols(), ErrorCode::ShapeMismatch, "head shape mismatch");
    for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += a.data()[i];
  }
  for (double& v : mean.data()) v /= static_cast<double>(a_avg.size());
  if (has_class_token) mean = strip_class_token(mean);
  require(mean.rows() == grid.size(), ErrorCode::GeometryMismatch, "attention size does not match grid");
  return {std::move(mean), grid};
}

std::vector<Matrix> normalize_dino_layers(const Tensor& raw) {
  auto layers = layers_from_tensor(raw);
  for (auto& l : layers) normalize_rows_l2(l);
  return layers;
}

ScoreMap compute_logits(const Matrix& features, const Matrix& text, Grid grid) {
  if (features.cols() != text.cols())
    throw Error(ErrorCode::DimensionMismatch, "feature width " + std::to_string(features.cols()) +
                                                  " != text width " + std::to_string(text.cols()));
  require(features.rows() == grid.size(), ErrorCode::GeometryMismatch, "feature rows do not match grid");
  Matrix f = features, t = text;
  normalize_rows_l2(f);
  normalize_rows_l2(t);
  Matrix s(f.rows(), t.rows());
  for (std::size_t p = 0; p < f.rows(); ++p) {
    const auto fp = f.row(p);
    for (std::size_t k = 0; k < t.rows(); ++k) {
      const auto tk = t.row(k);
      double dot = 0.0;
      for (std::size_t d = 0; d < fp.size(); ++d) dot += fp[d] * tk[d];
      s(p, k) = dot;
    }
  }
  return {std::move(s), grid};
}

AttentionMap align(const AttentionMap& a, Grid target) {
  if (a.grid == target) return a;
  // Query axis first, then the key axis through a transpose.
  Matrix rows_done = resample_rows(a.values, a.grid, target);
  Matrix both = resample_rows(rows_done.transposed(), a.grid, target).transposed();
  for (double& v : both.data()) v = std::max(0.0, v);
  normalize_rows_l1(both);
  return {std::move(both), target};
}

ScoreMap cross_fuse(const ScoreMap& s_last, std::span<const ScoreMap> s_layers, const AttentionMap& a_self,
                    const AttentionMap& a_other, double lambda1) {
  const std::size_t p = s_last.values.rows(), k = s_last.values.cols();
  require(a_self.values.rows() == p && a_self.values.cols() == p && a_other.values.rows() == p &&
              a_other.values.cols() == p,
          ErrorCode::ShapeMismatch, "attention maps must be P x P on the score grid");
  for (const auto& s : s_layers)
    require(s.values.rows() == p && s.values.cols() == k, ErrorCode::ShapeMismatch, "layer scores must be P x K");

  Matrix mix(p, p);
  for (std::size_t i = 0; i < mix.data().size(); ++i)
    mix.data()[i] = a_self.values.data()[i] + lambda1 * a_other.values.data()[i];
  Matrix out = matmul(mix, s_last.values);

  if (!s_layers.empty()) {
    const double inv = 1.0 / static_cast<double>(s_layers.size());
    Matrix mean(p, k);
    for (const auto& s : s_layers)
      for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += s.values.data()[i];
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += mean.data()[i] * inv;
  }
  return {std::move(out), s_last.grid};
}

ScoreMap resample_scores(const ScoreMap& s, Grid target) {
  return {resample_rows(s.values, s.grid, target), target};
}

CafResult run_caf(const FeatureBundle& bundle, double lambda1) {
  const Grid grid = bundle.grid_clip;
  const Matrix text = matrix_from_tensor(bundle.text_embeddings);

  // Semantic branch.
  const HeadStack a_avg = average_attention(bundle.clip_layer_attn);
  const Matrix f_last =
      sharpen_and_project(a_avg, matrix_from_tensor(bundle.clip_value_last), bundle.has_class_token_clip);
  const AttentionMap a_clip = head_average(a_avg, grid, bundle.has_class_token_clip);

  const std::size_t intermediate = bundle.clip_layer_attn.dim(0);
  auto clip_layers = layers_from_tensor(bundle.clip_layer_features);
  clip_layers.resize(intermediate);
  if (bundle.has_class_token_clip)
    for (auto& l : clip_layers) l = drop_first_row(l);

  std::vector<ScoreMap> s_clip_layers;
  for (const auto& l : clip_layers) s_clip_layers.push_back(compute_logits(l, text, grid));
  const ScoreMap s_clip_last = compute_logits(f_last, text, grid);

  // Structural branch, brought onto the CLIP grid.
  auto dino_layers = normalize_dino_layers(bundle.dino_layer_features);
  if (bundle.has_class_token_dino)
    for (auto& l : dino_layers) l = drop_first_row(l);
  std::vector<ScoreMap> s_dino_layers;
  for (std::size_t n = 0; n + 1 < dino_layers.size(); ++n)
    s_dino_layers.push_back(resample_scores(compute_logits(dino_layers[n], text, bundle.grid_dino), grid));
  const ScoreMap s_dino_last = resample_scores(compute_logits(dino_layers.back(), text, bundle.grid_dino), grid);

  Matrix dino_attn = matrix_from_tensor(bundle.dino_attn_last);
  if (bundle.has_class_token_dino) dino_attn = strip_class_token(dino_attn);
  const AttentionMap a_dino = align({std::move(dino_attn), bundle.grid_dino}, grid);
  const AttentionMap a_clip_aligned = align(a_clip, grid);

  CafResult out{cross_fuse(s_clip_last, s_clip_layers, a_clip_aligned, a_dino, lambda1),
                cross_fuse(s_dino_last, s_dino_layers, a_dino, a_clip_aligned, lambda1),
                {},
                {}};
  check_finite(out.s_clip.values, "semantic scores");
  check_finite(out.s_dino.values, "structural scores");

  out.clip_layer_feats = std::move(clip_layers);
  out.clip_layer_feats.push_back(f_last);
  for (const auto& l : dino_layers) out.dino_layer_feats.push_back(resample_rows(l, bundle.grid_dino, grid));
  return out;
}

}  // namespace segrefine
