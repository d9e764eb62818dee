#pragma once

// Straight-line transcription of the attention-fusion formulas, operating on
// raw bundle tensors with nested loops. Only valid when both branches share a
// grid (no alignment or resampling needed) and neither carries a class token.

#include <cmath>
#include <vector>

#include "segrefine/bundle.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat cosine_logits(const Mat& f, const Mat& t) {
  Mat s = zeros(f.size(), t.size());
  for (std::size_t p = 0; p < f.size(); ++p)
    for (std::size_t k = 0; k < t.size(); ++k) {
      double dot = 0, nf = 0, nt = 0;
      for (std::size_t d = 0; d < f[p].size(); ++d) {
        dot += f[p][d] * t[k][d];
        nf += f[p][d] * f[p][d];
        nt += t[k][d] * t[k][d];
      }
      s[p][k] = (nf > 0 && nt > 0) ? dot / (std::sqrt(nf) * std::sqrt(nt)) : 0.0;
    }
  return s;
}

struct CafOracle {
  Mat s_clip;
  Mat s_dino;
};

inline CafOracle caf_straight_line(const segrefine::FeatureBundle& b, double lambda1) {
  const auto attn = b.clip_layer_attn.f32();
  const std::size_t layers = b.clip_layer_attn.dim(0), heads = b.clip_layer_attn.dim(1);
  const std::size_t p = b.clip_layer_attn.dim(2);
  const std::size_t dim = b.text_embeddings.dim(1), k = b.text_embeddings.dim(0);
  auto at = [&](std::size_t l, std::size_t h, std::size_t i, std::size_t j) {
    return static_cast<double>(attn[((l * heads + h) * p + i) * p + j]);
  };

  Mat text = zeros(k, dim);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < dim; ++d) text[c][d] = b.text_embeddings.f32()[c * dim + d];
  Mat v = zeros(p, dim);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t d = 0; d < dim; ++d) v[i][d] = b.clip_value_last.f32()[i * dim + d];

  // Averaged attention per head.
  std::vector<Mat> avg(heads, zeros(p, p));
  for (std::size_t h = 0; h < heads; ++h)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        double s = 0;
        for (std::size_t l = 0; l < layers; ++l) s += at(l, h, i, j);
        avg[h][i][j] = s / static_cast<double>(layers);
      }

  // Sharpened projection of the value matrix.
  Mat f_last = zeros(p, dim);
  for (std::size_t h = 0; h < heads; ++h) {
    double mu = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) mu += avg[h][i][j];
    mu /= static_cast<double>(p * p);
    for (std::size_t i = 0; i < p; ++i) {
      std::vector<double> row(p);
      double l1 = 0;
      for (std::size_t j = 0; j < p; ++j) {
        const double sym = 0.5 * (avg[h][i][j] + avg[h][j][i]);
        row[j] = sym - mu > 0 ? sym - mu : 0.0;
        l1 += row[j];
      }
      for (std::size_t j = 0; j < p; ++j) {
        const double bij = l1 > 0 ? row[j] / l1 : 0.0;
        for (std::size_t d = 0; d < dim; ++d) f_last[i][d] += bij * v[j][d] / static_cast<double>(heads);
      }
    }
  }

  // Head-averaged attention for each branch.
  Mat a_clip = zeros(p, p), a_dino = zeros(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t h = 0; h < heads; ++h) a_clip[i][j] += avg[h][i][j] / static_cast<double>(heads);
      a_dino[i][j] = b.dino_attn_last.f32()[i * p + j];
    }

  auto layer = [&](const segrefine::Tensor& t, std::size_t l) {
    const std::size_t rows = t.dim(1), cols = t.dim(2);
    Mat m = zeros(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) m[r][c] = t.f32()[(l * rows + r) * cols + c];
    return m;
  };

  auto fuse = [&](const Mat& self, const Mat& other, const Mat& s_last, const std::vector<Mat>& s_layers) {
    Mat out = zeros(p, k);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t c = 0; c < k; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < p; ++j) acc += (self[i][j] + lambda1 * other[i][j]) * s_last[j][c];
        double mean = 0;
        for (const auto& s : s_layers) mean += s[i][c];
        out[i][c] = acc + (s_layers.empty() ? 0.0 : mean / static_cast<double>(s_layers.size()));
      }
    return out;
  };

  std::vector<Mat> clip_scores;
  for (std::size_t l = 0; l < layers; ++l) clip_scores.push_back(cosine_logits(layer(b.clip_layer_features, l), text));
  const Mat s_clip_last = cosine_logits(f_last, text);

  const std::size_t nd = b.dino_layer_features.dim(0);
  std::vector<Mat> dino_scores;
  // Cosine logits are scale-invariant, so the per-vector l2 step needs no separate pass here.
  for (std::size_t l = 0; l + 1 < nd; ++l) dino_scores.push_back(cosine_logits(layer(b.dino_layer_features, l), text));
  const Mat s_dino_last = cosine_logits(layer(b.dino_layer_features, nd - 1), text);

  return {fuse(a_clip, a_dino, s_clip_last, clip_scores), fuse(a_dino, a_clip, s_dino_last, dino_scores)};
}

}  // namespace oracle
