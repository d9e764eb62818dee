#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segrefine/matrix.hpp"
#include "segrefine/tensor.hpp"

namespace segrefine {

// Everything exported by the extractor for a single image.
//
// Attention and value tensors keep their class-token row/column when the
// corresponding has_class_token flag is set (token at index 0); consumers
// strip it. Layer features may carry the token as well.
struct FeatureBundle {
  Tensor image;                // u8   H x W x 3
  Tensor clip_layer_features;  // f32  L x P_c' x D   (L = N-1 or N)
  Tensor clip_layer_attn;      // f32  (N-1) x heads x P_c' x P_c'
  Tensor clip_value_last;      // f32  P_c' x D
  Tensor dino_layer_features;  // f32  N_d x P_d' x D_d
  Tensor dino_attn_last;       // f32  P_d' x P_d'
  Tensor text_embeddings;      // f32  K x D
  Grid grid_clip;
  Grid grid_dino;
  bool has_class_token_clip = false;
  bool has_class_token_dino = false;
  std::vector<std::string> class_names;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t image_height() const { return image.dim(0); }
  std::size_t image_width() const { return image.dim(1); }
};

// Throws GeometryMismatch / InconsistentClassCount / ShapeMismatch.
void validate_bundle(const FeatureBundle& bundle);

// Reads manifest.json (tensor paths relative to the manifest) and validates.
FeatureBundle load_bundle(const std::filesystem::path& manifest_path);

// Writes every tensor plus manifest.json into `dir`; returns the manifest path.
std::filesystem::path save_bundle(const std::filesystem::path& dir, const FeatureBundle& bundle);

}  // namespace segrefine
