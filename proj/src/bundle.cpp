#include "segrefine/bundle.hpp"

#include <fstream>

#include <json.hpp>

#include "segrefine/error.hpp"

namespace segrefine {

namespace {

using nlohmann::json;

constexpr const char* kTensorRoles[] = {"image",           "clip_layer_features", "clip_layer_attn",
                                        "clip_value_last", "dino_layer_features", "dino_attn_last",
                                        "text_embeddings"};

void expect(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

void expect_layout(const Tensor& t, DType dtype, std::size_t ndim, const char* role) {
  expect(t.dtype() == dtype && t.ndim() == ndim, ErrorCode::ShapeMismatch,
         std::string(role) + " must be " + to_string(dtype) + " with " + std::to_string(ndim) +
             " dims, got " + t.shape_string());
}

Grid parse_grid(const json& j, const char* key) {
  expect(j.is_array() && j.size() == 2 && j[0].is_number_unsigned() && j[1].is_number_unsigned(),
         ErrorCode::GeometryMismatch, std::string(key) + " must be [rows, cols]");
  Grid g{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
  expect(g.rows > 0 && g.cols > 0, ErrorCode::GeometryMismatch, std::string(key) + " must be positive");
  return g;
}

}  // namespace

void validate_bundle(const FeatureBundle& b) {
  expect_layout(b.image, DType::u8, 3, "image");
  expect(b.image.dim(2) == 3, ErrorCode::ShapeMismatch, "image must have 3 channels");
  expect_layout(b.clip_layer_features, DType::f32, 3, "clip_layer_features");
  expect_layout(b.clip_layer_attn, DType::f32, 4, "clip_layer_attn");
  expect_layout(b.clip_value_last, DType::f32, 2, "clip_value_last");
  expect_layout(b.dino_layer_features, DType::f32, 3, "dino_layer_features");
  expect_layout(b.dino_attn_last, DType::f32, 2, "dino_attn_last");
  expect_layout(b.text_embeddings, DType::f32, 2, "text_embeddings");

  const std::size_t pc = b.grid_clip.size() + (b.has_class_token_clip ? 1 : 0);
  const std::size_t pd = b.grid_dino.size() + (b.has_class_token_dino ? 1 : 0);
  auto geom = [](bool ok, const std::string& what) { expect(ok, ErrorCode::GeometryMismatch, what); };

  geom(b.clip_layer_features.dim(1) == pc,
       "clip_layer_features has " + std::to_string(b.clip_layer_features.dim(1)) + " tokens, grid_clip implies " +
           std::to_string(pc));
  geom(b.clip_layer_attn.dim(2) == pc && b.clip_layer_attn.dim(3) == pc,
       "clip_layer_attn must be square over " + std::to_string(pc) + " tokens");
  geom(b.clip_value_last.dim(0) == pc, "clip_value_last token count does not match grid_clip");
  geom(b.dino_layer_features.dim(1) == pd,
       "dino_layer_features has " + std::to_string(b.dino_layer_features.dim(1)) + " tokens, grid_dino implies " +
           std::to_string(pd));
  geom(b.dino_attn_last.dim(0) == pd && b.dino_attn_last.dim(1) == pd,
       "dino_attn_last must be square over " + std::to_string(pd) + " tokens");

  const auto attn_layers = b.clip_layer_attn.dim(0);
  const auto feat_layers = b.clip_layer_features.dim(0);
  geom(feat_layers == attn_layers || feat_layers == attn_layers + 1,
       "clip_layer_features must hold N-1 or N layers for N-1 = " + std::to_string(attn_layers) +
           " attention layers");

  const auto dim = b.text_embeddings.dim(1);
  expect(b.clip_layer_features.dim(2) == dim && b.clip_value_last.dim(1) == dim, ErrorCode::DimensionMismatch,
         "CLIP feature width must equal text embedding width");
  expect(b.dino_layer_features.dim(2) == dim, ErrorCode::DimensionMismatch,
         "DINO feature width must equal text embedding width");

  expect(b.text_embeddings.dim(0) == b.class_names.size(), ErrorCode::InconsistentClassCount,
         "text_embeddings has " + std::to_string(b.text_embeddings.dim(0)) + " rows but " +
             std::to_string(b.class_names.size()) + " class names");
  expect(!b.class_names.empty(), ErrorCode::InconsistentClassCount, "class_names is empty");
}

FeatureBundle load_bundle(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingRole, "manifest not found: " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoFailure, "manifest is not valid JSON: " + std::string(e.what()));
  }
  expect(m.is_object(), ErrorCode::IoFailure, "manifest must be a JSON object");

  const auto base = manifest_path.parent_path();
  for (const char* key : kTensorRoles) expect(m.contains(key), ErrorCode::MissingRole, key);
  for (const char* key : {"grid_clip", "grid_dino", "has_class_token_clip", "has_class_token_dino", "class_names"})
    expect(m.contains(key), ErrorCode::MissingRole, key);

  auto load = [&](const char* role) {
    expect(m[role].is_string(), ErrorCode::MissingRole, std::string(role) + " must be a path string");
    return read_tensor(base / m[role].get<std::string>());
  };

  FeatureBundle b;
  b.image = load("image");
  b.clip_layer_features = load("clip_layer_features");
  b.clip_layer_attn = load("clip_layer_attn");
  b.clip_value_last = load("clip_value_last");
  b.dino_layer_features = load("dino_layer_features");
  b.dino_attn_last = load("dino_attn_last");
  b.text_embeddings = load("text_embeddings");
  b.grid_clip = parse_grid(m["grid_clip"], "grid_clip");
  b.grid_dino = parse_grid(m["grid_dino"], "grid_dino");
  expect(m["has_class_token_clip"].is_boolean() && m["has_class_token_dino"].is_boolean(),
         ErrorCode::GeometryMismatch, "class token flags must be booleans");
  b.has_class_token_clip = m["has_class_token_clip"].get<bool>();
  b.has_class_token_dino = m["has_class_token_dino"].get<bool>();
  expect(m["class_names"].is_array(), ErrorCode::InconsistentClassCount, "class_names must be an array");
  for (const auto& name : m["class_names"]) {
    expect(name.is_string(), ErrorCode::InconsistentClassCount, "class_names entries must be strings");
    b.class_names.push_back(name.get<std::string>());
  }

  validate_bundle(b);
  return b;
}

std::filesystem::path save_bundle(const std::filesystem::path& dir, const FeatureBundle& b) {
  std::filesystem::create_directories(dir);
  json m;
  auto put = [&](const char* role, const Tensor& t) {
    const std::string file = std::string(role) + ".stf";
    write_tensor(dir / file, t);
    m[role] = file;
  };
  put("image", b.image);
  put("clip_layer_features", b.clip_layer_features);
  put("clip_layer_attn", b.clip_layer_attn);
  put("clip_value_last", b.clip_value_last);
  put("dino_layer_features", b.dino_layer_features);
  put("dino_attn_last", b.dino_attn_last);
  put("text_embeddings", b.text_embeddings);
  m["grid_clip"] = {b.grid_clip.rows, b.grid_clip.cols};
  m["grid_dino"] = {b.grid_dino.rows, b.grid_dino.cols};
  m["has_class_token_clip"] = b.has_class_token_clip;
  m["has_class_token_dino"] = b.has_class_token_dino;
  m["class_names"] = b.class_names;

  const auto path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << m.dump(2) << "\n";
  return path;
}

}  // namespace segrefine
