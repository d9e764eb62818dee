#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "segrefine/cscp.hpp"
#include "segrefine/diffusion.hpp"
#include "segrefine/superpixel.hpp"

namespace segrefine {

struct GraphParams {
  std::size_t k = 30;
  double tau = 0.07;
};

struct EdgeWeightParams {
  double w_in = 1.0;
  double w_cross = 0.10;
};

struct PipelineConfig {
  double lambda1 = 1.0;
  GraphParams graph;
  DiffusionParams diffusion;
  CscpParams cscp;
  SuperpixelParams superpixel;
  EdgeWeightParams edges;  // lives under "superpixel" in the JSON
  std::optional<std::int64_t> ignore_index = 255;

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Missing keys keep their defaults; unknown keys raise UnknownKey and
// out-of-range or mistyped values raise ConstraintViolation.
PipelineConfig parse_config(const nlohmann::json& j);
PipelineConfig parse_config_file(const std::filesystem::path& path);

}  // namespace segrefine
