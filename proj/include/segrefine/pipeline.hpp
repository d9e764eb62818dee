#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segrefine/bundle.hpp"
#include "segrefine/caf.hpp"
#include "segrefine/config.hpp"
#include "segrefine/cscp.hpp"
#include "segrefine/diffusion.hpp"
#include "segrefine/eval.hpp"
#include "segrefine/superpixel.hpp"

namespace segrefine {

// Stage boundaries. Every stage output is rounded through f32 so that a
// staged run (dump, reload, continue) reproduces the fused run bit for bit.

struct CafStage {
  ScoreMap s_clip;
  ScoreMap s_dino;
  Matrix f_clip;  // mean semantic features, unit rows, CLIP grid
  Matrix f_dino;  // mean structural features, unit rows, CLIP grid
};

CafStage run_caf_stage(const FeatureBundle& bundle, const PipelineConfig& cfg);

RefinedScores run_diffusion_stage(const CafStage& caf, const PipelineConfig& cfg);

struct SolveStage {
  SuperpixelMap superpixels;
  ProbabilityField q;
  Tensor labels;  // i64 H x W
  PdhgResult solver;
};

// `image` is the bundle's u8 H x W x 3 image; scores live on the patch grid.
SolveStage run_solve_stage(const Tensor& image, const RefinedScores& refined, const PipelineConfig& cfg);

// Score maps and features travel as rows x cols x C f32 tensors.
Tensor grid_matrix_to_tensor(const Matrix& m, Grid grid);
ScoreMap score_map_from_tensor(const Tensor& t);

// Ground truth may be stored as i64 or u8; returned as i64 H x W.
Tensor load_label_map(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::filesystem::path> ground_truth;
  bool debug = false;
};

struct RunResult {
  Tensor labels;
  std::optional<ConfusionMatrix> confusion;
  std::optional<IouReport> report;
};

// Full inference for one manifest. Writes labels.png, labels.stf, and
// metrics.json (when ground truth is given) into out_dir; with debug, every
// stage artifact plus the solver convergence CSV as well. Errors are
// re-thrown tagged with the failing stage.
RunResult run_pipeline(const std::filesystem::path& manifest, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir, const RunOptions& options = {});

struct BatchResult {
  std::vector<std::string> processed;
  std::optional<ConfusionMatrix> confusion;
  std::optional<IouReport> report;
};

// Runs every `<dir>/<name>/manifest.json` (sorted by name) on a worker pool,
// using `<dir>/<name>/gt.stf` as ground truth when present, and merges the
// confusion matrices. Results go to `<out_dir>/<name>/`.
BatchResult run_batch(const std::filesystem::path& dir, const PipelineConfig& cfg,
                      const std::filesystem::path& out_dir, bool debug = false);

}  // namespace segrefine
