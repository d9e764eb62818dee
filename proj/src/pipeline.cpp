#include "segrefine/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "segrefine/error.hpp"
#include "segrefine/graph.hpp"
#include "segrefine/parallel.hpp"
#include "segrefine/png.hpp"

namespace segrefine {

namespace {

template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

ScoreMap rounded(const ScoreMap& s) { return {round_to_f32(s.values), s.grid}; }

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_convergence_csv(const std::filesystem::path& path, const PdhgResult& r) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.precision(17);
  out << "iteration,energy,primal_change\n";
  for (const auto& e : r.log) out << e.iteration << "," << e.energy << "," << e.primal_change << "\n";
}

}  // namespace

Tensor grid_matrix_to_tensor(const Matrix& m, Grid grid) {
  if (m.rows() != grid.size()) throw Error(ErrorCode::GeometryMismatch, "matrix rows do not match grid");
  std::vector<float> data(m.data().begin(), m.data().end());
  return Tensor({grid.rows, grid.cols, m.cols()}, std::move(data));
}

ScoreMap score_map_from_tensor(const Tensor& t) {
  if (t.dtype() != DType::f32 || t.ndim() != 3)
    throw Error(ErrorCode::ShapeMismatch, "score tensors must be f32 rows x cols x C, got " + t.shape_string());
  const Grid grid{t.dim(0), t.dim(1)};
  const auto d = t.f32();
  return {Matrix(grid.size(), t.dim(2), std::vector<double>(d.begin(), d.end())), grid};
}

Tensor load_label_map(const std::filesystem::path& path) {
  Tensor t = read_tensor(path);
  if (t.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "label map must be H x W, got " + t.shape_string());
  if (t.dtype() == DType::i64) return t;
  if (t.dtype() == DType::u8) {
    const auto d = t.u8();
    return Tensor(t.shape(), std::vector<std::int64_t>(d.begin(), d.end()));
  }
  throw Error(ErrorCode::ShapeMismatch, "label map must be i64 or u8");
}

CafStage run_caf_stage(const FeatureBundle& bundle, const PipelineConfig& cfg) {
  CafResult caf = run_caf(bundle, cfg.lambda1);
  return {rounded(caf.s_clip), rounded(caf.s_dino), round_to_f32(mean_features(caf.clip_layer_feats)),
          round_to_f32(mean_features(caf.dino_layer_feats))};
}

RefinedScores run_diffusion_stage(const CafStage& caf, const PipelineConfig& cfg) {
  const Grid grid = caf.s_clip.grid;
  if (caf.s_dino.grid != grid || caf.f_clip.rows() != grid.size() || caf.f_dino.rows() != grid.size())
    throw Error(ErrorCode::GeometryMismatch, "scores and features must share the CLIP grid");
  const auto t_clip = build_transition(caf.f_clip, cfg.graph.k, cfg.graph.tau, grid);
  const auto t_dino = build_transition(caf.f_dino, cfg.graph.k, cfg.graph.tau, grid);
  RefinedScores r = refine_bidirectional(t_clip.matrix, t_dino.matrix, caf.s_clip, caf.s_dino, cfg.diffusion);
  return {rounded(r.clip), rounded(r.dino)};
}

SolveStage run_solve_stage(const Tensor& image, const RefinedScores& refined, const PipelineConfig& cfg) {
  if (image.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "image must be H x W x 3");
  const std::size_t h = image.dim(0), w = image.dim(1);
  if (refined.clip.num_classes() != refined.dino.num_classes())
    throw Error(ErrorCode::ShapeMismatch, "branch score maps disagree on the class count");

  SolveStage out;
  out.superpixels = segment_felzenszwalb(image, cfg.superpixel);
  const auto weights = build_edge_weights(out.superpixels, cfg.edges.w_in, cfg.edges.w_cross);
  const auto p_clip = scores_to_probs(refined.clip, h, w, cfg.cscp.softmax_temp, cfg.cscp.eps_floor);
  const auto p_dino = scores_to_probs(refined.dino, h, w, cfg.cscp.softmax_temp, cfg.cscp.eps_floor);
  const auto target = collapse_kl_targets(p_clip, p_dino, cfg.cscp.lambda_c, cfg.cscp.lambda_d);
  out.solver = solve_pdhg(target.g, target.lambda_total, weights, cfg.cscp);
  out.q = out.solver.q;
  out.labels = argmax_labels(out.q);
  return out;
}

RunResult run_pipeline(const std::filesystem::path& manifest, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir, const RunOptions& options) {
  cfg.validate();
  const FeatureBundle bundle = in_stage("load_bundle", [&] { return load_bundle(manifest); });
  in_stage("output", [&] { return std::filesystem::create_directories(out_dir); });

  const CafStage caf = in_stage("caf", [&] { return run_caf_stage(bundle, cfg); });
  const RefinedScores refined = in_stage("diffusion", [&] { return run_diffusion_stage(caf, cfg); });
  SolveStage solved = in_stage("cscp", [&] { return run_solve_stage(bundle.image, refined, cfg); });

  RunResult result{solved.labels, std::nullopt, std::nullopt};
  in_stage("output", [&] {
    write_tensor(out_dir / "labels.stf", solved.labels);
    write_label_png(out_dir / "labels.png", solved.labels);
    if (options.debug) {
      const Grid grid = caf.s_clip.grid;
      write_tensor(out_dir / "s_clip.stf", grid_matrix_to_tensor(caf.s_clip.values, grid));
      write_tensor(out_dir / "s_dino.stf", grid_matrix_to_tensor(caf.s_dino.values, grid));
      write_tensor(out_dir / "f_clip.stf", grid_matrix_to_tensor(caf.f_clip, grid));
      write_tensor(out_dir / "f_dino.stf", grid_matrix_to_tensor(caf.f_dino, grid));
      write_tensor(out_dir / "sg_clip.stf", grid_matrix_to_tensor(refined.clip.values, grid));
      write_tensor(out_dir / "sg_dino.stf", grid_matrix_to_tensor(refined.dino.values, grid));
      write_tensor(out_dir / "superpixels.stf", solved.superpixels.to_tensor());
      write_segments_png(out_dir / "superpixels.png", solved.superpixels.to_tensor());
      write_tensor(out_dir / "q.stf", solved.q.to_tensor());
      write_convergence_csv(out_dir / "convergence.csv", solved.solver);
    }
    return 0;
  });

  if (options.ground_truth) {
    in_stage("eval", [&] {
      const Tensor gt = load_label_map(*options.ground_truth);
      ConfusionMatrix cm(bundle.num_classes(), cfg.ignore_index);
      cm.accumulate(solved.labels, gt);
      result.report = miou(cm);
      result.confusion = std::move(cm);
      write_json(out_dir / "metrics.json", metrics_json(*result.report, bundle.class_names));
      return 0;
    });
  }
  return result;
}

BatchResult run_batch(const std::filesystem::path& dir, const PipelineConfig& cfg,
                      const std::filesystem::path& out_dir, bool debug) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest.json"))
      names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw Error(ErrorCode::MissingRole, "no */manifest.json under " + dir.string());

  std::vector<RunResult> results(names.size());
  std::vector<std::exception_ptr> errors(names.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    const std::size_t width = std::min(worker_count(), names.size());
    for (std::size_t w = 0; w < width; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < names.size();) {
          try {
            RunOptions opts;
            opts.debug = debug;
            const auto gt = dir / names[i] / "gt.stf";
            if (std::filesystem::exists(gt)) opts.ground_truth = gt;
            results[i] = run_pipeline(dir / names[i] / "manifest.json", cfg, out_dir / names[i], opts);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Merge in name order; addition is order-independent anyway.
  BatchResult batch{names, std::nullopt, std::nullopt};
  for (auto& r : results) {
    if (!r.confusion) continue;
    if (!batch.confusion) batch.confusion = *r.confusion;
    else batch.confusion->merge(*r.confusion);
  }
  if (batch.confusion) {
    batch.report = miou(*batch.confusion);
    const FeatureBundle first = load_bundle(dir / names.front() / "manifest.json");
    write_json(out_dir / "metrics.json", metrics_json(*batch.report, first.class_names));
  }
  return batch;
}

}  // namespace segrefine
