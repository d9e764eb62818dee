// segrefine: training-free segmentation refinement from exported feature bundles.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "segrefine/error.hpp"
#include "segrefine/pipeline.hpp"
#include "segrefine/png.hpp"

namespace fs = std::filesystem;
using namespace segrefine;

namespace {

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Numerical: return 4;
  }
  return 3;
}

PipelineConfig load_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : parse_config_file(path);
}

void print_metrics(const IouReport& r) { std::cout << "mIoU " << r.mean << " over " << r.pixels_evaluated << " px\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation refinement over dual-branch feature bundles"};
  app.require_subcommand(1);

  std::string manifest, config, out, gt, image, dir, pred;
  std::string s_clip, s_dino, f_clip, f_dino;
  bool debug = false;
  std::size_t num_classes = 0;
  std::int64_t ignore_index = 255;

  auto* run = app.add_subcommand("run", "Full pipeline for one bundle");
  run->add_option("--manifest", manifest, "Bundle manifest.json")->required();
  run->add_option("--config", config, "Pipeline config JSON (defaults when omitted)");
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--gt", gt, "Ground-truth label map (STF1, i64 or u8)");
  run->add_flag("--debug", debug, "Dump every stage artifact and the solver log");

  auto* batch = app.add_subcommand("batch", "Run every <dir>/*/manifest.json and merge metrics");
  batch->add_option("--dir", dir, "Directory of bundle directories")->required();
  batch->add_option("--config", config, "Pipeline config JSON");
  batch->add_option("--out", out, "Output directory")->required();
  batch->add_flag("--debug", debug, "Dump stage artifacts per bundle");

  auto* sp = app.add_subcommand("superpixels", "Superpixel label map of an image tensor");
  sp->add_option("--image", image, "u8 H x W x 3 STF1 image")->required();
  sp->add_option("--config", config, "Pipeline config JSON (superpixel section)");
  sp->add_option("--out", out, "Output directory")->required();

  auto* caf = app.add_subcommand("caf", "Cross-model attention fusion scores and mean features");
  caf->add_option("--manifest", manifest, "Bundle manifest.json")->required();
  caf->add_option("--config", config, "Pipeline config JSON");
  caf->add_option("--out", out, "Output directory")->required();

  auto* diff = app.add_subcommand("diffuse", "Bidirectional graph diffusion of CAF scores");
  diff->add_option("--s-clip", s_clip, "Semantic scores (rows x cols x K)")->required();
  diff->add_option("--s-dino", s_dino, "Structural scores (rows x cols x K)")->required();
  diff->add_option("--f-clip", f_clip, "Semantic mean features (rows x cols x D)")->required();
  diff->add_option("--f-dino", f_dino, "Structural mean features (rows x cols x D)")->required();
  diff->add_option("--config", config, "Pipeline config JSON");
  diff->add_option("--out", out, "Output directory")->required();

  auto* solve = app.add_subcommand("solve", "Superpixel-regularised fusion of refined scores");
  solve->add_option("--image", image, "u8 H x W x 3 STF1 image")->required();
  solve->add_option("--s-clip", s_clip, "Refined semantic scores")->required();
  solve->add_option("--s-dino", s_dino, "Refined structural scores")->required();
  solve->add_option("--config", config, "Pipeline config JSON");
  solve->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Confusion matrix and mIoU of a label map");
  ev->add_option("--pred", pred, "Predicted label map (STF1)")->required();
  ev->add_option("--gt", gt, "Ground-truth label map (STF1)")->required();
  ev->add_option("--num-classes", num_classes, "Number of classes")->required();
  ev->add_option("--ignore-index", ignore_index, "Ground-truth label to skip")->default_val(255);
  ev->add_option("--manifest", manifest, "Bundle manifest for class names");
  ev->add_option("--out", out, "Write metrics.json here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const PipelineConfig cfg = load_config(config);
    if (!out.empty()) fs::create_directories(out);

    if (*run) {
      RunOptions opts;
      opts.debug = debug;
      if (!gt.empty()) opts.ground_truth = gt;
      const auto result = run_pipeline(manifest, cfg, out, opts);
      if (result.report) print_metrics(*result.report);
    } else if (*batch) {
      const auto result = run_batch(dir, cfg, out, debug);
      std::cout << "processed " << result.processed.size() << " bundles\n";
      if (result.report) print_metrics(*result.report);
    } else if (*sp) {
      const auto map = segment_felzenszwalb(read_tensor(image), cfg.superpixel);
      write_tensor(fs::path(out) / "superpixels.stf", map.to_tensor());
      write_segments_png(fs::path(out) / "superpixels.png", map.to_tensor());
      std::cout << map.num_segments << " segments\n";
    } else if (*caf) {
      const auto stage = run_caf_stage(load_bundle(manifest), cfg);
      const Grid grid = stage.s_clip.grid;
      write_tensor(fs::path(out) / "s_clip.stf", grid_matrix_to_tensor(stage.s_clip.values, grid));
      write_tensor(fs::path(out) / "s_dino.stf", grid_matrix_to_tensor(stage.s_dino.values, grid));
      write_tensor(fs::path(out) / "f_clip.stf", grid_matrix_to_tensor(stage.f_clip, grid));
      write_tensor(fs::path(out) / "f_dino.stf", grid_matrix_to_tensor(stage.f_dino, grid));
    } else if (*diff) {
      CafStage stage{score_map_from_tensor(read_tensor(s_clip)), score_map_from_tensor(read_tensor(s_dino)),
                     score_map_from_tensor(read_tensor(f_clip)).values,
                     score_map_from_tensor(read_tensor(f_dino)).values};
      const auto refined = run_diffusion_stage(stage, cfg);
      write_tensor(fs::path(out) / "sg_clip.stf", grid_matrix_to_tensor(refined.clip.values, refined.clip.grid));
      write_tensor(fs::path(out) / "sg_dino.stf", grid_matrix_to_tensor(refined.dino.values, refined.dino.grid));
    } else if (*solve) {
      const RefinedScores refined{score_map_from_tensor(read_tensor(s_clip)),
                                  score_map_from_tensor(read_tensor(s_dino))};
      const auto solved = run_solve_stage(read_tensor(image), refined, cfg);
      write_tensor(fs::path(out) / "q.stf", solved.q.to_tensor());
      write_tensor(fs::path(out) / "labels.stf", solved.labels);
      write_label_png(fs::path(out) / "labels.png", solved.labels);
      std::ofstream csv(fs::path(out) / "convergence.csv");
      csv.precision(17);
      csv << "iteration,energy,primal_change\n";
      for (const auto& e : solved.solver.log) csv << e.iteration << "," << e.energy << "," << e.primal_change << "\n";
      std::cout << "solver " << (solved.solver.converged ? "converged" : "hit max_iters") << " after "
                << solved.solver.iterations << " iterations, energy " << solved.solver.energy << "\n";
    } else if (*ev) {
      ConfusionMatrix cm(num_classes, ignore_index);
      cm.accumulate(load_label_map(pred), load_label_map(gt));
      std::vector<std::string> names;
      if (!manifest.empty()) names = load_bundle(manifest).class_names;
      const auto j = metrics_json(miou(cm), names).dump(2);
      if (out.empty()) {
        std::cout << j << "\n";
      } else {
        std::ofstream(fs::path(out) / "metrics.json") << j << "\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
