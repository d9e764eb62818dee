#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "segrefine/tensor.hpp"

namespace segrefine {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes, std::optional<std::int64_t> ignore_index = 255);

  std::size_t num_classes() const { return n_; }
  std::optional<std::int64_t> ignore_index() const { return ignore_; }
  std::int64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }
  std::int64_t total() const;

  // Adds one image; pred and gt are i64 tensors of equal shape. Pixels whose
  // ground truth equals ignore_index are skipped.
  void accumulate(const Tensor& pred, const Tensor& gt);

  // Elementwise sum of two matrices with the same class count.
  void merge(const ConfusionMatrix& other);

  Tensor to_tensor() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::optional<std::int64_t> ignore_;
  std::vector<std::int64_t> counts_;
};

struct IouReport {
  // nullopt for classes absent from both prediction and ground truth.
  std::vector<std::optional<double>> per_class;
  double mean = 0.0;
  std::int64_t pixels_evaluated = 0;
};

// IoU_i = TP / (TP + FP + FN); zero-denominator classes are left out of the mean.
IouReport miou(const ConfusionMatrix& cm);

// {"per_class_iou": {name: value|null}, "miou": value, "pixels_evaluated": n}
nlohmann::ordered_json metrics_json(const IouReport& report, const std::vector<std::string>& class_names);

}  // namespace segrefine
