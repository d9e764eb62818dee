#include "segrefine/eval.hpp"

#include "segrefine/error.hpp"

namespace segrefine {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::optional<std::int64_t> ignore_index)
    : n_(num_classes), ignore_(ignore_index), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw Error(ErrorCode::InvalidArgument, "confusion matrix needs at least one class");
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::accumulate(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw Error(ErrorCode::ShapeMismatch, "prediction " + pred.shape_string() + " vs ground truth " + gt.shape_string());
  const auto p = pred.i64();
  const auto g = gt.i64();
  const auto n = static_cast<std::int64_t>(n_);
  // Validate first so a bad pixel leaves the matrix untouched.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (ignore_ && g[i] == *ignore_) continue;
    if (g[i] < 0 || g[i] >= n)
      throw Error(ErrorCode::LabelOutOfRange, "ground-truth label " + std::to_string(g[i]) + " at pixel " +
                                                  std::to_string(i));
    if (p[i] < 0 || p[i] >= n)
      throw Error(ErrorCode::LabelOutOfRange, "predicted label " + std::to_string(p[i]) + " at pixel " +
                                                  std::to_string(i));
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (ignore_ && g[i] == *ignore_) continue;
    ++counts_[static_cast<std::size_t>(g[i]) * n_ + static_cast<std::size_t>(p[i])];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw Error(ErrorCode::ShapeMismatch, "class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

Tensor ConfusionMatrix::to_tensor() const { return Tensor({n_, n_}, counts_); }

IouReport miou(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  IouReport r;
  r.per_class.resize(n);
  r.pixels_evaluated = cm.total();
  double sum = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += cm.at(i, j);
      col += cm.at(j, i);
    }
    const auto tp = cm.at(i, i);
    const auto denom = row + col - tp;  // TP + FN + FP
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    r.per_class[i] = iou;
    sum += iou;
    ++valid;
  }
  r.mean = valid ? sum / static_cast<double>(valid) : 0.0;
  return r;
}

nlohmann::ordered_json metrics_json(const IouReport& report, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < report.per_class.size(); ++i) {
    const std::string name = i < class_names.size() ? class_names[i] : std::to_string(i);
    per_class[name] = report.per_class[i] ? nlohmann::ordered_json(*report.per_class[i]) : nullptr;
  }
  nlohmann::ordered_json j;
  j["per_class_iou"] = std::move(per_class);
  j["miou"] = report.mean;
  j["pixels_evaluated"] = report.pixels_evaluated;
  return j;
}

}  // namespace segrefine
