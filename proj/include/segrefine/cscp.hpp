#pragma once

#include <functional>
#include <span>
#include <vector>

#include "segrefine/caf.hpp"
#include "segrefine/superpixel.hpp"
#include "segrefine/tensor.hpp"

namespace segrefine {

// H x W x K per-pixel class distributions.
struct ProbabilityField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  ProbabilityField() = default;
  ProbabilityField(std::size_t h, std::size_t w, std::size_t k, double fill = 0.0)
      : height(h), width(w), classes(k), values(h * w * k, fill) {}

  std::size_t pixels() const { return height * width; }
  std::span<double> pixel(std::size_t p) { return {values.data() + p * classes, classes}; }
  std::span<const double> pixel(std::size_t p) const { return {values.data() + p * classes, classes}; }

  Tensor to_tensor() const;
  static ProbabilityField from_tensor(const Tensor& t);
};

struct CscpParams {
  double lambda_c = 1.0;
  double lambda_d = 0.2;
  double beta = 0.10;
  std::size_t max_iters = 500;
  double rel_tol = 1e-6;
  double softmax_temp = 1.0;
  double eps_floor = 1e-8;

  // Throws ConstraintViolation.
  void validate() const;
};

// Bilinear upsampling of patch scores to H x W, tempered softmax, floor at
// eps_floor, renormalise.
ProbabilityField scores_to_probs(const ScoreMap& s, std::size_t height, std::size_t width, double temp,
                                 double eps_floor);

struct KlTarget {
  ProbabilityField g;
  double lambda_total = 0.0;
};

// lambda_c KL(q||a) + lambda_d KL(q||b) == (lambda_c + lambda_d) KL(q||g) + const,
// with g the normalised weighted geometric mean of a and b.
KlTarget collapse_kl_targets(const ProbabilityField& a, const ProbabilityField& b, double lambda_c, double lambda_d);

double kl_divergence(std::span<const double> q, std::span<const double> g);

// lambda_total * sum_p KL(Q_p || g_p) + beta * sum_edges w_pq * |Q_p - Q_q|_1.
double cscp_energy(const ProbabilityField& q, const ProbabilityField& g, double lambda_total,
                   const EdgeWeightField& w, double beta);

// Per-pixel prox of tau * lambda * KL(. || g) + simplex indicator, i.e.
// argmin_q  step * sum_k q_k log(q_k / g_k) + 0.5 |q - v|^2  over the simplex.
// Writes the result into `out`.
void kl_simplex_prox(std::span<const double> v, std::span<const double> g, double step, double eps_floor,
                     std::span<double> out);

// Snapshot handed to the observer after every iteration.
struct PdhgIterate {
  std::size_t iteration = 0;
  double energy = 0.0;
  double primal_change = 0.0;  // |Q_i - Q_{i-1}|_1 / (H W)
  const ProbabilityField* primal = nullptr;
  std::span<const double> dual_horizontal;  // H(W-1) x K
  std::span<const double> dual_vertical;    // (H-1)W x K
};

struct PdhgLogEntry {
  std::size_t iteration = 0;
  double energy = 0.0;
  double primal_change = 0.0;
};

struct PdhgResult {
  ProbabilityField q;  // lowest-energy iterate
  double energy = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<PdhgLogEntry> log;  // entry 0 is the initial point
};

PdhgResult solve_pdhg(const ProbabilityField& g, double lambda_total, const EdgeWeightField& w,
                      const CscpParams& params,
                      const std::function<void(const PdhgIterate&)>& observer = nullptr);

// Per-pixel argmax, lowest class index on ties. Returns i64 H x W.
Tensor argmax_labels(const ProbabilityField& q);

}  // namespace segrefine
