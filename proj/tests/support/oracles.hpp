#pragma once

// Independent reference implementations used only by the tests. They follow
// the textbook formulas with dense Eigen algebra and share no code path with
// the library beyond plain data conversion.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "segrefine/cscp.hpp"
#include "segrefine/graph.hpp"
#include "segrefine/superpixel.hpp"

namespace oracle {

using Eigen::MatrixXd;

inline MatrixXd to_eigen(const segrefine::Matrix& m) {
  MatrixXd e(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
  return e;
}

inline MatrixXd dense(const segrefine::TransitionMatrix& t) {
  MatrixXd d = MatrixXd::Zero(t.size(), t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    auto cols = t.row_cols(r);
    auto vals = t.row_values(r);
    for (std::size_t e = 0; e < cols.size(); ++e) d(r, cols[e]) = vals[e];
  }
  return d;
}

// alpha^T T^T s0 + (1 - alpha) sum_{i<T} alpha^i T^i s0, by explicit powers.
inline MatrixXd diffusion_closed_form(const MatrixXd& t, const MatrixXd& s0, double alpha, int steps) {
  MatrixXd power = MatrixXd::Identity(t.rows(), t.cols());
  MatrixXd acc = MatrixXd::Zero(s0.rows(), s0.cols());
  double a_pow = 1.0;
  for (int i = 0; i < steps; ++i) {
    acc += (1.0 - alpha) * a_pow * (power * s0);
    power = power * t;
    a_pow *= alpha;
  }
  return a_pow * (power * s0) + acc;
}

// (1 - alpha) (I - alpha T)^{-1} s0.
inline MatrixXd diffusion_fixed_point(const MatrixXd& t, const MatrixXd& s0, double alpha) {
  const MatrixXd lhs = MatrixXd::Identity(t.rows(), t.cols()) - alpha * t;
  return (1.0 - alpha) * lhs.fullPivLu().solve(s0);
}

// Full similarity, explicit top-k with lowest-index ties, exp, normalise.
inline MatrixXd transition_dense(const MatrixXd& f, std::size_t k, double tau) {
  const auto p = static_cast<std::size_t>(f.rows());
  const MatrixXd sim = f * f.transpose();
  MatrixXd t = MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<std::size_t> cand;
    for (std::size_t j = 0; j < p; ++j)
      if (j != i) cand.push_back(j);
    std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return sim(i, a) > sim(i, b); });
    cand.resize(std::min(k, p - 1));
    double total = 0.0;
    for (auto j : cand) total += t(i, j) = std::exp(sim(i, j) / tau);
    for (auto j : cand) t(i, j) /= total;
  }
  return t;
}

// Euclidean projection onto {q : sum q = 1, q >= floor}.
inline std::vector<double> project_simplex(std::vector<double> v, double floor) {
  const std::size_t k = v.size();
  const double mass = 1.0 - floor * static_cast<double>(k);
  for (auto& x : v) x -= floor;
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    cum += u[i];
    const double t = (cum - mass) / static_cast<double>(i + 1);
    if (u[i] - t > 0) theta = t;
  }
  for (auto& x : v) x = std::max(x - theta, 0.0) + floor;
  return v;
}

// Projected subgradient descent with diminishing steps; returns the best
// energy seen and writes the corresponding field into `best`.
inline double projected_subgradient(const segrefine::ProbabilityField& g, double lambda_total,
                                    const segrefine::EdgeWeightField& w, double beta, int iters,
                                    segrefine::ProbabilityField& best) {
  const std::size_t h = g.height, wd = g.width, k = g.classes;
  segrefine::ProbabilityField q = g;
  best = g;
  double best_e = segrefine::cscp_energy(g, g, lambda_total, w, beta);
  std::vector<double> grad(q.values.size());
  auto sgn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
  for (int it = 1; it <= iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t p = 0; p < h * wd; ++p)
      for (std::size_t c = 0; c < k; ++c)
        grad[p * k + c] = lambda_total * (std::log(q.values[p * k + c] / g.values[p * k + c]) + 1.0);
    auto edge = [&](std::size_t a, std::size_t b, double weight) {
      for (std::size_t c = 0; c < k; ++c) {
        const double s = beta * weight * sgn(q.values[a * k + c] - q.values[b * k + c]);
        grad[a * k + c] += s;
        grad[b * k + c] -= s;
      }
    };
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x + 1 < wd; ++x) edge(y * wd + x, y * wd + x + 1, w.h(y, x));
    for (std::size_t y = 0; y + 1 < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) edge(y * wd + x, (y + 1) * wd + x, w.v(y, x));
    const double eta = 0.05 / std::sqrt(static_cast<double>(it));
    for (std::size_t p = 0; p < h * wd; ++p) {
      std::vector<double> v(k);
      for (std::size_t c = 0; c < k; ++c) v[c] = q.values[p * k + c] - eta * grad[p * k + c];
      v = project_simplex(v, 1e-12);
      std::copy(v.begin(), v.end(), q.values.begin() + static_cast<std::ptrdiff_t>(p * k));
    }
    const double e = segrefine::cscp_energy(q, g, lambda_total, w, beta);
    if (e < best_e) {
      best_e = e;
      best = q;
    }
  }
  return best_e;
}

// 2x1 image, K = 2: scans the common distribution (q, 1 - q) on a grid.
inline double brute_force_common_q(const segrefine::ProbabilityField& g, double lambda_total, double resolution) {
  double best_q = 0.0, best_e = std::numeric_limits<double>::infinity();
  const auto steps = static_cast<long>(std::llround(1.0 / resolution));
  for (long i = 1; i < steps; ++i) {
    const double q = static_cast<double>(i) * resolution;
    double e = 0.0;
    for (std::size_t p = 0; p < 2; ++p) {
      const double g0 = g.values[p * 2], g1 = g.values[p * 2 + 1];
      e += lambda_total * (q * std::log(q / g0) + (1 - q) * std::log((1 - q) / g1));
    }
    if (e < best_e) {
      best_e = e;
      best_q = q;
    }
  }
  return best_q;
}

}  // namespace oracle
