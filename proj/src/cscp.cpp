#include "segrefine/cscp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segrefine/error.hpp"
#include "segrefine/parallel.hpp"

namespace segrefine {

namespace {

void constraint(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorCode::ConstraintViolation, msg);
}

// Solves step * u + exp(u) = rhs for u and returns exp(u). The left side is
// convex and increasing in u, so Newton converges from any start.
double solve_entropic_scalar(double rhs, double step) {
  double u = rhs > 1.0 ? std::log(std::max(rhs - step * std::log(rhs), 1e-300)) : std::min(rhs / step, 0.0);
  for (int it = 0; it < 100; ++it) {
    const double e = std::exp(u);
    const double f = step * u + e - rhs;
    const double du = f / (step + e);
    u -= du;
    if (std::abs(du) <= 1e-14 * std::max(1.0, std::abs(u))) break;
  }
  return std::exp(u);
}

}  // namespace

Tensor ProbabilityField::to_tensor() const {
  std::vector<float> data(values.begin(), values.end());
  return Tensor({height, width, classes}, std::move(data));
}

ProbabilityField ProbabilityField::from_tensor(const Tensor& t) {
  if (t.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "probability field must be H x W x K");
  ProbabilityField f(t.dim(0), t.dim(1), t.dim(2));
  const auto d = t.f32();
  std::copy(d.begin(), d.end(), f.values.begin());
  return f;
}

void CscpParams::validate() const {
  constraint(lambda_c >= 0.0 && lambda_d >= 0.0 && lambda_c + lambda_d > 0.0,
             "cscp.lambda_c and cscp.lambda_d must be >= 0 with a positive sum");
  constraint(beta >= 0.0, "cscp.beta must be >= 0");
  constraint(max_iters >= 1, "cscp.max_iters must be >= 1");
  constraint(rel_tol > 0.0, "cscp.rel_tol must be > 0");
  constraint(softmax_temp > 0.0, "cscp.softmax_temp must be > 0");
  constraint(eps_floor > 0.0 && eps_floor <= 1e-3, "cscp.eps_floor must lie in (0, 1e-3]");
}

ProbabilityField scores_to_probs(const ScoreMap& s, std::size_t height, std::size_t width, double temp,
                                 double eps_floor) {
  if (!(temp > 0.0)) throw Error(ErrorCode::InvalidArgument, "softmax temperature must be positive");
  const Matrix up = resample_rows(s.values, s.grid, Grid{height, width});
  const std::size_t k = s.values.cols();
  ProbabilityField out(height, width, k);
  for (std::size_t p = 0; p < out.pixels(); ++p) {
    const auto src = up.row(p);
    auto dst = out.pixel(p);
    const double top = *std::max_element(src.begin(), src.end());
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += dst[c] = std::exp((src[c] - top) / temp);
    double floored = 0.0;
    for (auto& v : dst) floored += v = std::max(v / total, eps_floor);
    for (auto& v : dst) v /= floored;
  }
  return out;
}

KlTarget collapse_kl_targets(const ProbabilityField& a, const ProbabilityField& b, double lambda_c,
                             double lambda_d) {
  if (a.height != b.height || a.width != b.width || a.classes != b.classes)
    throw Error(ErrorCode::ShapeMismatch, "KL targets must share a shape");
  const double total = lambda_c + lambda_d;
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_c + lambda_d must be positive");
  const double wa = lambda_c / total, wb = lambda_d / total;

  KlTarget out{ProbabilityField(a.height, a.width, a.classes), total};
  std::vector<double> logs(a.classes);
  for (std::size_t p = 0; p < a.pixels(); ++p) {
    const auto pa = a.pixel(p), pb = b.pixel(p);
    auto dst = out.g.pixel(p);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < a.classes; ++c) {
      // A zero weight must not touch its log term (0 * -inf).
      logs[c] = (wa > 0.0 ? wa * std::log(pa[c]) : 0.0) + (wb > 0.0 ? wb * std::log(pb[c]) : 0.0);
      top = std::max(top, logs[c]);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < a.classes; ++c) z += dst[c] = std::exp(logs[c] - top);
    for (auto& v : dst) v /= z;
  }
  return out;
}

double kl_divergence(std::span<const double> q, std::span<const double> g) {
  double kl = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c)
    if (q[c] > 0.0) kl += q[c] * std::log(q[c] / g[c]);
  return kl;
}

double cscp_energy(const ProbabilityField& q, const ProbabilityField& g, double lambda_total,
                   const EdgeWeightField& w, double beta) {
  double data = 0.0;
  for (std::size_t p = 0; p < q.pixels(); ++p) data += kl_divergence(q.pixel(p), g.pixel(p));
  double tv = 0.0;
  if (beta > 0.0) {
    const std::size_t h = q.height, wd = q.width;
    auto l1 = [&](std::size_t p, std::size_t r) {
      double s = 0.0;
      const auto a = q.pixel(p), b = q.pixel(r);
      for (std::size_t c = 0; c < q.classes; ++c) s += std::abs(a[c] - b[c]);
      return s;
    };
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x + 1 < wd; ++x) tv += w.h(y, x) * l1(y * wd + x, y * wd + x + 1);
    for (std::size_t y = 0; y + 1 < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) tv += w.v(y, x) * l1(y * wd + x, (y + 1) * wd + x);
  }
  return lambda_total * data + beta * tv;
}

void kl_simplex_prox(std::span<const double> v, std::span<const double> g, double step, double eps_floor,
                     std::span<double> out) {
  const std::size_t k = v.size();
  // Stationarity: step (log(q_k / g_k) + 1) + q_k - v_k + nu = 0, i.e.
  // step log q_k + q_k = r_k - nu with r_k = v_k - step (1 - log g_k).
  double r_max = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) r_max = std::max(r_max, v[c] - step * (1.0 - std::log(g[c])));

  auto evaluate = [&](double nu, double& slope) {
    double sum = 0.0;
    slope = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double q = solve_entropic_scalar(v[c] - step * (1.0 - std::log(g[c])) - nu, step);
      if (q > eps_floor) {
        out[c] = q;
        slope += q / (step + q);
      } else {
        out[c] = eps_floor;
      }
      sum += out[c];
    }
    return sum;
  };

  // The multiplier is bracketed by: the largest component alone reaching 1,
  // and every component at most 1/K.
  const double inv_k = 1.0 / static_cast<double>(k);
  double lo = r_max - 1.0;
  double hi = r_max - (step * std::log(inv_k) + inv_k);
  double nu = 0.5 * (lo + hi);
  double slope = 0.0;
  double sum = evaluate(nu, slope);
  for (int it = 0; it < 200 && std::abs(sum - 1.0) > 1e-14; ++it) {
    if (sum > 1.0) lo = nu;
    else hi = nu;
    if (hi - lo < 1e-10 * std::max(1.0, std::abs(nu))) break;
    // Newton on the decreasing sum, falling back to bisection outside the bracket.
    double next = slope > 0.0 ? nu + (sum - 1.0) / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    nu = next;
    sum = evaluate(nu, slope);
  }
  for (auto& q : out) q /= sum;
}

PdhgResult solve_pdhg(const ProbabilityField& g, double lambda_total, const EdgeWeightField& w,
                      const CscpParams& params, const std::function<void(const PdhgIterate&)>& observer) {
  params.validate();
  const std::size_t h = g.height, wd = g.width, k = g.classes, n = g.pixels();
  if (w.height != h || w.width != wd) throw Error(ErrorCode::ShapeMismatch, "edge weights do not match image");
  if (!(lambda_total > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_total must be positive");

  const double beta = params.beta;
  // Unweighted forward differences with the weights folded into the dual
  // box, so |D|^2 <= 8 and sigma = tau = 1/sqrt(8).
  const double step = 1.0 / std::sqrt(8.0);
  const double sigma = step, tau = step;
  const std::size_t nh = h * (wd > 0 ? wd - 1 : 0), nv = (h > 0 ? h - 1 : 0) * wd;

  ProbabilityField q = g, q_bar = g, q_prev = g;
  std::vector<double> yh(nh * k, 0.0), yv(nv * k, 0.0);
  ProbabilityField v(h, wd, k);

  PdhgResult result;
  result.q = g;
  result.energy = cscp_energy(g, g, lambda_total, w, beta);
  result.log.push_back({0, result.energy, 0.0});

  std::size_t calm = 0;
  for (std::size_t it = 1; it <= params.max_iters; ++it) {
    // Dual ascent with projection onto the weighted box.
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x + 1 < wd; ++x) {
        const std::size_t e = y * (wd - 1) + x, p = y * wd + x;
        const double bound = beta * w.h(y, x);
        const auto a = q_bar.pixel(p), b = q_bar.pixel(p + 1);
        for (std::size_t c = 0; c < k; ++c) {
          double& d = yh[e * k + c];
          d = std::clamp(d + sigma * (b[c] - a[c]), -bound, bound);
        }
      }
    for (std::size_t y = 0; y + 1 < h; ++y)
      for (std::size_t x = 0; x < wd; ++x) {
        const std::size_t e = y * wd + x, p = y * wd + x;
        const double bound = beta * w.v(y, x);
        const auto a = q_bar.pixel(p), b = q_bar.pixel(p + wd);
        for (std::size_t c = 0; c < k; ++c) {
          double& d = yv[e * k + c];
          d = std::clamp(d + sigma * (b[c] - a[c]), -bound, bound);
        }
      }

    // Primal descent through D^T and the per-pixel prox.
    q_prev = q;
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t p = begin; p < end; ++p) {
        const std::size_t y = p / wd, x = p % wd;
        auto vp = v.pixel(p);
        const auto qp = q.pixel(p);
        for (std::size_t c = 0; c < k; ++c) {
          double div = 0.0;
          if (x > 0) div += yh[(y * (wd - 1) + x - 1) * k + c];
          if (x + 1 < wd) div -= yh[(y * (wd - 1) + x) * k + c];
          if (y > 0) div += yv[((y - 1) * wd + x) * k + c];
          if (y + 1 < h) div -= yv[(y * wd + x) * k + c];
          vp[c] = qp[c] - tau * div;
        }
        kl_simplex_prox(vp, g.pixel(p), tau * lambda_total, params.eps_floor, q.pixel(p));
      }
    });

    double change = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < q.values.size(); ++i) {
      const double now = q.values[i];
      finite = finite && std::isfinite(now);
      change += std::abs(now - q_prev.values[i]);
      q_bar.values[i] = 2.0 * now - q_prev.values[i];
    }
    change /= static_cast<double>(n);
    const double energy = cscp_energy(q, g, lambda_total, w, beta);
    if (!finite || !std::isfinite(energy))
      throw Error(ErrorCode::NonFiniteEncountered,
                  "PDHG iterate became non-finite at iteration " + std::to_string(it) +
                      " (last energy " + std::to_string(result.log.back().energy) + ")");

    result.iterations = it;
    result.log.push_back({it, energy, change});
    if (energy < result.energy) {
      result.energy = energy;
      result.q = q;
    }
    if (observer) observer({it, energy, change, &q, yh, yv});

    calm = change < params.rel_tol ? calm + 1 : 0;
    if (calm >= 3) {
      result.converged = true;
      break;
    }
  }
  return result;
}

Tensor argmax_labels(const ProbabilityField& q) {
  std::vector<std::int64_t> labels(q.pixels());
  for (std::size_t p = 0; p < q.pixels(); ++p) {
    const auto px = q.pixel(p);
    labels[p] = std::max_element(px.begin(), px.end()) - px.begin();  // first maximum wins
  }
  return Tensor({q.height, q.width}, std::move(labels));
}

}  // namespace segrefine
