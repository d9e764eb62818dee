#include <doctest.h>

#include <random>

#include "segrefine/diffusion.hpp"
#include "segrefine/error.hpp"
#include "support/oracles.hpp"

using namespace segrefine;

namespace {

TransitionMatrix random_transition(std::mt19937& rng, std::size_t p, std::size_t k) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix f(p, 4);
  for (auto& x : f.data()) x = n(rng);
  normalize_rows_l2(f);
  return build_transition(f, k, 0.2, {p, 1}).matrix;
}

ScoreMap random_scores(std::mt19937& rng, std::size_t p, std::size_t k) {
  std::uniform_real_distribution<double> u(-1, 1);
  ScoreMap s{Matrix(p, k), {p, 1}};
  for (auto& x : s.values.data()) x = u(rng);
  return s;
}

double max_diff(const Matrix& a, const Eigen::MatrixXd& b) { return (oracle::to_eigen(a) - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("zero steps returns the initial scores") {
  std::mt19937 rng(1);
  const auto t = random_transition(rng, 6, 2);
  const auto s = random_scores(rng, 6, 3);
  CHECK(diffuse(t, s, {0.9, 0}).values == s.values);
}

TEST_CASE("constant scores are a fixed point") {
  std::mt19937 rng(2);
  const auto t = random_transition(rng, 8, 3);
  const ScoreMap s{Matrix(8, 2, 0.75), {8, 1}};
  const auto out = diffuse(t, s, {0.9, 40});
  for (double v : out.values.data()) CHECK(v == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("matches the closed form") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = 2 + rng() % 30, k = 1 + rng() % 5;
    const auto t = random_transition(rng, p, 1 + rng() % (p - 1));
    const auto s = random_scores(rng, p, k);
    const double alpha = 0.1 + 0.85 * (trial / 20.0);
    const int steps = 1 + static_cast<int>(rng() % 50);
    const auto got = diffuse(t, s, {alpha, static_cast<std::size_t>(steps)});
    CHECK(max_diff(got.values, oracle::diffusion_closed_form(oracle::dense(t), oracle::to_eigen(s.values), alpha,
                                                             steps)) < 1e-9);
  }
}

TEST_CASE("long runs converge to the linear-system solution") {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = random_transition(rng, 16, 4);
    const auto s = random_scores(rng, 16, 3);
    const auto got = diffuse(t, s, {0.9, 200});
    CHECK(max_diff(got.values, oracle::diffusion_fixed_point(oracle::dense(t), oracle::to_eigen(s.values), 0.9)) <
          1e-6);
  }
}

TEST_CASE("linear and bounded") {
  std::mt19937 rng(5);
  const auto t = random_transition(rng, 10, 3);
  const auto a = random_scores(rng, 10, 2), b = random_scores(rng, 10, 2);
  ScoreMap combo{Matrix(10, 2), a.grid};
  for (std::size_t i = 0; i < 20; ++i) combo.values.data()[i] = 2.0 * a.values.data()[i] - 0.5 * b.values.data()[i];
  const auto da = diffuse(t, a, {}), db = diffuse(t, b, {}), dc = diffuse(t, combo, {});
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(std::abs(dc.values.data()[i] - (2.0 * da.values.data()[i] - 0.5 * db.values.data()[i])) < 1e-12);

  // Row-stochastic propagation keeps every column inside its initial range.
  for (std::size_t c = 0; c < 2; ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t p = 0; p < 10; ++p) {
      lo = std::min(lo, a.values(p, c));
      hi = std::max(hi, a.values(p, c));
    }
    for (std::size_t p = 0; p < 10; ++p) {
      CHECK(da.values(p, c) >= lo - 1e-12);
      CHECK(da.values(p, c) <= hi + 1e-12);
    }
  }
}

TEST_CASE("bidirectional refinement crosses the graphs") {
  std::mt19937 rng(6);
  const auto t_clip = random_transition(rng, 12, 3), t_dino = random_transition(rng, 12, 5);
  const auto s_clip = random_scores(rng, 12, 2), s_dino = random_scores(rng, 12, 2);
  const DiffusionParams p{0.9, 40};
  const auto r = refine_bidirectional(t_clip, t_dino, s_clip, s_dino, p);
  CHECK(r.clip.values == diffuse(t_dino, s_clip, p).values);
  CHECK(r.dino.values == diffuse(t_clip, s_dino, p).values);

  // Swapping both the graphs and the inputs swaps the outputs.
  const auto swapped = refine_bidirectional(t_dino, t_clip, s_dino, s_clip, p);
  CHECK(swapped.clip.values == r.dino.values);
  CHECK(swapped.dino.values == r.clip.values);

  // Identical graphs and inputs give identical outputs.
  const auto same = refine_bidirectional(t_clip, t_clip, s_clip, s_clip, p);
  CHECK(same.clip.values == same.dino.values);
}

TEST_CASE("shape mismatch is rejected") {
  std::mt19937 rng(7);
  const auto t = random_transition(rng, 5, 2);
  CHECK_THROWS_AS(diffuse(t, random_scores(rng, 6, 2), {}), Error);
}
