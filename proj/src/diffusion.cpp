#include "segrefine/diffusion.hpp"

#include "segrefine/error.hpp"

namespace segrefine {

ScoreMap diffuse(const TransitionMatrix& t, const ScoreMap& s0, const DiffusionParams& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  if (t.size() != s0.values.rows())
    throw Error(ErrorCode::ShapeMismatch, "transition is " + std::to_string(t.size()) + " nodes, scores have " +
                                              std::to_string(s0.values.rows()) + " rows");
  Matrix current = s0.values;
  const auto& anchor = s0.values.data();
  for (std::size_t step = 0; step < p.steps; ++step) {
    Matrix next = t.apply(current);
    auto& d = next.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = p.alpha * d[i] + (1.0 - p.alpha) * anchor[i];
    current = std::move(next);
  }
  return {std::move(current), s0.grid};
}

RefinedScores refine_bidirectional(const TransitionMatrix& t_clip, const TransitionMatrix& t_dino,
                                   const ScoreMap& s_clip, const ScoreMap& s_dino, const DiffusionParams& p) {
  return {diffuse(t_dino, s_clip, p), diffuse(t_clip, s_dino, p)};
}

}  // namespace segrefine
