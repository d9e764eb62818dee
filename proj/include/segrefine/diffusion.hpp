#pragma once

#include "segrefine/caf.hpp"
#include "segrefine/graph.hpp"

namespace segrefine {

struct DiffusionParams {
  double alpha = 0.9;
  std::size_t steps = 40;
};

// S(0) = s0; S(i) = alpha * T * S(i-1) + (1 - alpha) * s0.
ScoreMap diffuse(const TransitionMatrix& t, const ScoreMap& s0, const DiffusionParams& p);

struct RefinedScores {
  ScoreMap clip;
  ScoreMap dino;
};

// Cross assignment: semantic scores walk the structural graph and
// structural scores walk the semantic graph.
RefinedScores refine_bidirectional(const TransitionMatrix& t_clip, const TransitionMatrix& t_dino,
                                   const ScoreMap& s_clip, const ScoreMap& s_dino, const DiffusionParams& p);

}  // namespace segrefine
