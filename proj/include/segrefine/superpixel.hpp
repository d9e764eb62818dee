#pragma once

#include <cstdint>
#include <vector>

#include "segrefine/tensor.hpp"

namespace segrefine {

struct SuperpixelParams {
  float scale = 100.0f;
  std::size_t min_size = 50;
  float sigma = 0.8f;
};

// Per-pixel segment ids in [0, num_segments), first-occurrence scan order.
struct SuperpixelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_segments = 0;
  std::vector<std::int64_t> labels;

  std::int64_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  Tensor to_tensor() const;
};

// Weights for 4-neighbour pixel pairs: horizontal is H x (W-1) (pair
// (y,x)-(y,x+1)), vertical is (H-1) x W (pair (y,x)-(y+1,x)).
struct EdgeWeightField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> horizontal;
  std::vector<double> vertical;

  double h(std::size_t y, std::size_t x) const { return horizontal[y * (width - 1) + x]; }
  double v(std::size_t y, std::size_t x) const { return vertical[y * width + x]; }
  double max_weight() const;
};

// Graph-based greedy merging (Felzenszwalb-Huttenlocher) on the 8-connected
// pixel grid with Euclidean RGB edge weights. `image` is u8 H x W x 3.
//
// Segments are additionally guaranteed to be 4-connected: pieces that are
// only diagonally attached are split off and, if smaller than min_size,
// merged into their cheapest 4-adjacent neighbour.
SuperpixelMap segment_felzenszwalb(const Tensor& image, const SuperpixelParams& params);

EdgeWeightField build_edge_weights(const SuperpixelMap& sp, double w_in, double w_cross);

// Per-channel Gaussian smoothing, kernel radius ceil(3 sigma), reflected
// borders. Returns H*W*3 floats. sigma == 0 copies the image.
std::vector<float> gaussian_smooth(const Tensor& image, float sigma);

}  // namespace segrefine
