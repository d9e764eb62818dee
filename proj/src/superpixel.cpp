#include "segrefine/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "segrefine/error.hpp"

namespace segrefine {

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), size_(n, 1), internal_(n, 0.0f) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Joins two roots; returns the surviving root.
  std::size_t join(std::size_t a, std::size_t b) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return a;
  }

  std::size_t size(std::size_t root) const { return size_[root]; }
  float& internal(std::size_t root) { return internal_[root]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::vector<float> internal_;
};

struct Edge {
  float w;
  std::uint32_t a;
  std::uint32_t b;
  std::uint8_t dir;
};

std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

// Relabels by first occurrence in raster order.
std::size_t compact_labels(std::vector<std::int64_t>& labels) {
  std::vector<std::int64_t> remap(labels.size(), -1);
  std::int64_t next = 0;
  for (auto& l : labels) {
    auto& r = remap[static_cast<std::size_t>(l)];
    if (r < 0) r = next++;
    l = r;
  }
  return static_cast<std::size_t>(next);
}

// Splits labels into 4-connected components; returns component ids
// (first-occurrence order) and their count.
std::size_t four_connected_components(const std::vector<std::int64_t>& labels, std::size_t h, std::size_t w,
                                      std::vector<std::int64_t>& comp) {
  comp.assign(labels.size(), -1);
  std::int64_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (comp[start] >= 0) continue;
    comp[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      const std::size_t y = p / w, x = p % w;
      auto visit = [&](std::size_t q) {
        if (comp[q] < 0 && labels[q] == labels[p]) {
          comp[q] = next;
          stack.push_back(q);
        }
      };
      if (x > 0) visit(p - 1);
      if (x + 1 < w) visit(p + 1);
      if (y > 0) visit(p - w);
      if (y + 1 < h) visit(p + w);
    }
    ++next;
  }
  return static_cast<std::size_t>(next);
}

}  // namespace

Tensor SuperpixelMap::to_tensor() const { return Tensor({height, width}, labels); }

double EdgeWeightField::max_weight() const {
  double m = 0.0;
  for (double v : horizontal) m = std::max(m, v);
  for (double v : vertical) m = std::max(m, v);
  return m;
}

std::vector<float> gaussian_smooth(const Tensor& image, float sigma) {
  const std::size_t h = image.dim(0), w = image.dim(1);
  const auto px = image.u8();
  std::vector<float> src(px.begin(), px.end());
  if (sigma <= 0.0f) return src;

  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0f * sigma));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (std::ptrdiff_t i = -radius; i <= radius; ++i)
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5f * static_cast<float>(i * i) / (sigma * sigma));
  const float total = std::accumulate(kernel.begin(), kernel.end(), 0.0f);
  for (auto& k : kernel) k /= total;

  std::vector<float> tmp(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const auto xx = reflect(static_cast<std::ptrdiff_t>(x) + i, w);
          acc += kernel[static_cast<std::size_t>(i + radius)] * src[(y * w + xx) * 3 + c];
        }
        tmp[(y * w + x) * 3 + c] = acc;
      }
  std::vector<float> out(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        float acc = 0.0f;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          const auto yy = reflect(static_cast<std::ptrdiff_t>(y) + i, h);
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[(yy * w + x) * 3 + c];
        }
        out[(y * w + x) * 3 + c] = acc;
      }
  return out;
}

SuperpixelMap segment_felzenszwalb(const Tensor& image, const SuperpixelParams& params) {
  if (image.dtype() != DType::u8 || image.ndim() != 3 || image.dim(2) != 3)
    throw Error(ErrorCode::ShapeMismatch, "image must be u8 H x W x 3, got " + image.shape_string());
  const std::size_t h = image.dim(0), w = image.dim(1);
  if (h == 0 || w == 0) throw Error(ErrorCode::EmptyImage, "image has no pixels");
  if (!(params.scale > 0.0f) || params.min_size < 1 || params.sigma < 0.0f)
    throw Error(ErrorCode::InvalidArgument, "need scale > 0, min_size >= 1, sigma >= 0");
  const std::size_t n = h * w;

  const auto smooth = gaussian_smooth(image, params.sigma);
  auto dist = [&](std::size_t p, std::size_t q) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < 3; ++c) {
      const float d = smooth[p * 3 + c] - smooth[q * 3 + c];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  // 8-connectivity: right, down, down-right, up-right.
  std::vector<Edge> edges;
  edges.reserve(4 * n);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto p = static_cast<std::uint32_t>(y * w + x);
      auto add = [&](std::size_t q, std::uint8_t dir) {
        edges.push_back({dist(p, q), p, static_cast<std::uint32_t>(q), dir});
      };
      if (x + 1 < w) add(p + 1, 0);
      if (y + 1 < h) add(p + w, 1);
      if (x + 1 < w && y + 1 < h) add(p + w + 1, 2);
      if (x + 1 < w && y > 0) add(p - w + 1, 3);
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) {
    if (l.w != r.w) return l.w < r.w;
    if (l.a != r.a) return l.a < r.a;
    return l.dir < r.dir;
  });

  DisjointSet sets(n);
  const float k = params.scale;
  for (const auto& e : edges) {
    const auto a = sets.find(e.a), b = sets.find(e.b);
    if (a == b) continue;
    const float ta = sets.internal(a) + k / static_cast<float>(sets.size(a));
    const float tb = sets.internal(b) + k / static_cast<float>(sets.size(b));
    if (e.w <= std::min(ta, tb)) {
      const auto root = sets.join(a, b);
      // Edges arrive in ascending order, so e.w is the new maximum internal weight.
      sets.internal(root) = e.w;
    }
  }
  for (const auto& e : edges) {
    const auto a = sets.find(e.a), b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) sets.join(a, b);
  }

  SuperpixelMap sp{h, w, 0, std::vector<std::int64_t>(n)};
  for (std::size_t p = 0; p < n; ++p) sp.labels[p] = static_cast<std::int64_t>(sets.find(p));

  // Diagonal-only attachments break 4-connectivity; split them and fold
  // undersized pieces into the 4-neighbour across the cheapest edge.
  for (;;) {
    std::vector<std::int64_t> comp;
    const std::size_t count = four_connected_components(sp.labels, h, w, comp);
    std::vector<std::size_t> sizes(count, 0);
    for (auto c : comp) ++sizes[static_cast<std::size_t>(c)];

    // Cheapest 4-edge from each undersized component to a different component.
    std::vector<float> best_w(count, std::numeric_limits<float>::infinity());
    std::vector<std::int64_t> best_to(count, -1);
    bool any_small = false;
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t y = p / w, x = p % w;
      const auto cp = static_cast<std::size_t>(comp[p]);
      if (sizes[cp] >= params.min_size) continue;
      any_small = true;
      auto consider = [&](std::size_t q) {
        if (comp[q] == comp[p]) return;
        const float d = dist(p, q);
        if (d < best_w[cp] || (d == best_w[cp] && comp[q] < best_to[cp])) {
          best_w[cp] = d;
          best_to[cp] = comp[q];
        }
      };
      if (x > 0) consider(p - 1);
      if (x + 1 < w) consider(p + 1);
      if (y > 0) consider(p - w);
      if (y + 1 < h) consider(p + w);
    }

    if (!any_small || count == 1) {
      sp.labels = std::move(comp);
      sp.num_segments = count;
      break;
    }
    // Merge the smallest undersized component first (lowest id on ties); one
    // merge per pass keeps the result order-independent.
    std::size_t pick = count;
    for (std::size_t c = 0; c < count; ++c) {
      if (sizes[c] >= params.min_size || best_to[c] < 0) continue;
      if (pick == count || sizes[c] < sizes[pick]) pick = c;
    }
    if (pick == count) {
      sp.labels = std::move(comp);
      sp.num_segments = count;
      break;
    }
    const auto target = best_to[pick];
    for (std::size_t p = 0; p < n; ++p)
      sp.labels[p] = comp[p] == static_cast<std::int64_t>(pick) ? target : comp[p];
  }
  sp.num_segments = compact_labels(sp.labels);
  return sp;
}

EdgeWeightField build_edge_weights(const SuperpixelMap& sp, double w_in, double w_cross) {
  if (!(w_in > 0.0) || !(w_cross > 0.0)) throw Error(ErrorCode::InvalidArgument, "edge weights must be positive");
  const std::size_t h = sp.height, w = sp.width;
  EdgeWeightField f{h, w, {}, {}};
  f.horizontal.resize(h * (w > 0 ? w - 1 : 0));
  f.vertical.resize((h > 0 ? h - 1 : 0) * w);
  // w_cross + (w_in - w_cross) * [a == b], selected directly so the two values are exact.
  auto weight = [&](std::int64_t a, std::int64_t b) { return a == b ? w_in : w_cross; };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x + 1 < w; ++x) f.horizontal[y * (w - 1) + x] = weight(sp.at(y, x), sp.at(y, x + 1));
  for (std::size_t y = 0; y + 1 < h; ++y)
    for (std::size_t x = 0; x < w; ++x) f.vertical[y * w + x] = weight(sp.at(y, x), sp.at(y + 1, x));
  return f;
}

}  // namespace segrefine
