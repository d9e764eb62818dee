#include <doctest.h>

#include <queue>
#include <random>
#include <set>

#include "segrefine/error.hpp"
#include "segrefine/superpixel.hpp"

using namespace segrefine;

namespace {

Tensor uniform_image(std::size_t h, std::size_t w, std::uint8_t v) {
  return Tensor({h, w, 3}, std::vector<std::uint8_t>(h * w * 3, v));
}

Tensor two_tone(std::size_t n) {
  std::vector<std::uint8_t> px(n * n * 3);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) px[(y * n + x) * 3 + c] = 2 * x < n ? 0 : 255;
  return Tensor({n, n, 3}, std::move(px));
}

Tensor random_image(std::mt19937& rng, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> px(h * w * 3);
  // Coarse blocks plus noise so segment counts vary with scale.
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        px[(y * w + x) * 3 + c] = static_cast<std::uint8_t>(((x / 3 + y / 3 + c) % 4) * 60 + rng() % 20);
  return Tensor({h, w, 3}, std::move(px));
}

// Every segment id must be reachable by 4-neighbour BFS from one seed.
bool segments_are_4_connected(const SuperpixelMap& sp) {
  std::vector<bool> seen(sp.labels.size(), false);
  std::set<std::int64_t> started;
  for (std::size_t s = 0; s < sp.labels.size(); ++s) {
    if (seen[s]) continue;
    if (!started.insert(sp.labels[s]).second) return false;  // second component with this id
    std::queue<std::size_t> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      const auto p = q.front();
      q.pop();
      const std::size_t y = p / sp.width, x = p % sp.width;
      auto push = [&](std::size_t n) {
        if (!seen[n] && sp.labels[n] == sp.labels[p]) {
          seen[n] = true;
          q.push(n);
        }
      };
      if (x > 0) push(p - 1);
      if (x + 1 < sp.width) push(p + 1);
      if (y > 0) push(p - sp.width);
      if (y + 1 < sp.height) push(p + sp.width);
    }
  }
  return true;
}

void check_valid(const SuperpixelMap& sp, std::size_t min_size) {
  std::vector<std::size_t> sizes(sp.num_segments, 0);
  for (auto l : sp.labels) {
    REQUIRE(l >= 0);
    REQUIRE(static_cast<std::size_t>(l) < sp.num_segments);
    ++sizes[static_cast<std::size_t>(l)];
  }
  for (auto s : sizes) {
    CHECK(s > 0);
    if (sp.labels.size() >= min_size) CHECK(s >= min_size);
  }
  CHECK(segments_are_4_connected(sp));
  // First-occurrence order.
  std::int64_t next = 0;
  for (auto l : sp.labels) {
    CHECK(l <= next);
    if (l == next) ++next;
  }
}

}  // namespace

TEST_CASE("uniform image is one segment") {
  const auto sp = segment_felzenszwalb(uniform_image(16, 16, 128), {100.0f, 1, 0.8f});
  CHECK(sp.num_segments == 1);
}

TEST_CASE("two-tone image splits exactly at the seam") {
  const auto sp = segment_felzenszwalb(two_tone(16), {10.0f, 1, 0.0f});
  REQUIRE(sp.num_segments == 2);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) CHECK(sp.at(y, x) == (x < 8 ? 0 : 1));
}

TEST_CASE("min_size forces undersized halves to merge") {
  const auto sp = segment_felzenszwalb(two_tone(16), {10.0f, 300, 0.0f});
  CHECK(sp.num_segments == 1);
}

TEST_CASE("argument and shape errors") {
  CHECK_THROWS_AS(segment_felzenszwalb(uniform_image(4, 4, 0), {0.0f, 1, 0.0f}), Error);
  CHECK_THROWS_AS(segment_felzenszwalb(uniform_image(4, 4, 0), {1.0f, 0, 0.0f}), Error);
  CHECK_THROWS_AS(segment_felzenszwalb(Tensor({4, 4}, std::vector<std::uint8_t>(16)), {}), Error);
}

TEST_CASE("single pixel image") {
  const auto sp = segment_felzenszwalb(uniform_image(1, 1, 3), {});
  CHECK(sp.num_segments == 1);
  const auto w = build_edge_weights(sp, 1.0, 0.1);
  CHECK(w.horizontal.empty());
  CHECK(w.vertical.empty());
}

TEST_CASE("diagonal-only attachments are split into 4-connected segments") {
  // Checkerboard: with 8-connectivity the white cells touch only diagonally.
  const std::size_t n = 6;
  std::vector<std::uint8_t> px(n * n * 3);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c) px[(y * n + x) * 3 + c] = (x + y) % 2 ? 255 : 0;
  const auto sp = segment_felzenszwalb(Tensor({n, n, 3}, std::move(px)), {1.0f, 1, 0.0f});
  check_valid(sp, 1);
}

TEST_CASE("random images satisfy the map invariants and are deterministic") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const auto img = random_image(rng, 5 + rng() % 20, 5 + rng() % 20);
    const SuperpixelParams params{static_cast<float>(20 + rng() % 300), 1 + rng() % 30, (rng() % 3) * 0.5f};
    const auto a = segment_felzenszwalb(img, params);
    check_valid(a, params.min_size);
    const auto b = segment_felzenszwalb(img, params);
    CHECK(a.labels == b.labels);
  }
}

TEST_CASE("larger scale never yields more segments") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = random_image(rng, 12, 12);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (float scale : {1.0f, 10.0f, 50.0f, 200.0f, 1000.0f, 10000.0f}) {
      const auto sp = segment_felzenszwalb(img, {scale, 1, 0.0f});
      CHECK(sp.num_segments <= previous);
      previous = sp.num_segments;
    }
  }
}

TEST_CASE("gaussian smoothing keeps constants and reflects at borders") {
  const auto img = uniform_image(5, 7, 90);
  for (float v : gaussian_smooth(img, 1.3f)) CHECK(v == doctest::Approx(90.0f));
  const auto raw = gaussian_smooth(img, 0.0f);
  CHECK(raw.size() == 5 * 7 * 3);
}

TEST_CASE("edge weights follow the superpixel indicator") {
  SUBCASE("single segment gives w_in everywhere") {
    const auto sp = segment_felzenszwalb(uniform_image(6, 6, 10), {});
    const auto w = build_edge_weights(sp, 1.0, 0.10);
    CHECK(w.horizontal.size() == 6 * 5);
    CHECK(w.vertical.size() == 5 * 6);
    for (double v : w.horizontal) CHECK(v == 1.0);
    for (double v : w.vertical) CHECK(v == 1.0);
  }
  SUBCASE("vertical split lowers only the seam column") {
    const auto sp = segment_felzenszwalb(two_tone(8), {10.0f, 1, 0.0f});
    const auto w = build_edge_weights(sp, 1.0, 0.10);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x + 1 < 8; ++x) CHECK(w.h(y, x) == (x == 3 ? 0.10 : 1.0));
    for (double v : w.vertical) CHECK(v == 1.0);
    std::set<double> distinct(w.horizontal.begin(), w.horizontal.end());
    CHECK(distinct.size() == 2);
  }
  SUBCASE("equal weights give a constant field") {
    const auto sp = segment_felzenszwalb(two_tone(8), {10.0f, 1, 0.0f});
    const auto w = build_edge_weights(sp, 0.5, 0.5);
    for (double v : w.horizontal) CHECK(v == 0.5);
    for (double v : w.vertical) CHECK(v == 0.5);
  }
  CHECK_THROWS_AS(build_edge_weights(SuperpixelMap{1, 1, 1, {0}}, 0.0, 1.0), Error);
}
