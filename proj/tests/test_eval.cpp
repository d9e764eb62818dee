#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "segrefine/error.hpp"
#include "segrefine/eval.hpp"

using namespace segrefine;

namespace {

Tensor labels(std::size_t h, std::size_t w, std::vector<std::int64_t> v) { return Tensor({h, w}, std::move(v)); }

}  // namespace

TEST_CASE("perfect prediction fills the diagonal") {
  ConfusionMatrix cm(3);
  const auto gt = labels(2, 3, {0, 1, 2, 2, 1, 0});
  cm.accumulate(gt, gt);
  CHECK(cm.total() == 6);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(cm.at(i, j) == (i == j ? 2 : 0));
  const auto r = miou(cm);
  CHECK(r.mean == doctest::Approx(1.0));
  for (const auto& iou : r.per_class) CHECK(*iou == doctest::Approx(1.0));
}

TEST_CASE("hand counted 2x2 case") {
  ConfusionMatrix cm(2);
  cm.accumulate(labels(2, 2, {0, 1, 1, 1}), labels(2, 2, {0, 0, 1, 1}));
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 2);
  const auto r = miou(cm);
  CHECK(*r.per_class[0] == doctest::Approx(0.5));
  CHECK(*r.per_class[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.mean == doctest::Approx(7.0 / 12.0));
}

TEST_CASE("ignore label contributes nothing") {
  ConfusionMatrix cm(2, 255);
  cm.accumulate(labels(1, 3, {0, 1, 1}), labels(1, 3, {255, 255, 255}));
  CHECK(cm.total() == 0);
  cm.accumulate(labels(1, 2, {1, 7}), labels(1, 2, {1, 255}));  // prediction under ignore is not checked
  CHECK(cm.total() == 1);
}

TEST_CASE("absent classes are excluded from the mean") {
  ConfusionMatrix cm(3);
  cm.accumulate(labels(1, 2, {0, 1}), labels(1, 2, {0, 1}));
  const auto r = miou(cm);
  CHECK_FALSE(r.per_class[2].has_value());
  CHECK(r.mean == doctest::Approx(1.0));
  const auto j = metrics_json(r, {"a", "b", "c"});
  CHECK(j["per_class_iou"]["c"].is_null());
  CHECK(j["pixels_evaluated"] == 2);
}

TEST_CASE("out of range labels are rejected without side effects") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(cm.accumulate(labels(1, 2, {0, 2}), labels(1, 2, {0, 1})), Error);
  CHECK_THROWS_AS(cm.accumulate(labels(1, 2, {0, 1}), labels(1, 2, {0, -1})), Error);
  CHECK(cm.total() == 0);
  CHECK_THROWS_AS(cm.accumulate(labels(1, 2, {0, 1}), labels(2, 1, {0, 1})), Error);
}

TEST_CASE("properties on random label maps") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng() % 4, h = 1 + rng() % 6, w = 1 + rng() % 6;
    std::vector<std::int64_t> p(h * w), g(h * w);
    for (auto& v : p) v = static_cast<std::int64_t>(rng() % k);
    for (auto& v : g) v = rng() % 7 == 0 ? 255 : static_cast<std::int64_t>(rng() % k);

    ConfusionMatrix whole(k);
    whole.accumulate(labels(h, w, p), labels(h, w, g));
    const auto r = miou(whole);
    for (const auto& iou : r.per_class)
      if (iou) CHECK((*iou >= 0.0 && *iou <= 1.0));

    // Tile additivity: split rows at a random cut.
    const std::size_t cut = rng() % (h + 1);
    ConfusionMatrix tiles(k);
    if (cut > 0)
      tiles.accumulate(labels(cut, w, {p.begin(), p.begin() + cut * w}), labels(cut, w, {g.begin(), g.begin() + cut * w}));
    if (cut < h)
      tiles.accumulate(labels(h - cut, w, {p.begin() + cut * w, p.end()}),
                       labels(h - cut, w, {g.begin() + cut * w, g.end()}));
    CHECK(tiles == whole);

    // Relabelling classes permutes IoUs and keeps the mean.
    std::vector<std::int64_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto apply = [&](std::vector<std::int64_t> v) {
      for (auto& x : v)
        if (x != 255) x = perm[static_cast<std::size_t>(x)];
      return v;
    };
    ConfusionMatrix permuted(k);
    permuted.accumulate(labels(h, w, apply(p)), labels(h, w, apply(g)));
    const auto rp = miou(permuted);
    CHECK(rp.mean == doctest::Approx(r.mean).epsilon(1e-12));
    for (std::size_t c = 0; c < k; ++c) {
      const auto& a = r.per_class[c];
      const auto& b = rp.per_class[static_cast<std::size_t>(perm[c])];
      REQUIRE(a.has_value() == b.has_value());
      if (a) CHECK(*a == doctest::Approx(*b));
    }
  }
}
