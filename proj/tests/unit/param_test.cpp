#include <doctest.h>

#include <cmath>

#include "noir/error.hpp"
#include "noir/param.hpp"
#include "noir/random.hpp"

using namespace noir;
using namespace noir::param;

namespace {

FeatureMap random_map(int c, int h, int w, std::uint64_t seed) {
  FeatureMap m(c, h, w, w * 4, h * 4);
  Rng rng(seed);
  std::normal_distribution<float> n;
  for (auto& v : m.data) v = n(rng);
  return m;
}

// Test map whose content is the train map moved by (dr, dc); vacated cells
// get fresh noise.
FeatureMap shifted(const FeatureMap& src, int dr, int dc, std::uint64_t seed) {
  auto out = random_map(src.channels, src.height, src.width, seed);
  for (int ch = 0; ch < src.channels; ++ch)
    for (int r = 0; r < src.height; ++r)
      for (int c = 0; c < src.width; ++c) {
        const int rr = r + dr, cc = c + dc;
        if (rr >= 0 && rr < src.height && cc >= 0 && cc < src.width) out.at(ch, rr, cc) = src.at(ch, r, c);
      }
  return out;
}

}  // namespace

TEST_CASE("image and grid coordinates map proportionally") {
  FeatureMap m(1, 75, 100, 360, 240);
  CHECK(m.cell_width() == doctest::Approx(3.6));
  CHECK(m.cell_height() == doctest::Approx(3.2));
  const Cell c = image_to_cell({10.0, 10.0}, m);
  CHECK(c.row == 3);
  CHECK(c.col == 2);
  const auto p = cell_to_image(c, m);
  CHECK(p.x == doctest::Approx(9.0));
  CHECK(p.y == doctest::Approx(11.2));
  CHECK(image_to_cell(p, m) == c);
}

TEST_CASE("a map matched against itself returns the query cell") {
  const auto m = random_map(8, 20, 30, 1);
  for (int r = 1; r < 19; r += 4)
    for (int c = 1; c < 29; c += 5) {
      const auto p = cell_to_image({r, c}, m);
      const auto hit = match_point(m, p, m);
      CHECK(hit.cell == Cell{r, c});
      CHECK(hit.similarity == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("a translated map moves the match by the same number of cells") {
  const auto train = random_map(16, 30, 40, 2);
  const auto test = shifted(train, 4, -7, 3);
  const auto hit = match_point(train, cell_to_image({12, 20}, train), test);
  CHECK(hit.cell == Cell{16, 13});
}

TEST_CASE("optimized search equals the brute-force scan") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = random_map(4, 12, 15, 10 + s), b = random_map(4, 12, 15, 100 + s);
    const ParamPoint p{static_cast<double>(s * 7 % 60), static_cast<double>(s * 5 % 48)};
    const auto fast = match_point(a, p, b), slow = match_point_naive(a, p, b);
    CHECK(fast.cell == slow.cell);
    CHECK(fast.similarity == doctest::Approx(slow.similarity).epsilon(1e-5));
  }
}

TEST_CASE("border train points are clamped inward") {
  const auto m = random_map(4, 10, 10, 4);
  const auto hit = match_point(m, {0.0, 0.0}, m);
  CHECK(hit.cell == Cell{1, 1});
}

TEST_CASE("mismatched channel counts are rejected") {
  CHECK_THROWS_AS(match_point(random_map(4, 10, 10, 1), {5, 5}, random_map(3, 10, 10, 1)), Error);
}

TEST_CASE("baselines stay inside the image and the object masks") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto p = baseline_random(360, 240, s);
    CHECK(p.x >= 0);
    CHECK(p.x < 360);
    CHECK(p.y >= 0);
    CHECK(p.y < 240);
  }
  Mask a{10, 10, std::vector<std::uint8_t>(100, 0)};
  a.on[3 * 10 + 4] = 1;
  Mask b = a;
  b.on.assign(100, 0);
  b.on[7 * 10 + 1] = 1;
  const auto u = mask_union({a, b});
  CHECK(u.at(4, 3));
  CHECK(u.at(1, 7));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto p = baseline_on_objects({a, b}, s);
    CHECK(u.at(static_cast<int>(p.x), static_cast<int>(p.y)));
  }
}

TEST_CASE("closed-form random baseline matches sampling") {
  const ParamPoint t{100, 50};
  double acc = 0;
  const int n = 20000;
  for (int s = 0; s < n; ++s) {
    const auto p = baseline_random(360, 240, static_cast<std::uint64_t>(s));
    acc += (p.x - t.x) * (p.x - t.x) + (p.y - t.y) * (p.y - t.y);
  }
  CHECK(acc / n == doctest::Approx(random_baseline_expected_sq(t, 360, 240)).epsilon(0.03));
}

TEST_CASE("identity pairs have zero matching error") {
  ParamCorpusConfig cfg;
  const auto p = make_identity_pair(cfg, 5);
  const auto hit = match_point(p.train_map, p.train_point, p.test_map);
  CHECK(std::hypot(hit.point.x - p.truth.x, hit.point.y - p.truth.y) == 0.0);
}

TEST_CASE("corpus pairs cycle through the variations") {
  ParamCorpusConfig cfg;
  CHECK(make_param_pair(cfg, 0, 1).variation == PairVariation::position);
  CHECK(make_param_pair(cfg, 4, 1).variation == PairVariation::combined);
  CHECK(make_param_pair(cfg, 5, 1).variation == PairVariation::position);
  const auto a = make_param_pair(cfg, 2, 9), b = make_param_pair(cfg, 2, 9);
  CHECK(a.test_map.data == b.test_map.data);
  CHECK(pair_variation_from_string(to_string(PairVariation::context)) == PairVariation::context);
}

TEST_CASE("layouts render deterministically and depend on their objects") {
  ParamCorpusConfig cfg;
  SceneLayout l{0, {{"cup", 100, 80, 0.0, 20, 12, 0}}};
  const auto a = render_layout(cfg, l, 1, 2), b = render_layout(cfg, l, 1, 2);
  CHECK(a.data == b.data);
  l.items[0].x += 40;
  CHECK(render_layout(cfg, l, 1, 2).data != a.data);
}
