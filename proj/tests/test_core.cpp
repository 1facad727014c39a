#include <doctest.h>

#include <cmath>
#include <random>

#include "spg/core.hpp"

using namespace spg;

namespace {

LocalizationMap random_map(std::mt19937& gen, int h, int w) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  LocalizationMap m(h, w);
  for (auto& v : m.scores) v = u(gen);
  return m;
}

// Area of the intersection and union by counting unit cells of the integer lattice.
double lattice_iou(const BBox& a, const BBox& b) {
  long inter = 0, uni = 0;
  for (int y = -20; y < 40; ++y)
    for (int x = -20; x < 40; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool in_a = cx > a.x0 && cx < a.x1 && cy > a.y0 && cy < a.y1;
      const bool in_b = cx > b.x0 && cx < b.x1 && cy > b.y0 && cy < b.y1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return static_cast<double>(inter) / uni;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("normalize_map: min-max examples") {
  CHECK(normalize_map(LocalizationMap(2, 2, {2, 6, 4, 2})).scores == std::vector<float>{0, 1, 0.5f, 0});
  CHECK(normalize_map(LocalizationMap(1, 2, {3, 3})).scores == std::vector<float>{0, 0});
  CHECK(normalize_map(LocalizationMap(1, 2, {0, 1})).scores == std::vector<float>{0, 1});
}

TEST_CASE("normalize_map rejects non-finite input") {
  CHECK_THROWS_AS(normalize_map(LocalizationMap(1, 2, {0, NAN})), Error);
  CHECK_THROWS_AS(normalize_map(LocalizationMap(1, 2, {0, INFINITY})), Error);
}

TEST_CASE("resize_bilinear: identity and midpoint") {
  const LocalizationMap m(2, 2, {0, 1, 0, 1});
  CHECK(resize_bilinear(m, 2, 2).scores == m.scores);
  const auto r = resize_bilinear(LocalizationMap(1, 2, {0, 1}), 1, 3);
  REQUIRE(r.scores.size() == 3);
  CHECK(r.scores[0] == 0.0f);
  CHECK(r.scores[1] == doctest::Approx(0.5));
  CHECK(r.scores[2] == 1.0f);
}

TEST_CASE("resize_bilinear matches a direct corner-aligned formula") {
  std::mt19937 gen(11);
  const LocalizationMap src = random_map(gen, 7, 5);
  const int oh = 14, ow = 10;
  const auto out = resize_bilinear(src, oh, ow);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      // Output corners coincide with input corners.
      const double sy = i * (7.0 - 1) / (oh - 1), sx = j * (5.0 - 1) / (ow - 1);
      const int y0 = std::min(static_cast<int>(sy), 5), x0 = std::min(static_cast<int>(sx), 3);
      const double fy = sy - y0, fx = sx - x0;
      const double expect = (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x0 + 1)) +
                            fy * ((1 - fx) * src.at(y0 + 1, x0) + fx * src.at(y0 + 1, x0 + 1));
      CHECK(out.at(i, j) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("resize_nearest: identity, replication, containing-cell oracle") {
  const GuidanceMask m(2, 2, {0, 255, 1, 0});
  CHECK(resize_nearest(m, 2, 2) == m);
  const auto rep = resize_nearest(GuidanceMask(1, 1, {255}), 3, 3);
  CHECK(rep.count(255) == 9);

  GuidanceMask checker(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) checker.at(y, x) = static_cast<uint8_t>((x + y) % 2);
  for (auto [oh, ow] : {std::pair{2, 2}, std::pair{3, 5}, std::pair{7, 7}, std::pair{1, 4}}) {
    const auto r = resize_nearest(checker, oh, ow);
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j) {
        // Source cell whose unit interval contains the output cell centre.
        const double cy = (i + 0.5) * 4.0 / oh, cx = (j + 0.5) * 4.0 / ow;
        int sy = -1, sx = -1;
        for (int k = 0; k < 4; ++k) {
          if (cy >= k && cy < k + 1) sy = k;
          if (cx >= k && cx < k + 1) sx = k;
        }
        CHECK(r.at(i, j) == checker.at(sy, sx));
      }
  }
}

TEST_CASE("iou examples and lattice oracle") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0));
  std::mt19937 gen(3);
  std::uniform_int_distribution<int> c(0, 15);
  for (int t = 0; t < 200; ++t) {
    int a0 = c(gen), a1 = c(gen), b0 = c(gen), b1 = c(gen);
    int a2 = c(gen), a3 = c(gen), b2 = c(gen), b3 = c(gen);
    if (a0 == a1 || a2 == a3 || b0 == b1 || b2 == b3) continue;
    const BBox a{double(std::min(a0, a1)), double(std::min(a2, a3)), double(std::max(a0, a1)), double(std::max(a2, a3))};
    const BBox b{double(std::min(b0, b1)), double(std::min(b2, b3)), double(std::max(b0, b1)), double(std::max(b2, b3))};
    CHECK(iou(a, b) == doctest::Approx(lattice_iou(a, b)));
  }
}

TEST_CASE("iou rejects degenerate boxes") {
  CHECK_THROWS_AS(iou({0, 0, 0, 1}, {0, 0, 1, 1}), Error);
}

TEST_CASE("thresholds and masks validate their invariants") {
  CHECK_THROWS_AS((Thresholds{0.6, 0.5}.validate()), Error);
  CHECK_THROWS_AS((Thresholds{-0.1, 0.5}.validate()), Error);
  CHECK_NOTHROW((Thresholds{0.05, 0.5}.validate()));
  CHECK_THROWS_AS(GuidanceMask(1, 2, {0, 7}), Error);
  CHECK_THROWS_AS(LocalizationMap(2, 2, {1, 2, 3}), Error);
}

}  // TEST_SUITE
