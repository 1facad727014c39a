// Brute-force component oracle: repeated breadth-first flood fill.
#ifndef SPG_TESTS_FLOOD_FILL_HPP_
#define SPG_TESTS_FLOOD_FILL_HPP_

#include <algorithm>
#include <queue>
#include <vector>

#include "spg/core.hpp"

namespace spg::testing {

inline std::vector<BBox> flood_fill_boxes(const LocalizationMap& m, double threshold, int k) {
  const int h = m.height, w = m.width;
  std::vector<int> seen(static_cast<size_t>(h) * w, 0);
  struct Found {
    BBox box;
    int size;
    int order;
  };
  std::vector<Found> found;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      if (seen[sy * w + sx] || m.at(sy, sx) < threshold) continue;
      Found f{{double(sx), double(sy), double(sx + 1), double(sy + 1)}, 0, static_cast<int>(found.size())};
      std::queue<std::pair<int, int>> q;
      q.push({sy, sx});
      seen[sy * w + sx] = 1;
      while (!q.empty()) {
        const auto [y, x] = q.front();
        q.pop();
        ++f.size;
        f.box.x0 = std::min(f.box.x0, double(x));
        f.box.y0 = std::min(f.box.y0, double(y));
        f.box.x1 = std::max(f.box.x1, double(x + 1));
        f.box.y1 = std::max(f.box.y1, double(y + 1));
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w || seen[ny * w + nx] || m.at(ny, nx) < threshold) continue;
            seen[ny * w + nx] = 1;
            q.push({ny, nx});
          }
      }
      found.push_back(f);
    }
  if (found.empty()) return {BBox{0, 0, double(w), double(h)}};
  std::sort(found.begin(), found.end(),
            [](const Found& a, const Found& b) { return a.size != b.size ? a.size > b.size : a.order < b.order; });
  std::vector<BBox> out;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(found.size())); ++i) out.push_back(found[i].box);
  return out;
}

}  // namespace spg::testing

#endif  // SPG_TESTS_FLOOD_FILL_HPP_
