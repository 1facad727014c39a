#include "spg/localization.hpp"

#include <algorithm>
#include <numeric>

#include "spg/evaluation.hpp"

namespace spg {

namespace {

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void unite(std::vector<int>& parent, int a, int b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b)
    parent[b] = a;
  else
    parent[a] = b;
}

}  // namespace

std::vector<Component> extract_components(const LocalizationMap& map, double threshold, int k) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::kInvalidArgument, "threshold must be in (0,1)");
  if (k < 1) fail(ErrorCode::kInvalidArgument, "k must be >= 1");
  const int h = map.height, w = map.width;
  const int n = h * w;
  std::vector<uint8_t> fg(n);
  for (int i = 0; i < n; ++i) fg[i] = map.scores[i] >= threshold;

  // Two-pass union-find over the already-visited 8-neighbours.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (!fg[i]) continue;
      if (x > 0 && fg[i - 1]) unite(parent, i, i - 1);
      if (y > 0) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          if (nx >= 0 && nx < w && fg[i - w + dx]) unite(parent, i, i - w + dx);
        }
      }
    }

  std::vector<Component> comps;
  std::vector<int> slot(n, -1);
  for (int i = 0; i < n; ++i) {
    if (!fg[i]) continue;
    const int root = find_root(parent, i);
    const int y = i / w, x = i % w;
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(comps.size());
      comps.push_back({{double(x), double(y), double(x + 1), double(y + 1)}, 0, static_cast<size_t>(i)});
    }
    Component& c = comps[slot[root]];
    ++c.size;
    c.box.x0 = std::min(c.box.x0, double(x));
    c.box.y0 = std::min(c.box.y0, double(y));
    c.box.x1 = std::max(c.box.x1, double(x + 1));
    c.box.y1 = std::max(c.box.y1, double(y + 1));
  }
  if (comps.empty()) return {Component{{0.0, 0.0, double(w), double(h)}, 0, 0}};
  // comps is already in first-cell raster order, so a stable sort keeps ties ordered.
  std::stable_sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) { return a.size > b.size; });
  if (comps.size() > static_cast<size_t>(k)) comps.resize(k);
  return comps;
}

std::vector<BBox> extract_bboxes(const LocalizationMap& map, double threshold, int k) {
  std::vector<BBox> boxes;
  for (const Component& c : extract_components(map, threshold, k)) boxes.push_back(c.box);
  return boxes;
}

std::vector<double> threshold_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(i / 20.0);
  return grid;
}

GridSearchResult grid_search_threshold(std::span<const CalibrationSample> samples) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "grid search needs a non-empty validation set");
  GridSearchResult result;
  result.accuracy = -1.0;
  for (double t : threshold_grid()) {
    size_t correct = 0;
    for (const auto& s : samples) {
      const BBox box = extract_bboxes(s.map, t, 1).front();
      if (is_correct(0, box, 0, s.gt_boxes)) ++correct;
    }
    const double acc = static_cast<double>(correct) / samples.size();
    result.accuracies.push_back(acc);
    if (acc > result.accuracy) {
      result.accuracy = acc;
      result.threshold = t;
    }
  }
  return result;
}

}  // namespace spg
