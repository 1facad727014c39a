#include "spg/core.hpp"

#include <algorithm>
#include <cmath>

namespace spg {

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

LocalizationMap::LocalizationMap(int h, int w, float fill) : height(h), width(w) {
  if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "map dimensions must be >= 1");
  scores.assign(static_cast<size_t>(h) * w, fill);
}

LocalizationMap::LocalizationMap(int h, int w, std::vector<float> values)
    : height(h), width(w), scores(std::move(values)) {
  if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "map dimensions must be >= 1");
  if (scores.size() != static_cast<size_t>(h) * w)
    fail(ErrorCode::kShapeMismatch, "map payload does not match dimensions");
}

GuidanceMask::GuidanceMask(int h, int w, uint8_t fill) : height(h), width(w) {
  if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "mask dimensions must be >= 1");
  labels.assign(static_cast<size_t>(h) * w, fill);
}

GuidanceMask::GuidanceMask(int h, int w, std::vector<uint8_t> values)
    : height(h), width(w), labels(std::move(values)) {
  if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "mask dimensions must be >= 1");
  if (labels.size() != static_cast<size_t>(h) * w)
    fail(ErrorCode::kShapeMismatch, "mask payload does not match dimensions");
  for (uint8_t v : labels)
    if (v != label::kBackground && v != label::kForeground && v != label::kIgnore)
      fail(ErrorCode::kInvalidArgument, "mask label outside {0,1,255}");
}

size_t GuidanceMask::count(uint8_t value) const {
  return static_cast<size_t>(std::count(labels.begin(), labels.end(), value));
}

bool BBox::valid() const {
  return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1) &&
         x0 < x1 && y0 < y1;
}

void Thresholds::validate() const {
  if (!(0.0 < low && low < high && high < 1.0))
    fail(ErrorCode::kInvalidArgument, "thresholds must satisfy 0 < low < high < 1");
}

LocalizationMap normalize_map(const LocalizationMap& map) {
  if (map.scores.empty()) fail(ErrorCode::kInvalidArgument, "cannot normalize an empty map");
  float lo = map.scores.front();
  float hi = lo;
  for (float v : map.scores) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "map contains non-finite values");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  LocalizationMap out(map.height, map.width, 0.0f);
  if (hi == lo) return out;
  const double range = static_cast<double>(hi) - lo;
  for (size_t i = 0; i < map.size(); ++i) {
    double v = (static_cast<double>(map.scores[i]) - lo) / range;
    out.scores[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

namespace {

void check_target(int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    fail(ErrorCode::kInvalidArgument, "resize target dimensions must be >= 1");
}

// Source coordinate of output index i for corner-aligned sampling.
double aligned_coord(int i, int in, int out) {
  if (out == 1 || in == 1) return 0.0;
  return static_cast<double>(i) * (in - 1) / (out - 1);
}

int nearest_index(int i, int in, int out) {
  int s = static_cast<int>(std::floor((i + 0.5) * in / out));
  return std::clamp(s, 0, in - 1);
}

}  // namespace

LocalizationMap resize_bilinear(const LocalizationMap& map, int out_h, int out_w) {
  check_target(out_h, out_w);
  if (out_h == map.height && out_w == map.width) return map;
  LocalizationMap out(out_h, out_w, 0.0f);
  for (int y = 0; y < out_h; ++y) {
    const double sy = aligned_coord(y, map.height, out_h);
    const int y0 = std::min(static_cast<int>(sy), map.height - 1);
    const int y1 = std::min(y0 + 1, map.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = aligned_coord(x, map.width, out_w);
      const int x0 = std::min(static_cast<int>(sx), map.width - 1);
      const int x1 = std::min(x0 + 1, map.width - 1);
      const double fx = sx - x0;
      const double top = (1.0 - fx) * map.at(y0, x0) + fx * map.at(y0, x1);
      const double bottom = (1.0 - fx) * map.at(y1, x0) + fx * map.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - fy) * top + fy * bottom);
    }
  }
  return out;
}

GuidanceMask resize_nearest(const GuidanceMask& mask, int out_h, int out_w) {
  check_target(out_h, out_w);
  if (out_h == mask.height && out_w == mask.width) return mask;
  GuidanceMask out(out_h, out_w, label::kIgnore);
  for (int y = 0; y < out_h; ++y) {
    const int sy = nearest_index(y, mask.height, out_h);
    for (int x = 0; x < out_w; ++x) out.at(y, x) = mask.at(sy, nearest_index(x, mask.width, out_w));
  }
  return out;
}

double iou(const BBox& a, const BBox& b) {
  if (!a.valid() || !b.valid()) fail(ErrorCode::kInvalidArgument, "iou of a degenerate box");
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace spg
