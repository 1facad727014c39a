#ifndef SPG_CORE_HPP_
#define SPG_CORE_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spg {

enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kOutOfRange = 3,
  kIo = 4,
  kFormat = 5,
  kDiverged = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

// Row-major 2-D grid of real-valued scores (attention maps, branch outputs).
struct LocalizationMap {
  int height = 0;
  int width = 0;
  std::vector<float> scores;

  LocalizationMap() = default;
  LocalizationMap(int h, int w, float fill = 0.0f);
  LocalizationMap(int h, int w, std::vector<float> values);

  float& at(int y, int x) { return scores[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return scores[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return scores.size(); }
  bool operator==(const LocalizationMap&) const = default;
};

// Tri-state pixel label.
namespace label {
inline constexpr uint8_t kBackground = 0;
inline constexpr uint8_t kForeground = 1;
inline constexpr uint8_t kIgnore = 255;
}  // namespace label

struct GuidanceMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;

  GuidanceMask() = default;
  GuidanceMask(int h, int w, uint8_t fill = label::kIgnore);
  GuidanceMask(int h, int w, std::vector<uint8_t> values);

  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return labels.size(); }
  size_t count(uint8_t value) const;
  bool operator==(const GuidanceMask&) const = default;
};

// Half-open box [x0, x1) x [y0, y1) in continuous image coordinates.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool valid() const;
  bool operator==(const BBox&) const = default;
};

struct Thresholds {
  double low = 0.05;   // below: background
  double high = 0.5;   // above: foreground

  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

// Min-max rescale into [0, 1]; a constant map becomes all zeros.
LocalizationMap normalize_map(const LocalizationMap& map);

// Corner-aligned bilinear resampling.
LocalizationMap resize_bilinear(const LocalizationMap& map, int out_h, int out_w);

// Nearest-neighbour resampling; never invents labels.
GuidanceMask resize_nearest(const GuidanceMask& mask, int out_h, int out_w);

double iou(const BBox& a, const BBox& b);

}  // namespace spg

#endif  // SPG_CORE_HPP_
