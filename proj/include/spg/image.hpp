#ifndef SPG_IMAGE_HPP_
#define SPG_IMAGE_HPP_

#include <string>
#include <vector>

#include "spg/core.hpp"

namespace spg {

// Interleaved RGB, row-major, channel values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;

  float at(int y, int x, int c) const { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  float& at(int y, int x, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

struct ImageRecord {
  std::string id;
  Image image;
  int label = -1;
  std::vector<BBox> boxes;  // evaluation only; may be empty for training data
};

}  // namespace spg

#endif  // SPG_IMAGE_HPP_
