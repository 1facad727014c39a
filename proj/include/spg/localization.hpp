#ifndef SPG_LOCALIZATION_HPP_
#define SPG_LOCALIZATION_HPP_

#include <span>
#include <vector>

#include "spg/core.hpp"

namespace spg {

struct Component {
  BBox box;
  size_t size = 0;
  size_t first_index = 0;  // raster index of the component's first cell
};

// Binarizes at v >= threshold, labels 8-connected components and returns
// the k largest (ties: earliest in raster order). An empty foreground yields
// one full-image box with size 0.
std::vector<Component> extract_components(const LocalizationMap& map, double threshold, int k);
std::vector<BBox> extract_bboxes(const LocalizationMap& map, double threshold, int k);

// The threshold grid searched during calibration: 0.05, 0.10, ..., 0.95.
std::vector<double> threshold_grid();

struct CalibrationSample {
  LocalizationMap map;  // ground-truth class map at image resolution
  std::vector<BBox> gt_boxes;
};

struct GridSearchResult {
  double threshold = 0.0;
  double accuracy = 0.0;           // GT-known localization accuracy at threshold
  std::vector<double> accuracies;  // parallel to threshold_grid()
};

// Picks the grid threshold maximizing GT-known accuracy (ties: smallest).
GridSearchResult grid_search_threshold(std::span<const CalibrationSample> samples);

}  // namespace spg

#endif  // SPG_LOCALIZATION_HPP_
