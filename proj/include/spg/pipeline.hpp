#ifndef SPG_PIPELINE_HPP_
#define SPG_PIPELINE_HPP_

#include <span>
#include <string>
#include <vector>

#include "spg/evaluation.hpp"
#include "spg/guidance.hpp"
#include "spg/image.hpp"
#include "spg/localization.hpp"
#include "spg/map_dump.hpp"
#include "spg/model.hpp"

namespace spg {

// Per-image network outputs in map form.
struct ImageInference {
  std::vector<float> class_probs;
  std::vector<LocalizationMap> class_maps;  // raw F_A4 channel per class
  LocalizationMap f_b1, f_b2, f_c;          // empty when the branch is absent
};

std::vector<ImageInference> run_inference(const Network<float>& net, std::span<const ImageRecord> records,
                                          int batch_size = 50);

// Normalized class map resized to image resolution.
LocalizationMap image_attention(const ImageInference& inf, int class_idx, int image_h, int image_w);

// Ground-truth-class maps for threshold calibration.
std::vector<CalibrationSample> calibration_samples(std::span<const ImageInference> inference,
                                                   std::span<const ImageRecord> records);

// Full class ranking per image with up to boxes_per_class boxes each.
std::vector<PredictionRecord> predict_records(std::span<const ImageInference> inference,
                                              std::span<const ImageRecord> records, double threshold,
                                              int boxes_per_class = 2);

std::vector<GroundTruth> ground_truth(std::span<const ImageRecord> records);

struct EvaluationRun {
  GridSearchResult calibration;
  std::vector<PredictionRecord> predictions;
  EvalReport report;
};

// Grid-searches the box threshold on val, then evaluates on test.
EvaluationRun evaluate_network(const Network<float>& net, std::span<const ImageRecord> val,
                               std::span<const ImageRecord> test);

double classification_accuracy(std::span<const ImageInference> inference, std::span<const ImageRecord> records);

// Panels for one image: attention (of class_idx), B1, B2, C and fused mask.
std::vector<MapDump> export_panels(const ImageInference& inf, const std::string& image_id, int class_idx,
                                   const Thresholds& fuse);

// Heat overlay with predicted boxes in green and ground truth in red.
Image render_overlay(const Image& image, const LocalizationMap& heat, std::span<const BBox> predicted,
                     std::span<const BBox> truth);

}  // namespace spg

#endif  // SPG_PIPELINE_HPP_
