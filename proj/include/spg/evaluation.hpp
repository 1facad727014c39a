#ifndef SPG_EVALUATION_HPP_
#define SPG_EVALUATION_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "spg/core.hpp"

namespace spg {

struct PredictionRecord {
  std::string image_id;
  std::vector<int> ranked_classes;            // best first, distinct
  std::vector<double> scores;                 // parallel to ranked_classes (may be empty)
  std::map<int, std::vector<BBox>> boxes;     // class -> candidate boxes, best first
};

struct GroundTruth {
  std::string image_id;
  int label = -1;
  std::vector<BBox> boxes;
};

enum class EvalMode { kTop1, kTop5, kTop5Star, kGtKnown };
const char* mode_name(EvalMode mode);

// Right class and IoU > 0.5 (strict) with some ground-truth box.
bool is_correct(int pred_class, const BBox& pred_box, int gt_class, std::span<const BBox> gt_boxes);

struct ModeResult {
  size_t correct = 0;
  size_t total = 0;
  double error = 0.0;  // percent
};

// Every ground-truth image needs a prediction record.
ModeResult evaluate(std::span<const PredictionRecord> preds, std::span<const GroundTruth> gt, EvalMode mode);

struct EvalReport {
  double top1_loc_err = 0.0;
  double top5_loc_err = 0.0;
  double top5_star_loc_err = 0.0;
  double gt_known_loc_err = 0.0;
  double top1_cls_err = 0.0;
  double top5_cls_err = 0.0;
  size_t images = 0;
  double threshold = 0.0;  // box threshold the predictions were made with
};

EvalReport evaluate_report(std::span<const PredictionRecord> preds, std::span<const GroundTruth> gt);

// image_id -> ranked classes.
using ExternalRanking = std::map<std::string, std::vector<int>>;

// Replaces each record's class ranking with the external one; boxes for the
// newly ranked classes come from the record's own per-class boxes.
std::vector<PredictionRecord> apply_external_ranking(std::span<const PredictionRecord> preds,
                                                     const ExternalRanking& external);
EvalReport evaluate_with_external_predictions(const ExternalRanking& external,
                                              std::span<const PredictionRecord> own,
                                              std::span<const GroundTruth> gt);

// TSV: image_id, class_1 .. class_5 (at least one class column).
ExternalRanking read_external_ranking(const std::string& path);
void write_external_ranking(const ExternalRanking& ranking, const std::string& path);

// TSV: image_id, class_id, rank, x0, y0, x1, y1, score. Rows of one
// (image, class) in file order are that class's boxes, best first.
void write_predictions(std::span<const PredictionRecord> preds, const std::string& path);
std::vector<PredictionRecord> read_predictions(const std::string& path);

// "key = value" lines and an aligned human-readable table.
std::string report_to_key_values(const EvalReport& report);
EvalReport report_from_key_values(const std::string& text);
std::string report_to_table(const EvalReport& report);

}  // namespace spg

#endif  // SPG_EVALUATION_HPP_
