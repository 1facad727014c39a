#include "spg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "blas.hpp"
#include "spg/training.hpp"

namespace spg {

std::vector<ImageInference> run_inference(const Network<float>& net, std::span<const ImageRecord> records,
                                          int batch_size) {
  blas::ensure_deterministic();
  if (batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  std::vector<ImageInference> out;
  out.reserve(records.size());
  const int classes = net.config().num_classes;
  for (size_t begin = 0; begin < records.size(); begin += batch_size) {
    const size_t end = std::min(records.size(), begin + batch_size);
    std::vector<size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const NetworkOutputs o = net.forward(make_batch(records, idx));
    for (int b = 0; b < o.batch; ++b) {
      ImageInference inf;
      inf.class_probs.assign(o.class_probs.begin() + static_cast<ptrdiff_t>(b) * classes,
                             o.class_probs.begin() + static_cast<ptrdiff_t>(b + 1) * classes);
      for (int c = 0; c < classes; ++c) inf.class_maps.push_back(plane_to_map(o.f_a4, c, b));
      if (!o.f_b1.data.empty()) inf.f_b1 = plane_to_map(o.f_b1, 0, b);
      if (!o.f_b2.data.empty()) inf.f_b2 = plane_to_map(o.f_b2, 0, b);
      if (!o.f_c.data.empty()) inf.f_c = plane_to_map(o.f_c, 0, b);
      out.push_back(std::move(inf));
    }
  }
  return out;
}

LocalizationMap image_attention(const ImageInference& inf, int class_idx, int image_h, int image_w) {
  if (class_idx < 0 || class_idx >= static_cast<int>(inf.class_maps.size()))
    fail(ErrorCode::kOutOfRange, "class index out of range");
  return resize_bilinear(normalize_map(inf.class_maps[class_idx]), image_h, image_w);
}

namespace {
void check_parallel(std::span<const ImageInference> inference, std::span<const ImageRecord> records) {
  if (inference.size() != records.size())
    fail(ErrorCode::kShapeMismatch, "inference results do not match the record list");
}
}  // namespace

std::vector<CalibrationSample> calibration_samples(std::span<const ImageInference> inference,
                                                   std::span<const ImageRecord> records) {
  check_parallel(inference, records);
  std::vector<CalibrationSample> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const ImageRecord& r = records[i];
    out.push_back({image_attention(inference[i], r.label, r.image.height, r.image.width), r.boxes});
  }
  return out;
}

std::vector<PredictionRecord> predict_records(std::span<const ImageInference> inference,
                                              std::span<const ImageRecord> records, double threshold,
                                              int boxes_per_class) {
  check_parallel(inference, records);
  std::vector<PredictionRecord> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    const ImageInference& inf = inference[i];
    const ImageRecord& r = records[i];
    PredictionRecord p;
    p.image_id = r.id;
    p.ranked_classes = predict_topk(inf.class_probs, static_cast<int>(inf.class_probs.size()));
    for (int cls : p.ranked_classes) {
      p.scores.push_back(inf.class_probs[cls]);
      p.boxes[cls] = extract_bboxes(image_attention(inf, cls, r.image.height, r.image.width), threshold,
                                    boxes_per_class);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<GroundTruth> ground_truth(std::span<const ImageRecord> records) {
  std::vector<GroundTruth> gt;
  gt.reserve(records.size());
  for (const auto& r : records) gt.push_back({r.id, r.label, r.boxes});
  return gt;
}

EvaluationRun evaluate_network(const Network<float>& net, std::span<const ImageRecord> val,
                               std::span<const ImageRecord> test) {
  EvaluationRun run;
  const auto val_inf = run_inference(net, val);
  const auto samples = calibration_samples(val_inf, val);
  run.calibration = grid_search_threshold(samples);
  const auto test_inf = run_inference(net, test);
  run.predictions = predict_records(test_inf, test, run.calibration.threshold);
  const auto gt = ground_truth(test);
  run.report = evaluate_report(run.predictions, gt);
  run.report.threshold = run.calibration.threshold;
  return run;
}

double classification_accuracy(std::span<const ImageInference> inference, std::span<const ImageRecord> records) {
  check_parallel(inference, records);
  if (records.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < records.size(); ++i)
    hits += predict_topk(inference[i].class_probs, 1).front() == records[i].label;
  return static_cast<double>(hits) / records.size();
}

std::vector<MapDump> export_panels(const ImageInference& inf, const std::string& image_id, int class_idx,
                                   const Thresholds& fuse) {
  if (class_idx < 0 || class_idx >= static_cast<int>(inf.class_maps.size()))
    fail(ErrorCode::kOutOfRange, "class index out of range");
  std::vector<MapDump> out;
  out.push_back({image_id, MapKind::kAttention, normalize_map(inf.class_maps[class_idx])});
  if (!inf.f_b1.scores.empty()) out.push_back({image_id, MapKind::kB1, inf.f_b1});
  if (!inf.f_b2.scores.empty()) out.push_back({image_id, MapKind::kB2, inf.f_b2});
  if (!inf.f_c.scores.empty()) out.push_back({image_id, MapKind::kC, inf.f_c});
  if (!inf.f_b1.scores.empty() && !inf.f_b2.scores.empty())
    out.push_back(mask_dump(image_id, fuse_guidance(inf.f_b1, inf.f_b2, fuse)));
  return out;
}

namespace {

void heat_color(double v, double rgb[3]) {
  // blue -> cyan -> yellow -> red
  v = std::clamp(v, 0.0, 1.0);
  rgb[0] = std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0);
  rgb[1] = std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0);
  rgb[2] = std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0);
}

void draw_box(Image& img, const BBox& b, float r, float g, float bl) {
  const int x0 = std::clamp(static_cast<int>(std::floor(b.x0)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(b.y0)), 0, img.height - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(b.x1)) - 1, 0, img.width - 1);
  const int y1 = std::clamp(static_cast<int>(std::ceil(b.y1)) - 1, 0, img.height - 1);
  auto put = [&](int y, int x) {
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = bl;
  };
  for (int x = x0; x <= x1; ++x) {
    put(y0, x);
    put(y1, x);
  }
  for (int y = y0; y <= y1; ++y) {
    put(y, x0);
    put(y, x1);
  }
}

}  // namespace

Image render_overlay(const Image& image, const LocalizationMap& heat, std::span<const BBox> predicted,
                     std::span<const BBox> truth) {
  if (heat.height != image.height || heat.width != image.width)
    fail(ErrorCode::kShapeMismatch, "heat map must match the image resolution");
  Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      double c[3];
      heat_color(heat.at(y, x), c);
      for (int k = 0; k < 3; ++k) out.at(y, x, k) = static_cast<float>(0.5 * image.at(y, x, k) + 0.5 * c[k]);
    }
  for (const BBox& b : truth) draw_box(out, b, 1.0f, 0.0f, 0.0f);
  for (const BBox& b : predicted) draw_box(out, b, 0.0f, 1.0f, 0.0f);
  return out;
}

}  // namespace spg
