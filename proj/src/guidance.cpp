#include "spg/guidance.hpp"

#include <cmath>

namespace spg {

GuidanceMask generate_seed_mask(const LocalizationMap& map, const Thresholds& t) {
  t.validate();
  GuidanceMask mask(map.height, map.width, label::kIgnore);
  for (size_t i = 0; i < map.size(); ++i) {
    const double v = map.scores[i];
    if (v < t.low)
      mask.labels[i] = label::kBackground;
    else if (v > t.high)
      mask.labels[i] = label::kForeground;
  }
  return mask;
}

GuidanceMask fuse_guidance(const LocalizationMap& f_b1, const LocalizationMap& f_b2, const Thresholds& t) {
  if (f_b1.scores.empty() || f_b2.scores.empty())
    fail(ErrorCode::kInvalidArgument, "cannot fuse empty maps");
  const LocalizationMap b2 = resize_bilinear(f_b2, f_b1.height, f_b1.width);
  LocalizationMap mean(f_b1.height, f_b1.width, 0.0f);
  for (size_t i = 0; i < mean.size(); ++i)
    mean.scores[i] = static_cast<float>(0.5 * (static_cast<double>(f_b1.scores[i]) + b2.scores[i]));
  return generate_seed_mask(mean, t);
}

template <class T>
double masked_bce(std::span<const T> pred, std::span<const uint8_t> target, std::span<T> grad, double weight) {
  if (pred.size() != target.size() || (!grad.empty() && grad.size() != pred.size()))
    fail(ErrorCode::kShapeMismatch, "prediction and target resolutions differ");
  size_t labelled = 0;
  for (uint8_t t : target)
    if (t != label::kIgnore) ++labelled;
  if (labelled == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(labelled);
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (target[i] == label::kIgnore) continue;
    const double p = static_cast<double>(pred[i]);
    if (target[i] == label::kForeground) {
      sum -= std::log(p + kLogEpsilon);
      if (!grad.empty()) grad[i] += static_cast<T>(-weight * inv / (p + kLogEpsilon));
    } else {
      sum -= std::log(1.0 - p + kLogEpsilon);
      if (!grad.empty()) grad[i] += static_cast<T>(weight * inv / (1.0 - p + kLogEpsilon));
    }
  }
  return sum * inv;
}

template double masked_bce<float>(std::span<const float>, std::span<const uint8_t>, std::span<float>, double);
template double masked_bce<double>(std::span<const double>, std::span<const uint8_t>, std::span<double>,
                                   double);

MaskedLoss masked_bce_loss(const LocalizationMap& pred, const GuidanceMask& target) {
  if (pred.height != target.height || pred.width != target.width)
    fail(ErrorCode::kShapeMismatch, "prediction and target resolutions differ");
  MaskedLoss out{0.0, LocalizationMap(pred.height, pred.width, 0.0f)};
  out.loss = masked_bce<float>(pred.scores, target.labels, out.grad.scores);
  return out;
}

SupervisionSet build_supervision_set(const LocalizationMap& attention, const LocalizationMap& f_b2,
                                     const LocalizationMap& f_b1, SpatialSize c_size,
                                     const GuidanceOptions& options) {
  SupervisionSet set;
  const GuidanceMask seeds = generate_seed_mask(attention, options.b2);
  set.m_a = resize_nearest(seeds, f_b2.height, f_b2.width);
  if (options.cascade) {
    const LocalizationMap b2 = options.renormalize_b2 ? normalize_map(f_b2) : f_b2;
    set.m_b2 = resize_nearest(generate_seed_mask(b2, options.b1), f_b1.height, f_b1.width);
  } else {
    set.m_b2 = resize_nearest(seeds, f_b1.height, f_b1.width);
  }
  if (c_size.height > 0 && c_size.width > 0)
    set.m_fuse = resize_nearest(fuse_guidance(f_b1, f_b2, options.fuse), c_size.height, c_size.width);
  return set;
}

}  // namespace spg
