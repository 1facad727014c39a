#ifndef SPG_GUIDANCE_HPP_
#define SPG_GUIDANCE_HPP_

#include <optional>
#include <span>

#include "spg/core.hpp"
#include "spg/model.hpp"

namespace spg {

// Double thresholding of a [0,1] map into background / foreground / ignore.
// Boundary values (== low or == high) land in the ignore band.
GuidanceMask generate_seed_mask(const LocalizationMap& map, const Thresholds& t);

// Average of the two branch maps (B2 resized onto B1's grid), then thresholded.
GuidanceMask fuse_guidance(const LocalizationMap& f_b1, const LocalizationMap& f_b2, const Thresholds& t);

inline constexpr double kLogEpsilon = 1e-7;

// Mean binary cross-entropy over the labelled (0/1) cells of target. Adds
// weight * d(loss)/d(pred) into grad when it is non-empty; ignored cells
// receive exactly zero. All-ignored targets give loss 0.
template <class T>
double masked_bce(std::span<const T> pred, std::span<const uint8_t> target, std::span<T> grad,
                  double weight = 1.0);

struct MaskedLoss {
  double loss = 0.0;
  LocalizationMap grad;
};
MaskedLoss masked_bce_loss(const LocalizationMap& pred, const GuidanceMask& target);

struct GuidanceOptions {
  Thresholds b2 = {0.1, 0.7};     // attention map -> B2 target
  Thresholds b1 = {0.05, 0.5};    // B2 output -> B1 target
  Thresholds fuse = {0.05, 0.5};  // fused B1/B2 -> SPG-C target
  bool cascade = true;            // false: B1 is also trained on the attention seeds
  bool renormalize_b2 = true;     // min-max F_B2 before thresholding it
  bool operator==(const GuidanceOptions&) const = default;
};

// Per-image targets. Constants as far as optimisation is concerned.
struct SupervisionSet {
  GuidanceMask m_a;     // supervises B2, at B2 resolution
  GuidanceMask m_b2;    // supervises B1, at B1 resolution
  GuidanceMask m_fuse;  // supervises SPG-C, at C resolution
};

// attention: normalized class map from F_A4; f_b2/f_b1: sigmoid outputs.
// c_size: resolution of the SPG-C output.
SupervisionSet build_supervision_set(const LocalizationMap& attention, const LocalizationMap& f_b2,
                                     const LocalizationMap& f_b1, SpatialSize c_size,
                                     const GuidanceOptions& options);

}  // namespace spg

#endif  // SPG_GUIDANCE_HPP_
