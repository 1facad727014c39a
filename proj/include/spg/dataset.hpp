#ifndef SPG_DATASET_HPP_
#define SPG_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "spg/image.hpp"

namespace spg {

enum class ShapeKind { kDisk = 0, kRectangle = 1, kTriangle = 2, kRing = 3 };
inline constexpr int kMaxShapeClasses = 4;
const char* shape_name(int class_id);

struct DatasetSpec {
  int num_classes = 4;
  int train_images = 2000;
  int val_images = 500;
  int test_images = 500;
  int image_size = 64;
  double scale_min = 0.25;  // object extent as a fraction of the image side
  double scale_max = 0.6;
  double noise_amplitude = 0.35;  // background texture contrast
  double color_jitter = 0.15;
  uint64_t seed = 7;

  void validate() const;
  bool operator==(const DatasetSpec&) const = default;
};

inline const char* const kSplits[] = {"train", "val", "test"};

// One rendered sample; box is the analytic tight box of the shape.
struct RenderedSample {
  Image image;
  int label = 0;
  BBox box;
};
RenderedSample render_sample(const DatasetSpec& spec, int split, int index);

// Writes <out_dir>/<split>/{images/*.ppm, labels.csv, boxes.csv} for the
// three splits plus <out_dir>/dataset.cfg.
void generate_dataset(const DatasetSpec& spec, const std::string& out_dir);

// Loads one split directory (containing labels.csv, optional boxes.csv and images/).
std::vector<ImageRecord> load_dataset(const std::string& split_dir);

// PPM (P6, maxval 255).
void write_ppm(const Image& image, const std::string& path);
Image read_ppm(const std::string& path);
uint8_t to_byte(float v);

}  // namespace spg

#endif  // SPG_DATASET_HPP_
