#ifndef SPG_TENSOR_HPP_
#define SPG_TENSOR_HPP_

#include <cstddef>
#include <vector>

#include "spg/core.hpp"

namespace spg {

// Dense 4-D activation buffer in channel-major "CNHW" order: for each channel,
// the whole batch is contiguous, so a convolution over the batch is one GEMM.
template <class T>
struct Tensor {
  int channels = 0;
  int batch = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int n, int h, int w, T fill = T(0))
      : channels(c), batch(n), height(h), width(w),
        data(static_cast<size_t>(c) * n * h * w, fill) {}

  size_t plane() const { return static_cast<size_t>(height) * width; }
  size_t channel_stride() const { return static_cast<size_t>(batch) * plane(); }
  size_t size() const { return data.size(); }

  T& at(int c, int n, int y, int x) {
    return data[c * channel_stride() + n * plane() + static_cast<size_t>(y) * width + x];
  }
  T at(int c, int n, int y, int x) const {
    return data[c * channel_stride() + n * plane() + static_cast<size_t>(y) * width + x];
  }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && batch == o.batch && height == o.height && width == o.width;
  }
};

// Copies one (channel, image) plane out as a map.
template <class T>
LocalizationMap plane_to_map(const Tensor<T>& t, int channel, int image) {
  if (channel < 0 || channel >= t.channels || image < 0 || image >= t.batch)
    fail(ErrorCode::kOutOfRange, "tensor plane index out of range");
  LocalizationMap m(t.height, t.width, 0.0f);
  const T* src = t.data.data() + channel * t.channel_stride() + image * t.plane();
  for (size_t i = 0; i < t.plane(); ++i) m.scores[i] = static_cast<float>(src[i]);
  return m;
}

}  // namespace spg

#endif  // SPG_TENSOR_HPP_
