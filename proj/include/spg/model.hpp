#ifndef SPG_MODEL_HPP_
#define SPG_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spg/core.hpp"
#include "spg/tensor.hpp"

namespace spg {

struct ConvBlockSpec {
  int filters = 0;
  bool downsample = false;  // 2x2 max pooling after the activation
  bool operator==(const ConvBlockSpec&) const = default;
};

struct NetworkConfig {
  int input_height = 64;
  int input_width = 64;
  int num_classes = 4;
  std::vector<ConvBlockSpec> stem = {{16, true}, {32, true}};
  ConvBlockSpec a1 = {64, false};
  ConvBlockSpec a2 = {128, true};
  ConvBlockSpec a3 = {256, false};
  int b_adapter_filters = 128;
  int b_shared_filters = 128;
  int c_head_filters = 128;
  bool share_b_layers = true;
  bool enable_spg = true;     // false: SPG-plain, no B/C branches at all
  bool enable_c_head = true;  // ablation: drop SPG-C while keeping SPG-B
  bool batch_norm = false;    // batch normalization in the stem and A1-A3 blocks
  uint64_t init_seed = 1;

  // Throws on invalid combinations (too few classes, collapsed spatial sizes).
  void validate() const;
  bool has_b() const { return enable_spg; }
  bool has_c() const { return enable_spg && enable_c_head; }
  bool operator==(const NetworkConfig&) const = default;
};

struct SpatialSize {
  int height = 0;
  int width = 0;
};

// Resolutions at each tap for a given config.
struct TapSizes {
  SpatialSize stem, a1, a2, a3;
};
TapSizes tap_sizes(const NetworkConfig& config);

// kBuffer tensors (batch-norm running statistics) are saved with the
// parameters but never receive gradients.
enum class ParamGroup { kBase, kAdded, kBuffer };

struct Parameter {
  std::string name;
  std::vector<int> shape;  // {out, in, k, k} or {out}
  ParamGroup group = ParamGroup::kBase;
  std::vector<float> values;
};

// Forward results for one batch. Maps are sigmoid outputs (strictly in (0,1))
// at native tap resolution; absent branches are empty tensors.
template <class T>
struct Outputs {
  int batch = 0;
  int num_classes = 0;
  std::vector<T> logits;       // batch x classes
  std::vector<T> class_probs;  // batch x classes
  Tensor<T> f_a4;              // classes x batch x h x w
  Tensor<T> f_b1, f_b2, f_c;   // 1 x batch x h x w

  T logit(int image, int cls) const { return logits[static_cast<size_t>(image) * num_classes + cls]; }
  T prob(int image, int cls) const { return class_probs[static_cast<size_t>(image) * num_classes + cls]; }
};
using NetworkOutputs = Outputs<float>;

// Loss gradients with respect to the outputs. Empty vectors/tensors mean "no
// gradient from this head".
template <class T>
struct OutputGrads {
  std::vector<T> logits;
  Tensor<T> f_b1, f_b2, f_c;  // w.r.t. sigmoid outputs
};

template <class T>
struct ForwardState;

// Holds parameters of one SPG network. Forward/backward are const: all
// per-call activations live in ForwardState and gradients in a separate
// buffer, so concurrent inference on one network is safe.
template <class T>
class Network {
 public:
  explicit Network(const NetworkConfig& config);
  Network(const NetworkConfig& config, const std::vector<Parameter>& params);
  ~Network();
  Network(const Network&);
  Network& operator=(const Network&);
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const NetworkConfig& config() const { return config_; }

  // Parameter tensors in declaration order; B1 and B2 layers 2-3 are a single
  // entry each when sharing is enabled.
  size_t num_param_tensors() const { return values_.size(); }
  const std::string& param_name(size_t i) const { return meta_[i].name; }
  const std::vector<int>& param_shape(size_t i) const { return meta_[i].shape; }
  ParamGroup param_group(size_t i) const { return meta_[i].group; }
  std::vector<T>& param_values(size_t i) { return values_[i]; }
  const std::vector<T>& param_values(size_t i) const { return values_[i]; }
  size_t param_index(const std::string& name) const;
  // Trainable scalars only; buffers are excluded.
  size_t parameter_count() const;

  // Float snapshot of all parameters, for checkpoints and conversions.
  std::vector<Parameter> export_parameters() const;

  // images: 3 x batch x H x W, values in [0,1].
  // Inference: batch norm uses the running statistics.
  Outputs<T> forward(const Tensor<T>& images) const;
  // Training: batch norm uses batch statistics, recorded in state for
  // backward() and update_running_stats().
  Outputs<T> forward(const Tensor<T>& images, ForwardState<T>& state) const;

  // Folds the batch statistics of the last training forward into the
  // running estimates (exponential average, unbiased variance).
  void update_running_stats(const ForwardState<T>& state, double momentum = 0.1);

  // Accumulates parameter gradients into grads (resized on first use).
  void backward(const ForwardState<T>& state, const OutputGrads<T>& grads,
                std::vector<std::vector<T>>& param_grads) const;

 private:
  struct ParamMeta {
    std::string name;
    std::vector<int> shape;
    ParamGroup group;
  };
  struct Layers;

  void build();
  Outputs<T> run(const Tensor<T>& images, ForwardState<T>& state, bool training) const;
  size_t add_param(const std::string& name, std::vector<int> shape, ParamGroup group);

  NetworkConfig config_;
  std::vector<ParamMeta> meta_;
  std::vector<std::vector<T>> values_;
  std::unique_ptr<Layers> layers_;
};

template <class T>
struct ForwardState {
  struct Impl;
  std::unique_ptr<Impl> impl;
  ForwardState();
  ~ForwardState();
};

extern template class Network<float>;
extern template class Network<double>;
extern template struct ForwardState<float>;
extern template struct ForwardState<double>;

// Normalized attention map of one class channel from F_A4.
LocalizationMap extract_attention(const Tensor<float>& f_a4, int image, int class_idx);

// Top-k classes by descending score, ties broken by ascending index.
std::vector<int> predict_topk(std::span<const float> scores, int k);

}  // namespace spg

#endif  // SPG_MODEL_HPP_
