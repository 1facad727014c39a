#include "spg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "blas.hpp"
#include "rng.hpp"

namespace spg {

void NetworkConfig::validate() const {
  if (num_classes < 2) fail(ErrorCode::kInvalidArgument, "num_classes must be >= 2");
  if (input_height < 1 || input_width < 1)
    fail(ErrorCode::kInvalidArgument, "input size must be positive");
  auto check_filters = [](int f, const char* what) {
    if (f < 1) fail(ErrorCode::kInvalidArgument, std::string(what) + " filters must be >= 1");
  };
  for (const auto& b : stem) check_filters(b.filters, "stem");
  check_filters(a1.filters, "a1");
  check_filters(a2.filters, "a2");
  check_filters(a3.filters, "a3");
  if (enable_spg) {
    check_filters(b_adapter_filters, "b adapter");
    check_filters(b_shared_filters, "b shared");
    if (enable_c_head) check_filters(c_head_filters, "c head");
  }
  const TapSizes taps = tap_sizes(*this);
  if (taps.a3.height < 4 || taps.a3.width < 4)
    fail(ErrorCode::kInvalidArgument, "spatial size at A4 must be at least 4x4");
}

TapSizes tap_sizes(const NetworkConfig& c) {
  SpatialSize s{c.input_height, c.input_width};
  auto step = [&](const ConvBlockSpec& b) {
    if (b.downsample) s = {s.height / 2, s.width / 2};
    if (s.height < 1 || s.width < 1)
      fail(ErrorCode::kInvalidArgument, "config yields a non-positive spatial size");
    return s;
  };
  TapSizes t;
  t.stem = s;
  for (const auto& b : c.stem) t.stem = step(b);
  t.a1 = step(c.a1);
  t.a2 = step(c.a2);
  t.a3 = step(c.a3);
  return t;
}

// ---------------------------------------------------------------------------
// Layer kernels

namespace {

template <class T>
void im2col3(const Tensor<T>& in, std::vector<T>& col) {
  const int c = in.channels, n = in.batch, h = in.height, w = in.width;
  const size_t cols = static_cast<size_t>(n) * h * w;
  col.assign(static_cast<size_t>(c) * 9 * cols, T(0));
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col.data() + (static_cast<size_t>(ci) * 9 + ky * 3 + kx) * cols;
        for (int b = 0; b < n; ++b) {
          const T* src = in.data.data() + ci * in.channel_stride() + b * in.plane();
          T* drow = dst + b * in.plane();
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            const int x_begin = std::max(0, 1 - kx);
            const int x_end = std::min(w, w + 1 - kx);
            const T* s = src + static_cast<size_t>(sy) * w + (kx - 1);
            T* d = drow + static_cast<size_t>(y) * w;
            for (int x = x_begin; x < x_end; ++x) d[x] = s[x];
          }
        }
      }
    }
  }
}

template <class T>
void col2im3(const std::vector<T>& col, Tensor<T>& out) {
  const int c = out.channels, n = out.batch, h = out.height, w = out.width;
  const size_t cols = static_cast<size_t>(n) * h * w;
  for (int ci = 0; ci < c; ++ci) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col.data() + (static_cast<size_t>(ci) * 9 + ky * 3 + kx) * cols;
        for (int b = 0; b < n; ++b) {
          T* dst = out.data.data() + ci * out.channel_stride() + b * out.plane();
          const T* srow = src + b * out.plane();
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            const int x_begin = std::max(0, 1 - kx);
            const int x_end = std::min(w, w + 1 - kx);
            T* d = dst + static_cast<size_t>(sy) * w + (kx - 1);
            const T* s = srow + static_cast<size_t>(y) * w;
            for (int x = x_begin; x < x_end; ++x) d[x] += s[x];
          }
        }
      }
    }
  }
}

constexpr size_t kNone = static_cast<size_t>(-1);
constexpr double kBnEps = 1e-5;

struct ConvRef {
  size_t weight = 0;
  size_t bias = kNone;  // absent when batch norm follows
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
};

enum class Activation { kNone, kRelu, kSigmoid };

struct BatchNormRef {
  size_t gamma = kNone, beta = kNone, mean = kNone, var = kNone;
  bool enabled() const { return gamma != kNone; }
};

struct Block {
  Block() = default;
  Block(ConvRef c, Activation a, bool p) : conv(c), act(a), pool(p) {}
  ConvRef conv;
  Activation act = Activation::kRelu;
  bool pool = false;
  BatchNormRef bn;
};

template <class T>
struct BlockCache {
  Tensor<T> input;
  std::vector<T> col;
  Tensor<T> activated;  // after the nonlinearity, before pooling
  std::vector<uint32_t> argmax;
  Tensor<T> output;
  // Batch norm, training mode only.
  Tensor<T> normed;
  std::vector<T> batch_mean, batch_var, inv_std;
};

template <class T>
Tensor<T> conv_forward(const Tensor<T>& in, const ConvRef& conv, const std::vector<std::vector<T>>& params,
                       std::vector<T>& col) {
  if (in.channels != conv.in_channels)
    fail(ErrorCode::kShapeMismatch, "convolution input channel mismatch");
  Tensor<T> out(conv.out_channels, in.batch, in.height, in.width);
  const int cols = static_cast<int>(in.channel_stride());
  const int depth = conv.in_channels * conv.kernel * conv.kernel;
  const T* src = in.data.data();
  if (conv.kernel == 3) {
    im2col3(in, col);
    src = col.data();
  }
  const std::vector<T>& w = params[conv.weight];
  if (conv.bias != kNone) {
    const std::vector<T>& b = params[conv.bias];
    for (int co = 0; co < conv.out_channels; ++co)
      std::fill_n(out.data.begin() + static_cast<size_t>(co) * cols, cols, b[co]);
  }
  blas::gemm(false, false, conv.out_channels, cols, depth, T(1), w.data(), depth, src, cols, T(1),
             out.data.data(), cols);
  return out;
}

template <class T>
void conv_backward(const BlockCache<T>& cache, const ConvRef& conv, const Tensor<T>& dout,
                   const std::vector<std::vector<T>>& params, std::vector<std::vector<T>>& grads,
                   Tensor<T>* din) {
  const int cols = static_cast<int>(dout.channel_stride());
  const int depth = conv.in_channels * conv.kernel * conv.kernel;
  const T* src = conv.kernel == 3 ? cache.col.data() : cache.input.data.data();
  std::vector<T>& dw = grads[conv.weight];
  blas::gemm(false, true, conv.out_channels, depth, cols, T(1), dout.data.data(), cols, src, cols,
             T(1), dw.data(), depth);
  for (int co = 0; conv.bias != kNone && co < conv.out_channels; ++co) {
    std::vector<T>& db = grads[conv.bias];
    const T* row = dout.data.data() + static_cast<size_t>(co) * cols;
    T acc = T(0);
    for (int i = 0; i < cols; ++i) acc += row[i];
    db[co] += acc;
  }
  if (!din) return;
  const std::vector<T>& w = params[conv.weight];
  Tensor<T> dx(conv.in_channels, dout.batch, dout.height, dout.width);
  if (conv.kernel == 3) {
    std::vector<T> dcol(static_cast<size_t>(depth) * cols);
    blas::gemm(true, false, depth, cols, conv.out_channels, T(1), w.data(), depth, dout.data.data(),
               cols, T(0), dcol.data(), cols);
    col2im3(dcol, dx);
  } else {
    blas::gemm(true, false, depth, cols, conv.out_channels, T(1), w.data(), depth, dout.data.data(),
               cols, T(0), dx.data.data(), cols);
  }
  if (din->data.empty()) {
    *din = std::move(dx);
  } else {
    for (size_t i = 0; i < dx.size(); ++i) din->data[i] += dx.data[i];
  }
}

template <class T>
T sigmoid(T z) {
  const T lo = std::numeric_limits<T>::epsilon();
  const T p = T(1) / (T(1) + std::exp(-z));
  return std::clamp(p, lo, T(1) - lo);
}

template <class T>
void max_pool2(const Tensor<T>& in, Tensor<T>& out, std::vector<uint32_t>& argmax) {
  const int oh = in.height / 2, ow = in.width / 2;
  out = Tensor<T>(in.channels, in.batch, oh, ow);
  argmax.assign(out.size(), 0);
  size_t o = 0;
  for (int c = 0; c < in.channels; ++c) {
    for (int b = 0; b < in.batch; ++b) {
      const size_t base = c * in.channel_stride() + b * in.plane();
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x, ++o) {
          size_t best = base + static_cast<size_t>(2 * y) * in.width + 2 * x;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const size_t idx = base + static_cast<size_t>(2 * y + dy) * in.width + 2 * x + dx;
              if (in.data[idx] > in.data[best]) best = idx;
            }
          out.data[o] = in.data[best];
          argmax[o] = static_cast<uint32_t>(best);
        }
      }
    }
  }
}

// Per-channel normalization over batch and space (contiguous in CNHW).
template <class T>
void batch_norm_forward(Tensor<T>& z, const BatchNormRef& bn, const std::vector<std::vector<T>>& params,
                        BlockCache<T>& cache, bool training) {
  const size_t m = z.channel_stride();
  const std::vector<T>& gamma = params[bn.gamma];
  const std::vector<T>& beta = params[bn.beta];
  if (training) {
    cache.batch_mean.assign(z.channels, T(0));
    cache.batch_var.assign(z.channels, T(0));
    cache.inv_std.assign(z.channels, T(0));
    cache.normed = Tensor<T>(z.channels, z.batch, z.height, z.width);
  }
  for (int c = 0; c < z.channels; ++c) {
    T* p = z.data.data() + c * m;
    T mean, inv;
    if (training) {
      T sum = T(0);
      for (size_t i = 0; i < m; ++i) sum += p[i];
      mean = sum / static_cast<T>(m);
      T sq = T(0);
      for (size_t i = 0; i < m; ++i) sq += (p[i] - mean) * (p[i] - mean);
      const T var = sq / static_cast<T>(m);
      inv = T(1) / std::sqrt(var + T(kBnEps));
      cache.batch_mean[c] = mean;
      cache.batch_var[c] = var;
      cache.inv_std[c] = inv;
      T* xh = cache.normed.data.data() + c * m;
      for (size_t i = 0; i < m; ++i) xh[i] = (p[i] - mean) * inv;
    } else {
      mean = params[bn.mean][c];
      inv = T(1) / std::sqrt(params[bn.var][c] + T(kBnEps));
    }
    for (size_t i = 0; i < m; ++i) p[i] = gamma[c] * ((p[i] - mean) * inv) + beta[c];
  }
}

template <class T>
void batch_norm_backward(Tensor<T>& d, const BatchNormRef& bn, const BlockCache<T>& cache,
                         const std::vector<std::vector<T>>& params, std::vector<std::vector<T>>& grads) {
  if (cache.inv_std.empty()) fail(ErrorCode::kInvalidArgument, "backward requires a training-mode forward");
  const size_t m = d.channel_stride();
  const std::vector<T>& gamma = params[bn.gamma];
  for (int c = 0; c < d.channels; ++c) {
    T* g = d.data.data() + c * m;
    const T* xh = cache.normed.data.data() + c * m;
    T sum_g = T(0), sum_gx = T(0);
    for (size_t i = 0; i < m; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    grads[bn.gamma][c] += sum_gx;
    grads[bn.beta][c] += sum_g;
    const T scale = gamma[c] * cache.inv_std[c] / static_cast<T>(m);
    const T mm = static_cast<T>(m);
    for (size_t i = 0; i < m; ++i) g[i] = scale * (mm * g[i] - sum_g - xh[i] * sum_gx);
  }
}

template <class T>
Tensor<T> block_forward(const Tensor<T>& in, const Block& block, const std::vector<std::vector<T>>& params,
                        BlockCache<T>& cache, bool training) {
  if (block.conv.kernel == 1) cache.input = in;
  Tensor<T> z = conv_forward(in, block.conv, params, cache.col);
  if (block.bn.enabled()) batch_norm_forward(z, block.bn, params, cache, training);
  switch (block.act) {
    case Activation::kRelu:
      for (T& v : z.data) v = std::max(v, T(0));
      break;
    case Activation::kSigmoid:
      for (T& v : z.data) v = sigmoid(v);
      break;
    case Activation::kNone:
      break;
  }
  if (block.pool) {
    cache.activated = std::move(z);
    max_pool2(cache.activated, cache.output, cache.argmax);
  } else {
    cache.output = std::move(z);
  }
  return cache.output;
}

template <class T>
void block_backward(const BlockCache<T>& cache, const Block& block, Tensor<T> dout,
                    const std::vector<std::vector<T>>& params, std::vector<std::vector<T>>& grads,
                    Tensor<T>* din) {
  const Tensor<T>& act = block.pool ? cache.activated : cache.output;
  Tensor<T> dact;
  if (block.pool) {
    dact = Tensor<T>(act.channels, act.batch, act.height, act.width);
    for (size_t i = 0; i < dout.size(); ++i) dact.data[cache.argmax[i]] += dout.data[i];
  } else {
    dact = std::move(dout);
  }
  switch (block.act) {
    case Activation::kRelu:
      for (size_t i = 0; i < dact.size(); ++i)
        if (!(act.data[i] > T(0))) dact.data[i] = T(0);
      break;
    case Activation::kSigmoid:
      for (size_t i = 0; i < dact.size(); ++i) dact.data[i] *= act.data[i] * (T(1) - act.data[i]);
      break;
    case Activation::kNone:
      break;
  }
  if (block.bn.enabled()) batch_norm_backward(dact, block.bn, cache, params, grads);
  conv_backward(cache, block.conv, dact, params, grads, din);
}

template <class T>
bool has_grad(const Tensor<T>& t) {
  return !t.data.empty();
}

}  // namespace

// ---------------------------------------------------------------------------
// Network

template <class T>
struct Network<T>::Layers {
  std::vector<Block> stem;
  Block a1, a2, a3, a4;
  Block b1_adapter, b1_mid, b1_out;
  Block b2_adapter, b2_mid, b2_out;
  Block c_mid, c_out;
  std::map<std::string, size_t> index;
};

template <class T>
struct ForwardState<T>::Impl {
  std::vector<BlockCache<T>> stem;
  BlockCache<T> a1, a2, a3, a4;
  BlockCache<T> b1_adapter, b1_mid, b1_out;
  BlockCache<T> b2_adapter, b2_mid, b2_out;
  BlockCache<T> c_mid, c_out;
  int batch = 0;
};

template <class T>
ForwardState<T>::ForwardState() : impl(std::make_unique<Impl>()) {}
template <class T>
ForwardState<T>::~ForwardState() = default;

template <class T>
Network<T>::Network(const NetworkConfig& config) : config_(config) {
  config_.validate();
  build();
  Rng rng(config_.init_seed);
  for (size_t i = 0; i < values_.size(); ++i) {
    const auto& shape = meta_[i].shape;
    if (shape.size() != 4) continue;  // biases stay zero
    const int fan_in = shape[1] * shape[2] * shape[3];
    const bool output_layer = meta_[i].name.find(".out.") != std::string::npos ||
                              meta_[i].name.rfind("a4.", 0) == 0;
    const double stddev = std::sqrt((output_layer ? 1.0 : 2.0) / fan_in);
    for (T& v : values_[i]) v = static_cast<T>(static_cast<float>(stddev * rng.normal()));
  }
  for (const char* suffix : {".bn.gamma", ".bn.running_var"})
    for (size_t i = 0; i < values_.size(); ++i)
      if (meta_[i].name.ends_with(suffix)) std::fill(values_[i].begin(), values_[i].end(), T(1));
}

template <class T>
Network<T>::Network(const NetworkConfig& config, const std::vector<Parameter>& params) : config_(config) {
  config_.validate();
  build();
  std::vector<bool> seen(values_.size(), false);
  for (const Parameter& p : params) {
    auto it = layers_->index.find(p.name);
    if (it == layers_->index.end())
      fail(ErrorCode::kFormat, "unexpected parameter '" + p.name + "'");
    const size_t i = it->second;
    if (p.shape != meta_[i].shape || p.values.size() != values_[i].size())
      fail(ErrorCode::kFormat, "shape mismatch for parameter '" + p.name + "'");
    std::transform(p.values.begin(), p.values.end(), values_[i].begin(),
                   [](float v) { return static_cast<T>(v); });
    seen[i] = true;
  }
  for (size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) fail(ErrorCode::kFormat, "missing parameter '" + meta_[i].name + "'");
}

template <class T>
Network<T>::~Network() = default;

template <class T>
Network<T>::Network(const Network& o)
    : config_(o.config_), meta_(o.meta_), values_(o.values_),
      layers_(std::make_unique<Layers>(*o.layers_)) {}

template <class T>
Network<T>& Network<T>::operator=(const Network& o) {
  if (this != &o) {
    config_ = o.config_;
    meta_ = o.meta_;
    values_ = o.values_;
    layers_ = std::make_unique<Layers>(*o.layers_);
  }
  return *this;
}

template <class T>
Network<T>::Network(Network&&) noexcept = default;
template <class T>
Network<T>& Network<T>::operator=(Network&&) noexcept = default;

template <class T>
size_t Network<T>::add_param(const std::string& name, std::vector<int> shape, ParamGroup group) {
  const size_t n = std::accumulate(shape.begin(), shape.end(), size_t{1},
                                   [](size_t a, int b) { return a * static_cast<size_t>(b); });
  meta_.push_back({name, std::move(shape), group});
  values_.emplace_back(n, T(0));
  layers_->index[name] = values_.size() - 1;
  return values_.size() - 1;
}

template <class T>
void Network<T>::build() {
  layers_ = std::make_unique<Layers>();
  auto conv = [&](const std::string& name, int in, int out, int k, ParamGroup g, bool bias = true) {
    ConvRef r;
    r.weight = add_param(name + ".weight", {out, in, k, k}, g);
    if (bias) r.bias = add_param(name + ".bias", {out}, g);
    r.in_channels = in;
    r.out_channels = out;
    r.kernel = k;
    return r;
  };
  const bool bn = config_.batch_norm;
  // Trunk block: conv, optional batch norm, ReLU, optional pooling.
  auto trunk = [&](const std::string& name, int in, const ConvBlockSpec& spec) {
    Block b{conv(name, in, spec.filters, 3, ParamGroup::kBase, !bn), Activation::kRelu, spec.downsample};
    if (bn) {
      b.bn.gamma = add_param(name + ".bn.gamma", {spec.filters}, ParamGroup::kBase);
      b.bn.beta = add_param(name + ".bn.beta", {spec.filters}, ParamGroup::kBase);
      b.bn.mean = add_param(name + ".bn.running_mean", {spec.filters}, ParamGroup::kBuffer);
      b.bn.var = add_param(name + ".bn.running_var", {spec.filters}, ParamGroup::kBuffer);
    }
    return b;
  };
  auto alias = [&](const std::string& from, const std::string& to) {
    layers_->index[from + ".weight"] = layers_->index.at(to + ".weight");
    layers_->index[from + ".bias"] = layers_->index.at(to + ".bias");
  };
  const auto added = ParamGroup::kAdded;
  const auto relu = Activation::kRelu;

  int ch = 3;
  for (size_t i = 0; i < config_.stem.size(); ++i) {
    const auto& s = config_.stem[i];
    layers_->stem.push_back(trunk("stem." + std::to_string(i), ch, s));
    ch = s.filters;
  }
  layers_->a1 = trunk("a1", ch, config_.a1);
  layers_->a2 = trunk("a2", config_.a1.filters, config_.a2);
  layers_->a3 = trunk("a3", config_.a2.filters, config_.a3);
  layers_->a4 = {conv("a4", config_.a3.filters, config_.num_classes, 1, added), Activation::kNone, false};

  if (config_.has_b()) {
    const int fa = config_.b_adapter_filters, fs = config_.b_shared_filters;
    layers_->b1_adapter = {conv("b1.adapter", config_.a1.filters, fa, 3, added), relu, false};
    layers_->b2_adapter = {conv("b2.adapter", config_.a2.filters, fa, 3, added), relu, false};
    if (config_.share_b_layers) {
      layers_->b1_mid = {conv("b.shared.mid", fa, fs, 3, added), relu, false};
      layers_->b1_out = {conv("b.shared.out", fs, 1, 1, added), Activation::kSigmoid, false};
      layers_->b2_mid = layers_->b1_mid;
      layers_->b2_out = layers_->b1_out;
      alias("b1.mid", "b.shared.mid");
      alias("b2.mid", "b.shared.mid");
      alias("b1.out", "b.shared.out");
      alias("b2.out", "b.shared.out");
    } else {
      layers_->b1_mid = {conv("b1.mid", fa, fs, 3, added), relu, false};
      layers_->b1_out = {conv("b1.out", fs, 1, 1, added), Activation::kSigmoid, false};
      layers_->b2_mid = {conv("b2.mid", fa, fs, 3, added), relu, false};
      layers_->b2_out = {conv("b2.out", fs, 1, 1, added), Activation::kSigmoid, false};
    }
  }
  if (config_.has_c()) {
    layers_->c_mid = {conv("c.mid", config_.a3.filters, config_.c_head_filters, 3, added), relu, false};
    layers_->c_out = {conv("c.out", config_.c_head_filters, 1, 1, added), Activation::kSigmoid, false};
  }
}

template <class T>
size_t Network<T>::param_index(const std::string& name) const {
  auto it = layers_->index.find(name);
  if (it == layers_->index.end()) fail(ErrorCode::kOutOfRange, "no parameter named '" + name + "'");
  return it->second;
}

template <class T>
size_t Network<T>::parameter_count() const {
  size_t n = 0;
  for (size_t i = 0; i < values_.size(); ++i)
    if (meta_[i].group != ParamGroup::kBuffer) n += values_[i].size();
  return n;
}

template <class T>
std::vector<Parameter> Network<T>::export_parameters() const {
  std::vector<Parameter> out;
  out.reserve(values_.size());
  for (size_t i = 0; i < values_.size(); ++i) {
    Parameter p{meta_[i].name, meta_[i].shape, meta_[i].group, {}};
    p.values.reserve(values_[i].size());
    for (T v : values_[i]) p.values.push_back(static_cast<float>(v));
    out.push_back(std::move(p));
  }
  return out;
}

template <class T>
Outputs<T> Network<T>::forward(const Tensor<T>& images) const {
  ForwardState<T> state;
  return run(images, state, false);
}

template <class T>
Outputs<T> Network<T>::forward(const Tensor<T>& images, ForwardState<T>& state) const {
  return run(images, state, true);
}

template <class T>
void Network<T>::update_running_stats(const ForwardState<T>& state, double momentum) {
  const auto& s = *state.impl;
  const Layers& L = *layers_;
  auto fold = [&](const Block& b, const BlockCache<T>& c) {
    if (!b.bn.enabled()) return;
    if (c.batch_mean.empty()) fail(ErrorCode::kInvalidArgument, "no training-mode batch statistics recorded");
    const T keep = static_cast<T>(1 - momentum), take = static_cast<T>(momentum);
    const T m = static_cast<T>(c.normed.channel_stride());
    const T unbias = m > 1 ? m / (m - 1) : T(1);
    for (size_t k = 0; k < c.batch_mean.size(); ++k) {
      values_[b.bn.mean][k] = keep * values_[b.bn.mean][k] + take * c.batch_mean[k];
      values_[b.bn.var][k] = keep * values_[b.bn.var][k] + take * c.batch_var[k] * unbias;
    }
  };
  if (s.stem.size() != L.stem.size()) fail(ErrorCode::kInvalidArgument, "forward state does not match network");
  for (size_t i = 0; i < L.stem.size(); ++i) fold(L.stem[i], s.stem[i]);
  fold(L.a1, s.a1);
  fold(L.a2, s.a2);
  fold(L.a3, s.a3);
}

template <class T>
Outputs<T> Network<T>::run(const Tensor<T>& images, ForwardState<T>& state, bool training) const {
  if (images.channels != 3 || images.height != config_.input_height ||
      images.width != config_.input_width || images.batch < 1)
    fail(ErrorCode::kShapeMismatch, "input batch does not match the configured input size");
  auto& s = *state.impl;
  const Layers& L = *layers_;
  s.batch = images.batch;
  s.stem.resize(L.stem.size());

  Tensor<T> x = images;
  for (size_t i = 0; i < L.stem.size(); ++i) x = block_forward(x, L.stem[i], values_, s.stem[i], training);
  const Tensor<T> fa1 = block_forward(x, L.a1, values_, s.a1, training);
  const Tensor<T> fa2 = block_forward(fa1, L.a2, values_, s.a2, training);
  const Tensor<T> fa3 = block_forward(fa2, L.a3, values_, s.a3, training);

  Outputs<T> out;
  out.batch = images.batch;
  out.num_classes = config_.num_classes;
  out.f_a4 = block_forward(fa3, L.a4, values_, s.a4, training);

  const int n = images.batch, c = config_.num_classes;
  out.logits.assign(static_cast<size_t>(n) * c, T(0));
  out.class_probs.assign(out.logits.size(), T(0));
  const size_t plane = out.f_a4.plane();
  for (int k = 0; k < c; ++k)
    for (int b = 0; b < n; ++b) {
      const T* p = out.f_a4.data.data() + k * out.f_a4.channel_stride() + b * plane;
      T acc = T(0);
      for (size_t i = 0; i < plane; ++i) acc += p[i];
      out.logits[static_cast<size_t>(b) * c + k] = acc / static_cast<T>(plane);
    }
  for (int b = 0; b < n; ++b) {
    const T* z = out.logits.data() + static_cast<size_t>(b) * c;
    T* p = out.class_probs.data() + static_cast<size_t>(b) * c;
    const T mx = *std::max_element(z, z + c);
    T sum = T(0);
    for (int k = 0; k < c; ++k) sum += (p[k] = std::exp(z[k] - mx));
    for (int k = 0; k < c; ++k) p[k] /= sum;
  }

  if (config_.has_b()) {
    out.f_b1 = block_forward(block_forward(block_forward(fa1, L.b1_adapter, values_, s.b1_adapter, training),
                                           L.b1_mid, values_, s.b1_mid, training),
                             L.b1_out, values_, s.b1_out, training);
    out.f_b2 = block_forward(block_forward(block_forward(fa2, L.b2_adapter, values_, s.b2_adapter, training),
                                           L.b2_mid, values_, s.b2_mid, training),
                             L.b2_out, values_, s.b2_out, training);
  }
  if (config_.has_c())
    out.f_c = block_forward(block_forward(fa3, L.c_mid, values_, s.c_mid, training), L.c_out, values_, s.c_out, training);
  return out;
}

template <class T>
void Network<T>::backward(const ForwardState<T>& state, const OutputGrads<T>& grads,
                          std::vector<std::vector<T>>& param_grads) const {
  const auto& s = *state.impl;
  const Layers& L = *layers_;
  if (param_grads.size() != values_.size()) {
    param_grads.resize(values_.size());
    for (size_t i = 0; i < values_.size(); ++i) param_grads[i].assign(values_[i].size(), T(0));
  }
  const int n = s.batch, c = config_.num_classes;

  auto branch = [&](const Tensor<T>& dmap, const Block& out_l, const BlockCache<T>& out_c,
                    const Block& mid_l, const BlockCache<T>& mid_c, const Block* first_l,
                    const BlockCache<T>* first_c, Tensor<T>& dtap) {
    if (!dmap.same_shape(out_c.output)) fail(ErrorCode::kShapeMismatch, "branch gradient shape mismatch");
    Tensor<T> dmid, dfirst;
    block_backward(out_c, out_l, dmap, values_, param_grads, &dmid);
    block_backward(mid_c, mid_l, std::move(dmid), values_, param_grads, first_l ? &dfirst : &dtap);
    if (first_l) block_backward(*first_c, *first_l, std::move(dfirst), values_, param_grads, &dtap);
  };

  Tensor<T> d_a3, d_a2, d_a1, d_stem;
  if (!grads.logits.empty()) {
    if (grads.logits.size() != static_cast<size_t>(n) * c)
      fail(ErrorCode::kShapeMismatch, "logit gradient shape mismatch");
    const Tensor<T>& fa4 = s.a4.output;
    Tensor<T> d_a4(fa4.channels, fa4.batch, fa4.height, fa4.width);
    const T inv = T(1) / static_cast<T>(fa4.plane());
    for (int k = 0; k < c; ++k)
      for (int b = 0; b < n; ++b) {
        T* p = d_a4.data.data() + k * d_a4.channel_stride() + b * d_a4.plane();
        std::fill_n(p, d_a4.plane(), grads.logits[static_cast<size_t>(b) * c + k] * inv);
      }
    block_backward(s.a4, L.a4, std::move(d_a4), values_, param_grads, &d_a3);
  }
  if (config_.has_c() && has_grad(grads.f_c))
    branch(grads.f_c, L.c_out, s.c_out, L.c_mid, s.c_mid, nullptr, nullptr, d_a3);
  if (!d_a3.data.empty()) block_backward(s.a3, L.a3, std::move(d_a3), values_, param_grads, &d_a2);
  if (config_.has_b() && has_grad(grads.f_b2))
    branch(grads.f_b2, L.b2_out, s.b2_out, L.b2_mid, s.b2_mid, &L.b2_adapter, &s.b2_adapter, d_a2);
  if (!d_a2.data.empty()) block_backward(s.a2, L.a2, std::move(d_a2), values_, param_grads, &d_a1);
  if (config_.has_b() && has_grad(grads.f_b1))
    branch(grads.f_b1, L.b1_out, s.b1_out, L.b1_mid, s.b1_mid, &L.b1_adapter, &s.b1_adapter, d_a1);
  if (d_a1.data.empty()) return;
  block_backward(s.a1, L.a1, std::move(d_a1), values_, param_grads, L.stem.empty() ? nullptr : &d_stem);
  for (size_t i = L.stem.size(); i-- > 0;) {
    Tensor<T> d_prev;
    block_backward(s.stem[i], L.stem[i], std::move(d_stem), values_, param_grads, i > 0 ? &d_prev : nullptr);
    d_stem = std::move(d_prev);
  }
}

template class Network<float>;
template class Network<double>;
template struct ForwardState<float>;
template struct ForwardState<double>;

LocalizationMap extract_attention(const Tensor<float>& f_a4, int image, int class_idx) {
  if (class_idx < 0 || class_idx >= f_a4.channels)
    fail(ErrorCode::kOutOfRange, "class index out of range");
  return normalize_map(plane_to_map(f_a4, class_idx, image));
}

std::vector<int> predict_topk(std::span<const float> scores, int k) {
  if (k < 1 || k > static_cast<int>(scores.size()))
    fail(ErrorCode::kOutOfRange, "k must be within [1, number of classes]");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  order.resize(k);
  return order;
}

}  // namespace spg
