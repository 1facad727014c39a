#include "spg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "blas.hpp"
#include "rng.hpp"
#include "spg/config.hpp"

namespace spg {

void TrainConfig::validate() const {
  if (epochs < 0) fail(ErrorCode::kInvalidArgument, "epochs must be >= 0");
  if (batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!(base_lr > 0) || !(added_lr > 0) || !(lr_decay_factor > 0))
    fail(ErrorCode::kInvalidArgument, "learning rates and decay factor must be > 0");
  if (momentum < 0 || momentum >= 1) fail(ErrorCode::kInvalidArgument, "momentum must be in [0,1)");
  if (weight_decay < 0) fail(ErrorCode::kInvalidArgument, "weight_decay must be >= 0");
  if (!(aux_loss_weight >= 0)) fail(ErrorCode::kInvalidArgument, "aux_loss_weight must be >= 0");
}

double TrainConfig::learning_rate(ParamGroup group, int epoch) const {
  const double base = group == ParamGroup::kAdded ? added_lr : base_lr;
  return base / std::pow(lr_decay_factor, epoch);
}

template <class T>
std::vector<SupervisionSet> build_batch_supervision(const Outputs<T>& outputs, std::span<const int> labels,
                                                    const GuidanceOptions& options) {
  if (labels.size() != static_cast<size_t>(outputs.batch))
    fail(ErrorCode::kShapeMismatch, "one label per image required");
  std::vector<SupervisionSet> sets;
  if (outputs.f_b1.data.empty() || outputs.f_b2.data.empty()) return sets;
  const SpatialSize c_size = outputs.f_c.data.empty() ? SpatialSize{}
                                                      : SpatialSize{outputs.f_c.height, outputs.f_c.width};
  sets.reserve(labels.size());
  for (int i = 0; i < outputs.batch; ++i) {
    if (labels[i] < 0 || labels[i] >= outputs.num_classes)
      fail(ErrorCode::kOutOfRange, "label out of range");
    const LocalizationMap attention = normalize_map(plane_to_map(outputs.f_a4, labels[i], i));
    sets.push_back(build_supervision_set(attention, plane_to_map(outputs.f_b2, 0, i),
                                         plane_to_map(outputs.f_b1, 0, i), c_size, options));
  }
  return sets;
}

template <class T>
LossBreakdown compute_total_loss(const Outputs<T>& outputs, std::span<const int> labels,
                                 std::span<const SupervisionSet> supervision, double alpha,
                                 OutputGrads<T>* grads) {
  const int n = outputs.batch, c = outputs.num_classes;
  if (labels.size() != static_cast<size_t>(n)) fail(ErrorCode::kShapeMismatch, "one label per image required");
  if (!(alpha >= 0)) fail(ErrorCode::kInvalidArgument, "alpha must be >= 0");
  const double inv_n = 1.0 / n;
  LossBreakdown loss;
  if (grads) {
    *grads = OutputGrads<T>{};
    grads->logits.assign(static_cast<size_t>(n) * c, T(0));
  }
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= c) fail(ErrorCode::kOutOfRange, "label out of range");
    double mx = -INFINITY;
    for (int k = 0; k < c; ++k) mx = std::max(mx, static_cast<double>(outputs.logit(i, k)));
    double sum = 0.0;
    for (int k = 0; k < c; ++k) sum += std::exp(static_cast<double>(outputs.logit(i, k)) - mx);
    loss.cls += (mx + std::log(sum) - outputs.logit(i, y)) * inv_n;
    if (grads)
      for (int k = 0; k < c; ++k)
        grads->logits[static_cast<size_t>(i) * c + k] =
            static_cast<T>((outputs.prob(i, k) - (k == y ? 1.0 : 0.0)) * inv_n);
  }

  const bool aux = alpha > 0 && !outputs.f_b1.data.empty() && !outputs.f_b2.data.empty();
  if (aux) {
    if (supervision.size() != static_cast<size_t>(n))
      fail(ErrorCode::kShapeMismatch, "one supervision set per image required");
    const bool with_c = !outputs.f_c.data.empty();
    if (grads) {
      auto zero_like = [](const Tensor<T>& t) { return Tensor<T>(t.channels, t.batch, t.height, t.width); };
      grads->f_b1 = zero_like(outputs.f_b1);
      grads->f_b2 = zero_like(outputs.f_b2);
      if (with_c) grads->f_c = zero_like(outputs.f_c);
    }
    auto term = [&](const Tensor<T>& map, const GuidanceMask& target, Tensor<T>* g, int i) {
      const size_t plane = map.plane();
      if (target.size() != plane) fail(ErrorCode::kShapeMismatch, "guidance target resolution mismatch");
      std::span<const T> pred(map.data.data() + i * plane, plane);
      std::span<T> grad = g ? std::span<T>(g->data.data() + i * plane, plane) : std::span<T>();
      return masked_bce<T>(pred, target.labels, grad, alpha * inv_n) * inv_n;
    };
    for (int i = 0; i < n; ++i) {
      const SupervisionSet& s = supervision[i];
      loss.b2 += term(outputs.f_b2, s.m_a, grads ? &grads->f_b2 : nullptr, i);
      loss.b1 += term(outputs.f_b1, s.m_b2, grads ? &grads->f_b1 : nullptr, i);
      if (with_c) loss.c += term(outputs.f_c, s.m_fuse, grads ? &grads->f_c : nullptr, i);
    }
  }
  loss.total = loss.cls + alpha * (loss.b1 + loss.b2 + loss.c);
  return loss;
}

template std::vector<SupervisionSet> build_batch_supervision<float>(const Outputs<float>&, std::span<const int>,
                                                                    const GuidanceOptions&);
template std::vector<SupervisionSet> build_batch_supervision<double>(const Outputs<double>&, std::span<const int>,
                                                                     const GuidanceOptions&);
template LossBreakdown compute_total_loss<float>(const Outputs<float>&, std::span<const int>,
                                                 std::span<const SupervisionSet>, double, OutputGrads<float>*);
template LossBreakdown compute_total_loss<double>(const Outputs<double>&, std::span<const int>,
                                                  std::span<const SupervisionSet>, double, OutputGrads<double>*);

Tensor<float> make_batch(std::span<const ImageRecord> records, std::span<const size_t> indices) {
  if (indices.empty()) fail(ErrorCode::kInvalidArgument, "empty batch");
  const Image& first = records[indices[0]].image;
  Tensor<float> batch(3, static_cast<int>(indices.size()), first.height, first.width);
  for (size_t b = 0; b < indices.size(); ++b) {
    const Image& img = records[indices[b]].image;
    if (img.height != first.height || img.width != first.width)
      fail(ErrorCode::kShapeMismatch, "images in a batch must share one size");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) batch.at(c, static_cast<int>(b), y, x) = img.at(y, x, c);
  }
  return batch;
}

std::vector<size_t> epoch_order(size_t count, uint64_t seed, int epoch) {
  std::vector<size_t> order(count);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch)));
  for (size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

Checkpoint train(const RunConfig& config, std::span<const ImageRecord> data, const TrainOptions& options) {
  blas::ensure_deterministic();
  config.network.validate();
  config.train.validate();
  if (data.empty()) fail(ErrorCode::kInvalidArgument, "training set is empty");
  for (const auto& r : data) {
    if (r.label < 0 || r.label >= config.network.num_classes)
      fail(ErrorCode::kOutOfRange, "training label out of range for image " + r.id);
    if (r.image.height != config.network.input_height || r.image.width != config.network.input_width)
      fail(ErrorCode::kShapeMismatch, "image " + r.id + " does not match the configured input size");
  }

  const TrainConfig& tc = config.train;
  Network<float> net(config.network);
  std::vector<std::vector<float>> momentum(net.num_param_tensors());
  for (size_t i = 0; i < momentum.size(); ++i) momentum[i].assign(net.param_values(i).size(), 0.0f);
  int start_epoch = 0;
  if (options.resume) {
    const Checkpoint& r = *options.resume;
    if (resume_hash(r.config) != resume_hash(config))
      fail(ErrorCode::kInvalidArgument, "resume checkpoint was produced by a different configuration");
    net = Network<float>(config.network, r.params);
    if (r.momentum.size() != momentum.size()) fail(ErrorCode::kFormat, "checkpoint momentum table mismatch");
    for (size_t i = 0; i < momentum.size(); ++i) {
      if (r.momentum[i].size() != momentum[i].size()) fail(ErrorCode::kFormat, "checkpoint momentum size mismatch");
      momentum[i] = r.momentum[i];
    }
    start_epoch = r.epoch;
  }
  int end_epoch = tc.epochs;
  if (options.max_epochs) end_epoch = std::min(end_epoch, start_epoch + *options.max_epochs);

  auto snapshot = [&](int epoch) {
    Checkpoint ck{config, epoch, net.export_parameters(), momentum};
    return ck;
  };

  const double alpha = tc.aux_loss_weight;
  const bool aux = alpha > 0 && config.network.has_b();
  long step = 0;
  for (int e = 0; e < start_epoch; ++e) step += (static_cast<long>(data.size()) + tc.batch_size - 1) / tc.batch_size;
  std::vector<std::vector<float>> grads;
  ForwardState<float> state;
  for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const auto order = epoch_order(data.size(), tc.seed, epoch);
    std::vector<float> lr(net.num_param_tensors());
    for (size_t i = 0; i < lr.size(); ++i) lr[i] = static_cast<float>(tc.learning_rate(net.param_group(i), epoch));
    for (size_t begin = 0; begin < order.size(); begin += tc.batch_size, ++step) {
      const size_t end = std::min(order.size(), begin + tc.batch_size);
      std::span<const size_t> idx(order.data() + begin, end - begin);
      std::vector<int> labels;
      for (size_t i : idx) labels.push_back(data[i].label);

      auto diverged = [&](const LossBreakdown& loss) {
        std::ostringstream msg;
        msg << "training diverged at step " << step << " (epoch " << epoch << "): L_total=" << loss.total
            << " L_cls=" << loss.cls << " L_B1=" << loss.b1 << " L_B2=" << loss.b2 << " L_C=" << loss.c;
        fail(ErrorCode::kDiverged, msg.str());
      };
      const Outputs<float> out = net.forward(make_batch(data, idx), state);
      // Guidance maps cannot be built from non-finite attention.
      for (float z : out.logits)
        if (!std::isfinite(z)) diverged(compute_total_loss<float>(out, labels, {}, 0.0, nullptr));
      std::vector<SupervisionSet> sup;
      if (aux) sup = build_batch_supervision(out, labels, config.guidance);
      OutputGrads<float> og;
      const LossBreakdown loss = compute_total_loss<float>(out, labels, sup, alpha, &og);
      if (!std::isfinite(loss.total)) diverged(loss);
      for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0f);
      net.backward(state, og, grads);
      net.update_running_stats(state);

      const float mu = static_cast<float>(tc.momentum);
      const float wd = static_cast<float>(tc.weight_decay);
      for (size_t i = 0; i < grads.size(); ++i) {
        if (net.param_group(i) == ParamGroup::kBuffer) continue;
        std::vector<float>& p = net.param_values(i);
        std::vector<float>& v = momentum[i];
        const std::vector<float>& g = grads[i];
        for (size_t j = 0; j < p.size(); ++j) {
          v[j] = mu * v[j] + (g[j] + wd * p[j]);
          p[j] -= lr[i] * v[j];
        }
      }
      if (options.log) {
        *options.log << step << '\t' << epoch << '\t' << tc.learning_rate(ParamGroup::kBase, epoch) << '\t'
                     << loss.total << '\t' << loss.cls << '\t' << loss.b1 << '\t' << loss.b2 << '\t' << loss.c
                     << '\n';
      }
    }
    if (!options.checkpoint_path.empty()) save_checkpoint(snapshot(epoch + 1), options.checkpoint_path);
  }
  return snapshot(end_epoch);
}

}  // namespace spg
