#ifndef SPG_TRAINING_HPP_
#define SPG_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spg/guidance.hpp"
#include "spg/image.hpp"
#include "spg/model.hpp"

namespace spg {

struct TrainConfig {
  int epochs = 2;
  int batch_size = 30;
  double base_lr = 0.001;
  double added_lr = 0.01;  // A4, SPG-B and SPG-C
  double lr_decay_factor = 10.0;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double aux_loss_weight = 1.0;  // alpha; 0 trains the plain classifier only
  uint64_t seed = 1;

  void validate() const;
  // Rate of a parameter group during a zero-based epoch.
  double learning_rate(ParamGroup group, int epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

// Everything that determines a training run.
struct RunConfig {
  NetworkConfig network;
  GuidanceOptions guidance;
  TrainConfig train;
  bool operator==(const RunConfig&) const = default;
};

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double c = 0.0;
};

// Guidance targets for every image of a batch, built from the current
// forward pass with the ground-truth labels.
template <class T>
std::vector<SupervisionSet> build_batch_supervision(const Outputs<T>& outputs, std::span<const int> labels,
                                                    const GuidanceOptions& options);

// L = CE + alpha * (bce(B2, M_A) + bce(B1, M_B2) + bce(C, M_fuse)), each term
// averaged over the batch. Fills grads when non-null. Terms for absent heads
// (or alpha == 0) are zero and produce no gradient.
template <class T>
LossBreakdown compute_total_loss(const Outputs<T>& outputs, std::span<const int> labels,
                                 std::span<const SupervisionSet> supervision, double alpha,
                                 OutputGrads<T>* grads);

struct Checkpoint {
  RunConfig config;
  int epoch = 0;  // completed epochs
  std::vector<Parameter> params;
  std::vector<std::vector<float>> momentum;  // parallel to params
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// Rejects bad magic, truncation, checksum or config-hash mismatch. When
// expected is given, the stored config hash must equal its hash.
Checkpoint load_checkpoint(const std::string& path, const RunConfig* expected = nullptr);

struct TrainOptions {
  std::ostream* log = nullptr;          // per-step TSV lines
  std::string checkpoint_path;          // written after every epoch when set
  std::optional<Checkpoint> resume;     // continue from this state
  // Stops after this many epochs in this call (defaults to all remaining).
  std::optional<int> max_epochs;
};

Tensor<float> make_batch(std::span<const ImageRecord> records, std::span<const size_t> indices);

// Epoch-wise shuffle; a pure function of (seed, epoch).
std::vector<size_t> epoch_order(size_t count, uint64_t seed, int epoch);

Checkpoint train(const RunConfig& config, std::span<const ImageRecord> data, const TrainOptions& options = {});

}  // namespace spg

#endif  // SPG_TRAINING_HPP_
