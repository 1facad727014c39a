#ifndef SPG_COMMANDS_HPP_
#define SPG_COMMANDS_HPP_

#include <string>
#include <vector>

#include "spg/config.hpp"
#include "spg/evaluation.hpp"
#include "spg/model.hpp"

// File-level workflows behind the CLI subcommands.
namespace spg::commands {

// Replaces "key = ..." inside [section] of a canonical config text.
std::string apply_override(const std::string& text, const std::string& section, const std::string& key,
                           const std::string& value);

// A dataset root resolves to its train/ split; a split directory is used as is.
std::string resolve_split(const std::string& data_dir, const std::string& split);

void train_from_dir(const RunConfig& config, const std::string& data_dir, const std::string& checkpoint_path,
                    const std::string& log_path, bool resume);

Network<float> load_network(const std::string& checkpoint_path);

struct EvalOutput {
  EvalReport report;
  std::vector<PredictionRecord> predictions;
};

// Calibrates on <data>/val, evaluates <data>/test. An external ranking file,
// when given, replaces the network's class ranking.
EvalOutput evaluate_checkpoint(const Network<float>& net, const std::string& data_dir,
                               const std::string& external_path);

// Scores a prediction TSV against a split's ground truth.
EvalReport evaluate_prediction_file(const std::string& predictions_path, const std::string& split_dir,
                                    const std::string& external_path);

// Writes <out>/<image_id>_<kind>.spgm for each requested image (all when ids is empty).
std::vector<std::string> export_maps(const Network<float>& net, const std::string& split_dir,
                                     const std::vector<std::string>& ids, const std::string& out_dir,
                                     const Thresholds& fuse);

// Writes <out>/<image_id>_overlay.ppm with predicted (green) and optionally
// ground-truth (red) boxes.
std::vector<std::string> render(const Network<float>& net, const std::string& split_dir,
                                const std::vector<std::string>& ids, double threshold, bool draw_truth,
                                const std::string& out_dir);

}  // namespace spg::commands

#endif  // SPG_COMMANDS_HPP_
