#include "spg/commands.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spg/dataset.hpp"
#include "spg/pipeline.hpp"

namespace fs = std::filesystem;

namespace spg::commands {

std::string apply_override(const std::string& text, const std::string& section, const std::string& key,
                           const std::string& value) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line, current;
  bool replaced = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '[') current = line.substr(1, line.find(']') - 1);
    const auto eq = line.find(" = ");
    if (current == section && eq != std::string::npos && line.substr(0, eq) == key) {
      out << key << " = " << value << '\n';
      replaced = true;
    } else {
      out << line << '\n';
    }
  }
  if (!replaced) fail(ErrorCode::kInvalidArgument, "unknown setting " + section + "." + key);
  return out.str();
}

std::string resolve_split(const std::string& data_dir, const std::string& split) {
  if (fs::exists(fs::path(data_dir) / "labels.csv")) return data_dir;
  const fs::path p = fs::path(data_dir) / split;
  if (!fs::exists(p / "labels.csv"))
    fail(ErrorCode::kIo, "no " + split + " split (labels.csv) under '" + data_dir + "'");
  return p.string();
}

void train_from_dir(const RunConfig& config, const std::string& data_dir, const std::string& checkpoint_path,
                    const std::string& log_path, bool resume) {
  const auto data = load_dataset(resolve_split(data_dir, "train"));
  TrainOptions opts;
  opts.checkpoint_path = checkpoint_path;
  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path, resume ? std::ios::app : std::ios::trunc);
    if (!log) fail(ErrorCode::kIo, "cannot write training log '" + log_path + "'");
    opts.log = &log;
  }
  if (resume && fs::exists(checkpoint_path)) opts.resume = load_checkpoint(checkpoint_path, &config);
  const Checkpoint final_state = train(config, data, opts);
  save_checkpoint(final_state, checkpoint_path);
}

Network<float> load_network(const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  return Network<float>(ck.config.network, ck.params);
}

EvalOutput evaluate_checkpoint(const Network<float>& net, const std::string& data_dir,
                               const std::string& external_path) {
  const auto val = load_dataset((fs::path(data_dir) / "val").string());
  const auto test = load_dataset((fs::path(data_dir) / "test").string());
  EvaluationRun run = evaluate_network(net, val, test);
  EvalOutput out{run.report, std::move(run.predictions)};
  if (!external_path.empty()) {
    const auto gt = ground_truth(test);
    out.predictions = apply_external_ranking(out.predictions, read_external_ranking(external_path));
    out.report = evaluate_report(out.predictions, gt);
    out.report.threshold = run.calibration.threshold;
  }
  return out;
}

EvalReport evaluate_prediction_file(const std::string& predictions_path, const std::string& split_dir,
                                    const std::string& external_path) {
  auto preds = read_predictions(predictions_path);
  const auto records = load_dataset(split_dir);
  const auto gt = ground_truth(records);
  if (!external_path.empty()) preds = apply_external_ranking(preds, read_external_ranking(external_path));
  return evaluate_report(preds, gt);
}

namespace {

std::vector<size_t> select(const std::vector<ImageRecord>& records, const std::vector<std::string>& ids) {
  std::vector<size_t> picked;
  if (ids.empty()) {
    for (size_t i = 0; i < records.size(); ++i) picked.push_back(i);
    return picked;
  }
  for (const auto& id : ids) {
    size_t i = 0;
    while (i < records.size() && records[i].id != id) ++i;
    if (i == records.size()) fail(ErrorCode::kInvalidArgument, "unknown image id '" + id + "'");
    picked.push_back(i);
  }
  return picked;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create '" + dir + "': " + ec.message());
}

}  // namespace

std::vector<std::string> export_maps(const Network<float>& net, const std::string& split_dir,
                                     const std::vector<std::string>& ids, const std::string& out_dir,
                                     const Thresholds& fuse) {
  const auto records = load_dataset(split_dir);
  std::vector<ImageRecord> chosen;
  for (size_t i : select(records, ids)) chosen.push_back(records[i]);
  ensure_dir(out_dir);
  const auto inference = run_inference(net, chosen);
  std::vector<std::string> written;
  for (size_t i = 0; i < chosen.size(); ++i) {
    const int cls = chosen[i].label >= 0 && chosen[i].label < net.config().num_classes
                        ? chosen[i].label
                        : predict_topk(inference[i].class_probs, 1).front();
    for (const MapDump& d : export_panels(inference[i], chosen[i].id, cls, fuse)) {
      const std::string path = (fs::path(out_dir) / (chosen[i].id + "_" + map_kind_name(d.kind) + ".spgm")).string();
      write_map_dump(d, path);
      written.push_back(path);
    }
  }
  return written;
}

std::vector<std::string> render(const Network<float>& net, const std::string& split_dir,
                                const std::vector<std::string>& ids, double threshold, bool draw_truth,
                                const std::string& out_dir) {
  const auto records = load_dataset(split_dir);
  std::vector<ImageRecord> chosen;
  for (size_t i : select(records, ids)) chosen.push_back(records[i]);
  ensure_dir(out_dir);
  const auto inference = run_inference(net, chosen);
  std::vector<std::string> written;
  for (size_t i = 0; i < chosen.size(); ++i) {
    const ImageRecord& r = chosen[i];
    const int cls = predict_topk(inference[i].class_probs, 1).front();
    const LocalizationMap heat = image_attention(inference[i], cls, r.image.height, r.image.width);
    const auto boxes = extract_bboxes(heat, threshold, 1);
    const std::vector<BBox> none;
    const Image out = render_overlay(r.image, heat, boxes, draw_truth ? r.boxes : none);
    const std::string path = (fs::path(out_dir) / (r.id + "_overlay.ppm")).string();
    write_ppm(out, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace spg::commands
