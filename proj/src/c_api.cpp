#include "spg/spg.h"

#include <algorithm>
#include <cstring>
#include <memory>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "spg/commands.hpp"
#include "spg/config.hpp"
#include "spg/dataset.hpp"
#include "spg/guidance.hpp"
#include "spg/localization.hpp"
#include "spg/pipeline.hpp"

struct spg_dataset_spec {
  spg::DatasetSpec spec;
};

struct spg_run_config {
  spg::RunConfig config;
};

struct spg_network {
  spg::Network<float> net;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
spg_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SPG_OK;
  } catch (const spg::Error& e) {
    g_last_error = e.what();
    return static_cast<spg_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SPG_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPG_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) spg::fail(spg::ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

void copy_text(const std::string& text, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buf == nullptr || capacity == 0) return;
  if (capacity < text.size() + 1)
    spg::fail(spg::ErrorCode::kOutOfRange, "buffer too small: need " + std::to_string(text.size() + 1) + " bytes");
  std::memcpy(buf, text.c_str(), text.size() + 1);
}

spg_eval_report to_c(const spg::EvalReport& r) {
  return {r.top1_loc_err, r.top5_loc_err, r.top5_star_loc_err, r.gt_known_loc_err, r.top1_cls_err,
          r.top5_cls_err, static_cast<uint64_t>(r.images), r.threshold};
}

spg::EvalReport from_c(const spg_eval_report& r) {
  spg::EvalReport out;
  out.top1_loc_err = r.top1_loc_err;
  out.top5_loc_err = r.top5_loc_err;
  out.top5_star_loc_err = r.top5_star_loc_err;
  out.gt_known_loc_err = r.gt_known_loc_err;
  out.top1_cls_err = r.top1_cls_err;
  out.top5_cls_err = r.top5_cls_err;
  out.images = r.images;
  out.threshold = r.threshold;
  return out;
}

std::vector<std::string> id_list(const char* const* ids, size_t count) {
  if (count > 0) require(ids, "ids");
  std::vector<std::string> out;
  for (size_t i = 0; i < count; ++i) {
    require(ids[i], "image id");
    out.emplace_back(ids[i]);
  }
  return out;
}

spg::LocalizationMap map_from(const float* data, int height, int width) {
  require(data, "map");
  if (height < 1 || width < 1) spg::fail(spg::ErrorCode::kInvalidArgument, "map dimensions must be positive");
  spg::LocalizationMap m(height, width);
  std::memcpy(m.scores.data(), data, sizeof(float) * m.scores.size());
  return m;
}

}  // namespace

extern "C" {

SPG_API const char* spg_last_error(void) { return g_last_error.c_str(); }

SPG_API const char* spg_status_name(spg_status status) {
  switch (status) {
    case SPG_OK: return "ok";
    case SPG_INVALID_ARGUMENT: return "invalid argument";
    case SPG_SHAPE_MISMATCH: return "shape mismatch";
    case SPG_OUT_OF_RANGE: return "out of range";
    case SPG_IO: return "i/o error";
    case SPG_FORMAT: return "format error";
    case SPG_DIVERGED: return "diverged";
    case SPG_INTERNAL: return "internal error";
  }
  return "unknown status";
}

SPG_API const char* spg_version(void) { return "1.0.0"; }

SPG_API spg_status spg_dataset_spec_create(const char* path, spg_dataset_spec** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<spg_dataset_spec>();
    if (path) h->spec = spg::load_dataset_spec(path);
    *out = h.release();
  });
}

SPG_API spg_status spg_dataset_spec_set(spg_dataset_spec* spec, const char* key, const char* value) {
  return guarded([&] {
    require(spec, "spec");
    require(key, "key");
    require(value, "value");
    const std::string text = spg::commands::apply_override(spg::to_text(spec->spec), "dataset", key, value);
    spec->spec = spg::parse_dataset_spec(text);
  });
}

SPG_API void spg_dataset_spec_free(spg_dataset_spec* spec) { delete spec; }

SPG_API spg_status spg_generate_dataset(const spg_dataset_spec* spec, const char* out_dir) {
  return guarded([&] {
    require(spec, "spec");
    require(out_dir, "out_dir");
    spg::generate_dataset(spec->spec, out_dir);
  });
}

SPG_API spg_status spg_run_config_create(const char* path, spg_run_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<spg_run_config>();
    if (path) h->config = spg::load_run_config(path);
    *out = h.release();
  });
}

SPG_API spg_status spg_run_config_set(spg_run_config* config, const char* section, const char* key,
                                      const char* value) {
  return guarded([&] {
    require(config, "config");
    require(section, "section");
    require(key, "key");
    require(value, "value");
    const std::string text = spg::commands::apply_override(spg::to_text(config->config), section, key, value);
    config->config = spg::parse_run_config(text);
  });
}

SPG_API spg_status spg_run_config_text(const spg_run_config* config, char* buf, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(config, "config");
    copy_text(spg::to_text(config->config), buf, capacity, needed);
  });
}

SPG_API void spg_run_config_free(spg_run_config* config) { delete config; }

SPG_API spg_status spg_train(const spg_run_config* config, const char* data_dir, const char* checkpoint_path,
                             const char* log_path, int resume) {
  return guarded([&] {
    require(config, "config");
    require(data_dir, "data_dir");
    require(checkpoint_path, "checkpoint_path");
    spg::commands::train_from_dir(config->config, data_dir, checkpoint_path, opt(log_path), resume != 0);
  });
}

SPG_API spg_status spg_network_load(const char* checkpoint_path, spg_network** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    *out = nullptr;
    *out = new spg_network{spg::commands::load_network(checkpoint_path)};
  });
}

SPG_API void spg_network_free(spg_network* net) { delete net; }

SPG_API spg_status spg_network_info(const spg_network* net, int* num_classes, int* input_height,
                                    int* input_width) {
  return guarded([&] {
    require(net, "net");
    const auto& c = net->net.config();
    if (num_classes) *num_classes = c.num_classes;
    if (input_height) *input_height = c.input_height;
    if (input_width) *input_width = c.input_width;
  });
}

SPG_API spg_status spg_network_predict(const spg_network* net, const float* image, float* probs, int class_index,
                                       float* attention) {
  return guarded([&] {
    require(net, "net");
    require(image, "image");
    require(probs, "probs");
    const auto& c = net->net.config();
    spg::ImageRecord rec;
    rec.image.height = c.input_height;
    rec.image.width = c.input_width;
    rec.image.rgb.assign(image, image + static_cast<size_t>(c.input_height) * c.input_width * 3);
    const auto inf = spg::run_inference(net->net, std::span<const spg::ImageRecord>(&rec, 1));
    std::copy(inf[0].class_probs.begin(), inf[0].class_probs.end(), probs);
    if (attention) {
      const auto m = spg::image_attention(inf[0], class_index, c.input_height, c.input_width);
      std::copy(m.scores.begin(), m.scores.end(), attention);
    }
  });
}

SPG_API spg_status spg_evaluate_checkpoint(const spg_network* net, const char* data_dir,
                                           const char* external_ranking, const char* predictions_out,
                                           spg_eval_report* report) {
  return guarded([&] {
    require(net, "net");
    require(data_dir, "data_dir");
    require(report, "report");
    const auto out = spg::commands::evaluate_checkpoint(net->net, data_dir, opt(external_ranking));
    if (predictions_out) spg::write_predictions(out.predictions, predictions_out);
    *report = to_c(out.report);
  });
}

SPG_API spg_status spg_evaluate_predictions(const char* predictions_path, const char* split_dir,
                                            const char* external_ranking, spg_eval_report* report) {
  return guarded([&] {
    require(predictions_path, "predictions_path");
    require(split_dir, "split_dir");
    require(report, "report");
    *report = to_c(spg::commands::evaluate_prediction_file(predictions_path, split_dir, opt(external_ranking)));
  });
}

SPG_API spg_status spg_write_report(const spg_eval_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    require(path, "path");
    const std::string text = spg::report_to_key_values(from_c(*report));
    spg::io::write_file(path, std::vector<uint8_t>(text.begin(), text.end()));
  });
}

SPG_API spg_status spg_report_table(const spg_eval_report* report, char* buf, size_t capacity, size_t* needed) {
  return guarded([&] {
    require(report, "report");
    copy_text(spg::report_to_table(from_c(*report)), buf, capacity, needed);
  });
}

SPG_API spg_status spg_export_maps(const spg_network* net, const char* split_dir, const char* const* ids,
                                   size_t count, double fuse_low, double fuse_high, const char* out_dir,
                                   size_t* written) {
  return guarded([&] {
    require(net, "net");
    require(split_dir, "split_dir");
    require(out_dir, "out_dir");
    spg::Thresholds fuse{fuse_low, fuse_high};
    fuse.validate();
    const auto files = spg::commands::export_maps(net->net, split_dir, id_list(ids, count), out_dir, fuse);
    if (written) *written = files.size();
  });
}

SPG_API spg_status spg_render(const spg_network* net, const char* split_dir, const char* const* ids, size_t count,
                              double threshold, int draw_truth, const char* out_dir, size_t* written) {
  return guarded([&] {
    require(net, "net");
    require(split_dir, "split_dir");
    require(out_dir, "out_dir");
    const auto files =
        spg::commands::render(net->net, split_dir, id_list(ids, count), threshold, draw_truth != 0, out_dir);
    if (written) *written = files.size();
  });
}

SPG_API spg_status spg_seed_mask(const float* map, int height, int width, double low, double high, uint8_t* out) {
  return guarded([&] {
    require(out, "out");
    const auto mask = spg::generate_seed_mask(map_from(map, height, width), spg::Thresholds{low, high});
    std::copy(mask.labels.begin(), mask.labels.end(), out);
  });
}

SPG_API spg_status spg_iou(const spg_bbox* a, const spg_bbox* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = spg::iou(spg::BBox{a->x0, a->y0, a->x1, a->y1}, spg::BBox{b->x0, b->y0, b->x1, b->y1});
  });
}

SPG_API spg_status spg_extract_bboxes(const float* map, int height, int width, double threshold, int max_boxes,
                                      spg_bbox* boxes, int* count) {
  return guarded([&] {
    require(count, "count");
    if (max_boxes > 0) require(boxes, "boxes");
    *count = 0;
    if (max_boxes < 1) spg::fail(spg::ErrorCode::kInvalidArgument, "max_boxes must be >= 1");
    const auto found = spg::extract_bboxes(map_from(map, height, width), threshold, max_boxes);
    for (const auto& b : found) boxes[(*count)++] = spg_bbox{b.x0, b.y0, b.x1, b.y1};
  });
}

}  // extern "C"
