/* C interface to the spg library. Every fallible call returns spg_status;
 * spg_last_error() describes the most recent failure on the calling thread. */
#ifndef SPG_SPG_H_
#define SPG_SPG_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SPG_BUILDING_LIBRARY)
#define SPG_API __attribute__((visibility("default")))
#else
#define SPG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spg_status {
  SPG_OK = 0,
  SPG_INVALID_ARGUMENT = 1,
  SPG_SHAPE_MISMATCH = 2,
  SPG_OUT_OF_RANGE = 3,
  SPG_IO = 4,
  SPG_FORMAT = 5,
  SPG_DIVERGED = 6,
  SPG_INTERNAL = 7
} spg_status;

typedef struct spg_dataset_spec spg_dataset_spec;
typedef struct spg_run_config spg_run_config;
typedef struct spg_network spg_network;

typedef struct spg_bbox {
  double x0, y0, x1, y1;
} spg_bbox;

typedef struct spg_eval_report {
  double top1_loc_err;
  double top5_loc_err;
  double top5_star_loc_err;
  double gt_known_loc_err;
  double top1_cls_err;
  double top5_cls_err;
  uint64_t images;
  double threshold;
} spg_eval_report;

SPG_API const char* spg_last_error(void);
SPG_API const char* spg_status_name(spg_status status);
SPG_API const char* spg_version(void);

/* Dataset specification. path may be NULL for defaults. */
SPG_API spg_status spg_dataset_spec_create(const char* path, spg_dataset_spec** out);
SPG_API spg_status spg_dataset_spec_set(spg_dataset_spec* spec, const char* key, const char* value);
SPG_API void spg_dataset_spec_free(spg_dataset_spec* spec);
SPG_API spg_status spg_generate_dataset(const spg_dataset_spec* spec, const char* out_dir);

/* Run configuration. path may be NULL for defaults. */
SPG_API spg_status spg_run_config_create(const char* path, spg_run_config** out);
SPG_API spg_status spg_run_config_set(spg_run_config* config, const char* section, const char* key,
                                      const char* value);
/* Copies the canonical text into buf (NUL-terminated) when capacity allows;
 * *needed receives the full length including the terminator. */
SPG_API spg_status spg_run_config_text(const spg_run_config* config, char* buf, size_t capacity, size_t* needed);
SPG_API void spg_run_config_free(spg_run_config* config);

/* data_dir is a dataset root or a split directory. log_path may be NULL.
 * With resume != 0 an existing checkpoint at checkpoint_path is continued. */
SPG_API spg_status spg_train(const spg_run_config* config, const char* data_dir, const char* checkpoint_path,
                             const char* log_path, int resume);

SPG_API spg_status spg_network_load(const char* checkpoint_path, spg_network** out);
SPG_API void spg_network_free(spg_network* net);
SPG_API spg_status spg_network_info(const spg_network* net, int* num_classes, int* input_height,
                                    int* input_width);
/* image: HWC RGB floats in [0,1] at the network's input size.
 * probs receives num_classes values; attention (optional, may be NULL)
 * receives the normalized map of class_index upsampled to the input size. */
SPG_API spg_status spg_network_predict(const spg_network* net, const float* image, float* probs,
                                       int class_index, float* attention);

/* Calibrates on <data_dir>/val and evaluates <data_dir>/test. external_ranking
 * and predictions_out may be NULL. */
SPG_API spg_status spg_evaluate_checkpoint(const spg_network* net, const char* data_dir,
                                           const char* external_ranking, const char* predictions_out,
                                           spg_eval_report* report);
SPG_API spg_status spg_evaluate_predictions(const char* predictions_path, const char* split_dir,
                                            const char* external_ranking, spg_eval_report* report);
SPG_API spg_status spg_write_report(const spg_eval_report* report, const char* path);
/* Human-readable table; same buffer convention as spg_run_config_text. */
SPG_API spg_status spg_report_table(const spg_eval_report* report, char* buf, size_t capacity, size_t* needed);

/* ids may be NULL with count 0 to process the whole split. */
SPG_API spg_status spg_export_maps(const spg_network* net, const char* split_dir, const char* const* ids,
                                   size_t count, double fuse_low, double fuse_high, const char* out_dir,
                                   size_t* written);
SPG_API spg_status spg_render(const spg_network* net, const char* split_dir, const char* const* ids, size_t count,
                              double threshold, int draw_truth, const char* out_dir, size_t* written);

/* Primitives. */
SPG_API spg_status spg_seed_mask(const float* map, int height, int width, double low, double high, uint8_t* out);
SPG_API spg_status spg_iou(const spg_bbox* a, const spg_bbox* b, double* out);
/* Writes up to max_boxes boxes; *count receives the number written. */
SPG_API spg_status spg_extract_bboxes(const float* map, int height, int width, double threshold, int max_boxes,
                                      spg_bbox* boxes, int* count);

#ifdef __cplusplus
}
#endif

#endif /* SPG_SPG_H_ */
