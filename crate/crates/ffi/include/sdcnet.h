#ifndef SDCNET_H
#define SDCNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum SdcStatus {
  SDC_STATUS_OK = 0,
  /**
   * Bad arguments, malformed files, invalid configuration.
   */
  SDC_STATUS_INVALID = 1,
  /**
   * The filesystem refused a read or write.
   */
  SDC_STATUS_IO = 2,
  /**
   * A required pointer was null.
   */
  SDC_STATUS_NULL_POINTER = 3,
  /**
   * The library panicked. This is a bug.
   */
  SDC_STATUS_PANIC = 4,
} SdcStatus;

/**
 * A run configuration.
 */
typedef struct SdcConfig SdcConfig;

/**
 * A trained model.
 */
typedef struct SdcModel SdcModel;

/**
 * A feature table.
 */
typedef struct SdcTable SdcTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *sdc_last_error(void);

/**
 * Library version as a static string.
 */
const char *sdc_version(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void sdc_string_free(char *s);

/**
 * Generates the synthetic multi-subject benchmark.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum SdcStatus sdc_table_synthetic(size_t subjects,
                                   size_t trials,
                                   size_t windows,
                                   size_t dim,
                                   size_t classes,
                                   double shift,
                                   double noise,
                                   uint64_t seed,
                                   struct SdcTable **out);

/**
 * Reads a feature table CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SdcStatus sdc_table_load(const char *path, struct SdcTable **out);

/**
 * Writes a feature table CSV.
 *
 * # Safety
 * `table` must be a live handle; `path` a NUL-terminated string.
 */
enum SdcStatus sdc_table_save(const struct SdcTable *table, const char *path);

/**
 * Number of records; 0 for null.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t sdc_table_len(const struct SdcTable *table);

/**
 * Feature width; 0 for null.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t sdc_table_dim(const struct SdcTable *table);

/**
 * Number of classes; 0 for null.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t sdc_table_num_classes(const struct SdcTable *table);

/**
 * Copies the `len × dim` feature matrix, row-major, into `dst`.
 *
 * # Safety
 * `table` must be a live handle; `dst` must hold `capacity` doubles.
 */
enum SdcStatus sdc_table_features(const struct SdcTable *table, double *dst, size_t capacity);

/**
 * Copies the labels into `dst`; unlabeled records read as -1.
 *
 * # Safety
 * `table` must be a live handle; `dst` must hold `capacity` values.
 */
enum SdcStatus sdc_table_labels(const struct SdcTable *table, int64_t *dst, size_t capacity);

/**
 * # Safety
 * `table` must be null or a handle not freed before.
 */
void sdc_table_free(struct SdcTable *table);

/**
 * Configuration with every field at its default.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdcStatus sdc_config_default(struct SdcConfig **out);

/**
 * Reads a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SdcStatus sdc_config_load(const char *path, struct SdcConfig **out);

/**
 * Sets one field by name, e.g. `("epochs", "50")`. The configuration is
 * left unchanged if the value is rejected.
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum SdcStatus sdc_config_set(struct SdcConfig *config, const char *key, const char *value);

/**
 * The configuration rendered as `key = value` lines. Free with
 * [`sdc_string_free`].
 *
 * # Safety
 * `config` must be a live handle; `out` must be writable.
 */
enum SdcStatus sdc_config_to_text(const struct SdcConfig *config, char **out);

/**
 * # Safety
 * `config` must be null or a handle not freed before.
 */
void sdc_config_free(struct SdcConfig *config);

/**
 * Trains with `target_subject` held out as the unlabeled target domain.
 * Writes the model handle and the held-out accuracy.
 *
 * # Safety
 * `table` and `config` must be live handles; `out_model` must be writable;
 * `out_accuracy` may be null.
 */
enum SdcStatus sdc_fit_fold(const struct SdcTable *table,
                            const struct SdcConfig *config,
                            uint32_t target_subject,
                            struct SdcModel **out_model,
                            double *out_accuracy);

/**
 * Leave-one-subject-out over every subject; writes the report as JSON.
 * Free with [`sdc_string_free`].
 *
 * # Safety
 * `table` and `config` must be live handles; `out_json` must be writable.
 */
enum SdcStatus sdc_loso_json(const struct SdcTable *table,
                             const struct SdcConfig *config,
                             size_t jobs,
                             char **out_json);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SdcStatus sdc_model_load(const char *path, struct SdcModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum SdcStatus sdc_model_save(const struct SdcModel *model, const char *path);

/**
 * Input width, embedding width and class count. Any out pointer may be null.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum SdcStatus sdc_model_dims(const struct SdcModel *model,
                              size_t *input_dim,
                              size_t *embedding_dim,
                              size_t *num_classes);

/**
 * Class probabilities `[rows × classes]` for raw features `[rows × cols]`.
 *
 * # Safety
 * `model` must be a live handle; `features` must hold `rows·cols` doubles
 * and `dst` `capacity` doubles.
 */
enum SdcStatus sdc_model_predict(const struct SdcModel *model,
                                 const double *features,
                                 size_t rows,
                                 size_t cols,
                                 double *dst,
                                 size_t capacity);

/**
 * Embeddings `[rows × embedding_dim]` for raw features `[rows × cols]`.
 *
 * # Safety
 * As for [`sdc_model_predict`].
 */
enum SdcStatus sdc_model_embed(const struct SdcModel *model,
                               const double *features,
                               size_t rows,
                               size_t cols,
                               double *dst,
                               size_t capacity);

/**
 * # Safety
 * `model` must be null or a handle not freed before.
 */
void sdc_model_free(struct SdcModel *model);

/**
 * Differential entropy of a Gaussian with the given variance.
 *
 * # Safety
 * `out` must be writable.
 */
enum SdcStatus sdc_differential_entropy(double variance, double *out);

/**
 * Multi-kernel MMD² between `source [n × dim]` and `target [m × dim]` with
 * `kernel_count` bandwidths around `sigma`. A `sigma` of 0 or less uses the
 * median pairwise distance of the source rows.
 *
 * # Safety
 * `source` and `target` must hold `n·dim` and `m·dim` doubles; `out` must
 * be writable.
 */
enum SdcStatus sdc_mmd2(const double *source,
                        size_t n,
                        const double *target,
                        size_t m,
                        size_t dim,
                        double sigma,
                        size_t kernel_count,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDCNET_H */
