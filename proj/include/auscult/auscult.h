/* auscult — respiratory-sound analysis pipeline.
 *
 * C API over the analysis core: dataset ingestion, biosignal derivation,
 * feature extraction, tree-ensemble training and leave-one-subject-out
 * evaluation. All handles are opaque; every fallible call returns an
 * ausc_status and leaves a human-readable message in ausc_last_error()
 * (thread local). Handles are owned by the caller and released with the
 * matching _destroy function.
 */
#ifndef AUSCULT_H
#define AUSCULT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ausc_status {
    AUSC_OK = 0,
    AUSC_ERR_IO = 1,
    AUSC_ERR_PARSE = 2,
    AUSC_ERR_CONFIG = 3,
    AUSC_ERR_TASK = 4,
    AUSC_ERR_DATA = 5,
    AUSC_ERR_TRAIN = 6,
    AUSC_ERR_INVALID = 7,
    AUSC_ERR_INTERNAL = 8
} ausc_status;

const char* ausc_version(void);
const char* ausc_status_name(ausc_status status);

/* Message describing the most recent failure on this thread. */
const char* ausc_last_error(void);

/* ---- configuration ----------------------------------------------------- */

typedef struct ausc_config ausc_config;

ausc_config* ausc_config_create(void);
void ausc_config_destroy(ausc_config* cfg);

/* Loads a JSON config file over the defaults. */
ausc_status ausc_config_load(ausc_config* cfg, const char* path);
ausc_status ausc_config_set_seed(ausc_config* cfg, uint64_t seed);
ausc_status ausc_config_set_jobs(ausc_config* cfg, int jobs);
ausc_status ausc_config_set_cache_dir(ausc_config* cfg, const char* dir);
/* "forest" or "gbm"; NULL restores the per-task defaults. */
ausc_status ausc_config_set_model(ausc_config* cfg, const char* model);

/* ---- dataset ------------------------------------------------------------ */

typedef struct ausc_dataset ausc_dataset;

ausc_status ausc_dataset_open(const char* root_dir, const ausc_config* cfg,
                              ausc_dataset** out);
void ausc_dataset_destroy(ausc_dataset* ds);

size_t ausc_dataset_subject_count(const ausc_dataset* ds);
size_t ausc_dataset_recording_count(const ausc_dataset* ds);
ausc_status ausc_dataset_write_manifest(const ausc_dataset* ds, const char* path);

/* Skipped-file and warning notes collected during ingestion. */
size_t ausc_dataset_note_count(const ausc_dataset* ds);
const char* ausc_dataset_note(const ausc_dataset* ds, size_t index);

/* Writes a synthetic two-class dataset in the distribution layout. */
ausc_status ausc_synth_generate(const char* out_dir, int n_subjects, uint64_t seed);

/* Per-recording float32 WAV bundles of the six derived biosignals. */
ausc_status ausc_biosignals_export(const ausc_dataset* ds, const ausc_config* cfg,
                                   const char* out_dir, int dump_imfs, int dump_psd);

/* ---- features ----------------------------------------------------------- */

typedef struct ausc_features ausc_features;

ausc_status ausc_features_extract(const ausc_dataset* ds, const ausc_config* cfg,
                                  ausc_features** out);
ausc_status ausc_features_save(const ausc_features* ft, const char* path);
ausc_status ausc_features_load(const char* path, ausc_features** out);
void ausc_features_destroy(ausc_features* ft);

size_t ausc_features_rows(const ausc_features* ft);
size_t ausc_features_arity(const ausc_features* ft);
const char* ausc_features_registry_version(const ausc_features* ft);
/* Cache statistics from the extraction that produced this handle. */
size_t ausc_features_cache_hits(const ausc_features* ft);
size_t ausc_features_cache_misses(const ausc_features* ft);

/* ---- models ------------------------------------------------------------- */

typedef struct ausc_model ausc_model;

ausc_status ausc_train(const ausc_features* ft, const char* task, const ausc_config* cfg,
                       ausc_model** out);
ausc_status ausc_model_save(const ausc_model* model, const char* path);
ausc_status ausc_model_load(const char* path, ausc_model** out);
const char* ausc_model_kind(const ausc_model* model);
void ausc_model_destroy(ausc_model* model);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct ausc_report ausc_report;

/* Runs the leave-one-subject-out protocol for a task. */
ausc_status ausc_evaluate(const ausc_features* ft, const char* task,
                          const ausc_config* cfg, ausc_report** out);
void ausc_report_destroy(ausc_report* report);

/* Returns AUSC_ERR_INVALID when the metric is not part of this report. */
ausc_status ausc_report_metric(const ausc_report* report, const char* name,
                               double* out_value);
/* report.json, metrics.txt, ROC point files and the fold log. */
ausc_status ausc_report_write(const ausc_report* report, const char* out_dir);
/* 1 when the report came from the evaluation cache. */
int ausc_report_was_cached(const ausc_report* report);

/* Renders the combined metrics table over every report under reports_dir. */
ausc_status ausc_render_combined(const char* reports_dir, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif /* AUSCULT_H */
