/* C interface to the few-shot segmentation engine. All entry points return a
 * status code; 0 is success and nonzero codes partition the error classes the
 * CLI maps straight to exit codes. Handles are opaque; strings returned
 * through char** outputs are owned by the caller and released with
 * sml_string_free. */

#ifndef SML_H
#define SML_H

#ifdef __cplusplus
extern "C" {
#endif

#define SML_OK 0
#define SML_ERR_INTERNAL 1      /* contract violation or unexpected failure */
#define SML_ERR_CONFIG 2        /* bad configuration, flags, or input schema */
#define SML_ERR_IO 3            /* filesystem / environment failure */
#define SML_ERR_TRAIN 4         /* training aborted (non-finite loss) */
#define SML_ERR_CHECKPOINT 5    /* checkpoint corrupt or schema mismatch */
#define SML_ERR_UNKNOWN_CLASS 6 /* class token without an attribute vector */

typedef struct sml_config sml_config;
typedef struct sml_model sml_model;

/* Receives one log line at a time during long-running calls; may be NULL. */
typedef void (*sml_log_fn)(const char* line, void* user);

const char* sml_version(void);

/* Message for the most recent failure on this thread. */
const char* sml_last_error(void);

void sml_string_free(char* s);

/* Configuration: defaults, file loading ("key = value" lines), and explicit
 * overrides (flag > file > default). */
int sml_config_create(sml_config** out);
int sml_config_load(const char* path, sml_config** out);
int sml_config_set(sml_config* cfg, const char* key, const char* value);
void sml_config_free(sml_config* cfg);

/* Renders the synthetic corpus plus manifest, class list and attribute file
 * under out_dir. On success *manifest_path_out holds the manifest path. */
int sml_dataset_generate(const sml_config* cfg, const char* out_dir, char** manifest_path_out);

/* Meta-trains on every fold except heldout_fold, evaluating periodically on
 * the held-out one; writes the checkpoint configured in cfg. On success
 * *result_line_out holds the final "RESULT ..." line. */
int sml_train_run(const sml_config* cfg, int heldout_fold, sml_log_fn log, void* user,
                  char** result_line_out);

/* Checkpoints are self-contained (parameters, optimizer state, attribute
 * table, head settings). */
int sml_model_load(const char* checkpoint_path, sml_model** out);
void sml_model_free(sml_model* model);

/* Evaluates a loaded model over seeded test episodes of the held-out fold.
 * Episode protocol (ways/shots/episodes/annotation) comes from cfg. On
 * success *report_out holds the per-class report followed by the RESULT
 * line. */
int sml_eval_run(const sml_config* cfg, const sml_model* model, int heldout_fold,
                 char** report_out);

/* Segments query_image against ad-hoc support examples. The three support_*
 * arrays run parallel over support_count entries: image path, mask path (any
 * nonzero pixel marks the class region), class token. Writes the predicted
 * mask as a PGM and reports its foreground pixel count. */
int sml_model_predict(const sml_model* model, const char* const* support_images,
                      const char* const* support_masks, const char* const* support_classes,
                      int support_count, const char* query_image, const char* out_mask_path,
                      long long* fg_pixels_out);

#ifdef __cplusplus
}
#endif

#endif /* SML_H */
