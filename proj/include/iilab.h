/* C interface to the inter-intra retrieval lab. All functions return an
 * iilab_status; every handle type is opaque and freed by its *_free
 * function. Handles are not thread-safe; use one per thread or lock. */
#ifndef IILAB_H
#define IILAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iilab_status {
    IILAB_OK = 0,
    IILAB_ERR_INVALID = 1, /* rejected input, config, or file content */
    IILAB_ERR_RUNTIME = 2  /* IO or numeric failure while running */
} iilab_status;

/* Message for the most recent failing call on this thread. Valid until the
 * next failing call; never NULL. */
const char* iilab_last_error(void);

typedef struct iilab_config iilab_config;   /* run configuration document */
typedef struct iilab_dataset iilab_dataset; /* paired feature sequences */
typedef struct iilab_model iilab_model;     /* trained encoders + temperature */
typedef struct iilab_metrics iilab_metrics; /* per-epoch training metrics */

/* ---- configuration ---------------------------------------------------
 * A config carries every section the commands read: [data], [synth],
 * [video_encoder], [music_encoder], [train], [eval], [experiment],
 * [output]. Keys are set with their dotted names, e.g. "train.epochs". */
iilab_config* iilab_config_default(void);
iilab_status iilab_config_load(const char* path, iilab_config** out);
iilab_status iilab_config_set(iilab_config* cfg, const char* dotted_key, const char* value);
void iilab_config_free(iilab_config* cfg);

/* ---- datasets --------------------------------------------------------- */
iilab_status iilab_dataset_generate(const iilab_config* cfg, iilab_dataset** out);
iilab_status iilab_dataset_load(const char* manifest_path, iilab_dataset** out);
/* Writes tensors + manifest.csv into dir. manifest_path_out (optional) gets
 * the manifest path, truncated to cap-1 bytes. */
iilab_status iilab_dataset_save(const iilab_dataset* ds, const char* dir, char* manifest_path_out,
                                size_t cap);
size_t iilab_dataset_size(const iilab_dataset* ds);
iilab_status iilab_dataset_split(const iilab_dataset* ds, size_t test_pairs_per_category,
                                 uint64_t seed, iilab_dataset** train_out,
                                 iilab_dataset** test_out);
void iilab_dataset_free(iilab_dataset* ds);

/* ---- training and evaluation ------------------------------------------ */
/* Trains per cfg's [train] on train_ds, evaluating on test_ds each epoch.
 * Either output pointer may be NULL to discard that result. */
iilab_status iilab_train(const iilab_config* cfg, const iilab_dataset* train_ds,
                         const iilab_dataset* test_ds, iilab_model** model_out,
                         iilab_metrics** metrics_out);

size_t iilab_metrics_count(const iilab_metrics* m);
/* row = {epoch, inter_loss, intra_loss, r1, r10, r25} */
iilab_status iilab_metrics_row(const iilab_metrics* m, size_t index, double row[6]);
void iilab_metrics_free(iilab_metrics* m);

iilab_status iilab_model_save(const iilab_model* model, const char* dir);
iilab_status iilab_model_load(const char* dir, iilab_model** out);
void iilab_model_free(iilab_model* model);

/* Video->music retrieval on ds; sampling settings come from cfg's [train].
 * mode is "pair" or "category". recalls_out[i] = R@ks[i]. */
iilab_status iilab_evaluate(const iilab_model* model, const iilab_dataset* ds,
                            const iilab_config* cfg, const char* mode, const size_t* ks,
                            size_t n_ks, double* recalls_out);

/* ---- command layer -----------------------------------------------------
 * One call per CLI subcommand; artifacts land under the config's
 * output.dir. path_out (optional, cap-1 truncation) receives the primary
 * artifact path. */
iilab_status iilab_cmd_gen_data(const iilab_config* cfg, int64_t* n_records_out, char* path_out,
                                size_t cap);
iilab_status iilab_cmd_train(const iilab_config* cfg, char* path_out, size_t cap);
iilab_status iilab_cmd_eval(const iilab_config* cfg, char* path_out, size_t cap);
iilab_status iilab_cmd_sweep_gamma(const iilab_config* cfg, char* path_out, size_t cap);
iilab_status iilab_cmd_sweep_batch(const iilab_config* cfg, char* path_out, size_t cap);
iilab_status iilab_cmd_noise_exp(const iilab_config* cfg, char* path_out, size_t cap);
/* *report_out receives a NUL-terminated per-op error table; free it with
 * iilab_string_free. Returns IILAB_ERR_RUNTIME if any probe fails. */
iilab_status iilab_cmd_grad_check(char** report_out);
void iilab_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* IILAB_H */
