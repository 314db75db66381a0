/* C API for the conprom library: few-shot joint intent detection and slot
 * filling with prototype merging and contrastive alignment learning.
 *
 * Every function returns CONPROM_OK (0) on success or a nonzero error code;
 * conprom_last_error() describes the most recent failure on the calling
 * thread. Objects returned through out-parameters are owned by the caller
 * and released with the matching *_free function.
 */
#ifndef CONPROM_H
#define CONPROM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CONPROM_OK 0
#define CONPROM_ERR_INVALID_ARGUMENT 1
#define CONPROM_ERR_PARSE 2
#define CONPROM_ERR_VALIDATION 3
#define CONPROM_ERR_IO 4
#define CONPROM_ERR_RUNTIME 5

const char* conprom_version(void);

/* Message for the last error raised on this thread; empty string if none. */
const char* conprom_last_error(void);

/* Frees strings returned through char** out-parameters. */
void conprom_string_free(char* s);

typedef struct conprom_dataset conprom_dataset;
typedef struct conprom_episodes conprom_episodes;
typedef struct conprom_model conprom_model;

/* ---- datasets ---- */

int conprom_dataset_parse(const char* json_text, conprom_dataset** out);
int conprom_dataset_load(const char* path, conprom_dataset** out);
int conprom_dataset_save(const conprom_dataset* dataset, const char* path);
/* Small JSON summary: domain and frame counts per split. */
int conprom_dataset_stats(const conprom_dataset* dataset, char** json_out);
void conprom_dataset_free(conprom_dataset* dataset);

/* Synthetic dataset from a flat `key = value` spec (synth.* keys). */
int conprom_synth_generate(const char* spec_text, conprom_dataset** out);

/* ---- episodes ---- */

int conprom_episodes_build(const conprom_dataset* dataset, const char* split, int k,
                           int query_size, int n_episodes, uint64_t seed,
                           conprom_episodes** out);
int conprom_episodes_load(const char* path, conprom_episodes** out);
int conprom_episodes_save(const conprom_episodes* episodes, const char* path);
/* Number of episodes, or -1 on a null handle. */
int conprom_episodes_count(const conprom_episodes* episodes);
void conprom_episodes_free(conprom_episodes* episodes);

/* ---- training ---- */

/* Trains on the dataset (episodes may be NULL for online sampling) and
 * writes best.ckpt, final.ckpt and loss_log.csv into out_dir. config_text is
 * flat `key = value`; missing keys fall back to defaults. */
int conprom_train(const conprom_dataset* dataset, const conprom_episodes* episodes,
                  const char* config_text, const char* out_dir);

int conprom_model_load(const char* checkpoint_path, conprom_model** out);
void conprom_model_free(conprom_model* model);

/* Gradient check of the full objective on a small built-in episode. */
int conprom_gradcheck(uint64_t seed, double eps, double* max_rel_err_out);

/* ---- evaluation ---- */

/* Evaluates checkpoint(s) against episodes and returns the aggregate report
 * as JSON. A "{seed}" placeholder in checkpoint_path is expanded per seed;
 * options_text keys: eval.seeds, eval.seed_base, eval.finetune, eval.tr,
 * finetune.steps, finetune.lr. */
int conprom_evaluate(const char* checkpoint_path, const conprom_episodes* episodes,
                     const char* options_text, char** report_json_out);

/* Original and merged prototypes of one episode as JSON (class -> vector). */
int conprom_export_protos(const conprom_model* model, const conprom_episodes* episodes,
                          int episode_index, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* CONPROM_H */
