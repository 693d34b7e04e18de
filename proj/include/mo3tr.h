/*
 * C interface to the mo3tr tracking library.
 *
 * All functions return MO3TR_OK on success; on failure they return an error
 * code and mo3tr_last_error() describes what went wrong (thread-local, valid
 * until the next failing call on the same thread). Strings returned through
 * out-parameters are heap-allocated and must be released with
 * mo3tr_text_free().
 */
#ifndef MO3TR_H
#define MO3TR_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mo3tr_status {
    MO3TR_OK = 0,
    MO3TR_ERR_ARGUMENT = 1,  /* null or malformed argument */
    MO3TR_ERR_IO = 2,        /* missing or unwritable file */
    MO3TR_ERR_CONFIG = 3,    /* schema violation or dimension mismatch */
    MO3TR_ERR_PARSE = 4,     /* malformed input file */
    MO3TR_ERR_DATA = 5,      /* inconsistent dataset or ground truth */
    MO3TR_ERR_NUMERIC = 6,   /* non-finite value produced */
    MO3TR_ERR_INTERNAL = 7
} mo3tr_status;

typedef struct mo3tr_config mo3tr_config; /* opaque */

const char* mo3tr_version(void);
const char* mo3tr_last_error(void);
void mo3tr_text_free(char* text);

mo3tr_config* mo3tr_config_new(void);
void mo3tr_config_free(mo3tr_config* cfg);
mo3tr_status mo3tr_config_load_file(mo3tr_config* cfg, const char* path);
mo3tr_status mo3tr_config_set(mo3tr_config* cfg, const char* key, const char* value);
/* canonical key=value text of the effective configuration */
mo3tr_status mo3tr_config_dump(const mo3tr_config* cfg, char** out_text);

/* Materializes a named scenario suite ("overfit-tiny", "occlusion-suite",
 * "lifecycle-suite", "crowd-suite") into out_dir: <name>.scene.json,
 * <name>.frames.bin and <name>.gt.txt per sequence, plus effective.cfg. */
mo3tr_status mo3tr_gen(const mo3tr_config* cfg, const char* suite, const char* out_dir);

/* Trains on every sequence found in data_dir (all *.scene.json) and writes
 * the final checkpoint, a per-epoch loss CSV (<out_checkpoint>.loss.csv) and
 * the effective configuration next to the checkpoint. */
mo3tr_status mo3tr_train(const mo3tr_config* cfg, const char* data_dir,
                         const char* out_checkpoint);

typedef struct mo3tr_track_options {
    const char* public_detections; /* MOT det file, or NULL */
    const char* filter_mode;       /* "cd" or "iou"; required with detections */
    const char* attention_dump;    /* CSV path, or NULL */
    const char* embeddings_dump;   /* sidecar path, or NULL */
    int history_cap;               /* 0 = full alignment width */
} mo3tr_track_options;

/* Runs the tracker over <sequence_base>.scene.json/.frames.bin and writes a
 * MOTChallenge track file. cfg may be NULL; when given, filter thresholds
 * override the ones stored in the checkpoint. */
mo3tr_status mo3tr_track(const mo3tr_config* cfg, const char* checkpoint,
                         const char* sequence_base, const char* out_track_file,
                         const mo3tr_track_options* opts);

/* Evaluates hypothesis against ground-truth track files. Either out pointer
 * may be NULL. */
mo3tr_status mo3tr_eval(const char* hyp_path, const char* gt_path, double iou_threshold,
                        char** out_table, char** out_json);

/* Tracks every sequence in suite_dir once per history cap (caps_csv like
 * "1,10,20,30") and tabulates MOTA/IDF1 per cap. */
mo3tr_status mo3tr_ablate(const mo3tr_config* cfg, const char* checkpoint,
                          const char* suite_dir, const char* caps_csv, char** out_table);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MO3TR_H */
