/* SPDX-License-Identifier: Apache-2.0 */
#ifndef SLU_SLU_H
#define SLU_SLU_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(SLU_BUILDING_LIBRARY)
#define SLU_API __attribute__((visibility("default")))
#else
#define SLU_API
#endif

typedef enum slu_status {
  SLU_OK = 0,
  SLU_E_CONFIG = 1,
  SLU_E_IO = 2,
  SLU_E_PARSE = 3,
  SLU_E_DIMENSION = 4,
  SLU_E_DOMAIN = 5,
  SLU_E_UNSUPPORTED = 6,
  SLU_E_VOCAB = 7,
  SLU_E_NUMERIC = 8,
  SLU_E_INTERNAL = 9
} slu_status;

typedef struct slu_config slu_config;
typedef struct slu_corpus slu_corpus;
typedef struct slu_model slu_model;
typedef struct slu_report slu_report;
typedef struct slu_prediction slu_prediction;

/* Message of the last failed call on this thread; never NULL. */
SLU_API const char* slu_last_error(void);
SLU_API const char* slu_status_name(slu_status status);
SLU_API const char* slu_version(void);

/* Receives warnings and progress text. Defaults to discarding them. */
typedef void (*slu_log_fn)(const char* message, void* user);
SLU_API void slu_set_log_handler(slu_log_fn fn, void* user);

/* Strings returned through `char**` are owned by the caller. */
SLU_API void slu_string_free(char* s);

/* Configuration: every key has a default; see slu_config_dump. */
SLU_API slu_status slu_config_new(slu_config** out);
SLU_API void slu_config_free(slu_config* config);
SLU_API slu_status slu_config_set(slu_config* config, const char* key, const char* value);
SLU_API slu_status slu_config_get(const slu_config* config, const char* key, char** out);
SLU_API slu_status slu_config_load_file(slu_config* config, const char* path);
SLU_API slu_status slu_config_dump(const slu_config* config, char** out);
/* Checks the model and training settings. */
SLU_API slu_status slu_config_validate(const slu_config* config);

SLU_API slu_status slu_corpus_load(const char* path, slu_corpus** out);
SLU_API slu_status slu_corpus_from_text(const char* text, slu_corpus** out);
SLU_API size_t slu_corpus_size(const slu_corpus* corpus);
SLU_API slu_status slu_corpus_to_text(const slu_corpus* corpus, char** out);
SLU_API void slu_corpus_free(slu_corpus* corpus);

/* Writes train.txt, dev.txt and test.txt under the config's `out`
 * directory from the built-in or configured grammar. */
SLU_API slu_status slu_generate_data(const slu_config* config);

/* Called once per dev evaluation with a tab-separated metrics line
 * (epoch, train loss, dev slot F1, dev intent error). */
typedef void (*slu_metrics_fn)(const char* line, void* user);

/* Trains on the config's `data` directory. Writes the best checkpoint to
 * `out` when set. `out_model` may be NULL. */
SLU_API slu_status slu_train(const slu_config* config, slu_metrics_fn on_metrics, void* user, slu_model** out_model);

SLU_API slu_status slu_model_load(const char* path, slu_model** out);
SLU_API slu_status slu_model_save(const slu_model* model, const char* path);
SLU_API void slu_model_free(slu_model* model);
SLU_API int slu_model_has_slots(const slu_model* model);
SLU_API int slu_model_has_intent(const slu_model* model);
SLU_API int slu_model_has_attention(const slu_model* model);
/* Model settings in config-file syntax. */
SLU_API slu_status slu_model_config(const slu_model* model, char** out);

/* Fails with SLU_E_VOCAB when more than half of the corpus' distinct gold
 * labels are unknown to the model; fewer unknown labels are logged. */
SLU_API slu_status slu_model_evaluate(const slu_model* model, const slu_corpus* corpus, int beam_width,
                                      slu_report** out);
SLU_API void slu_report_free(slu_report* report);
/* Negative when the model has no slot head. */
SLU_API double slu_report_slot_f1(const slu_report* report);
/* Negative when the model has no intent head. */
SLU_API double slu_report_intent_error(const slu_report* report);
/* key_values != 0: one key=value per line; otherwise a table. */
SLU_API slu_status slu_report_format(const slu_report* report, int key_values, char** out);

SLU_API slu_status slu_model_predict(const slu_model* model, const char* const* tokens, size_t n_tokens,
                                     int beam_width, slu_prediction** out);
SLU_API void slu_prediction_free(slu_prediction* prediction);
SLU_API size_t slu_prediction_length(const slu_prediction* prediction);
/* NULL for intent-only models or an out-of-range index. */
SLU_API const char* slu_prediction_slot(const slu_prediction* prediction, size_t i);
/* NULL for slot-only models. */
SLU_API const char* slu_prediction_intent(const slu_prediction* prediction);
SLU_API double slu_prediction_log_prob(const slu_prediction* prediction);

/* Attention weights of utterance `index` as CSV. `head` is "slot" or
 * "intent". Fails with SLU_E_UNSUPPORTED when that head does not attend. */
SLU_API slu_status slu_model_attention_csv(const slu_model* model, const slu_corpus* corpus, size_t index,
                                           const char* head, int beam_width, char** out);

/* k-fold cross-validation over the config's `data` corpus. The result has a
 * header line, one line per fold and a final `mean` line, tab-separated. */
SLU_API slu_status slu_crossval(const slu_config* config, slu_metrics_fn on_metrics, void* user, char** out);

#ifdef __cplusplus
}
#endif

#endif /* SLU_SLU_H */
