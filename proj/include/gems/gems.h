/* Generative EMS instruction engine: C interface.
 *
 * Every fallible call returns a gems_status. On failure the message is
 * available from gems_last_error() on the same thread until the next call.
 * Strings returned through `char** out` are owned by the caller and must be
 * released with gems_string_free().
 */
#ifndef GEMS_GEMS_H
#define GEMS_GEMS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define GEMS_API __declspec(dllexport)
#else
#define GEMS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gems_status {
  GEMS_OK = 0,
  GEMS_ERR_IO = 1,
  GEMS_ERR_SCHEMA = 2,
  GEMS_ERR_REFERENCE = 3,
  GEMS_ERR_LIMIT = 4,
  GEMS_ERR_PARSE = 5,
  GEMS_ERR_UNKNOWN_CHANNEL = 6,
  GEMS_ERR_UNKNOWN_JOINT = 7,
  GEMS_ERR_TRANSPORT = 8,
  GEMS_ERR_EMPTY_RESPONSE = 9,
  GEMS_ERR_PIPELINE = 10,
  GEMS_ERR_INVALID_ARGUMENT = 11,
  GEMS_ERR_INTERNAL = 12
} gems_status;

typedef enum gems_format { GEMS_FORMAT_PLAIN = 0, GEMS_FORMAT_STRUCTURED = 1 } gems_format;

typedef struct gems_kb gems_kb;
typedef struct gems_scenario gems_scenario;
typedef struct gems_client gems_client;
typedef struct gems_session gems_session;
typedef struct gems_service gems_service;

GEMS_API const char* gems_version(void);
GEMS_API const char* gems_status_name(gems_status status);
GEMS_API const char* gems_last_error(void);
GEMS_API void gems_string_free(char* s);
/* Root of the bundled data directory (knowledge base, scenarios, suites). */
GEMS_API const char* gems_default_data_dir(void);

/* Knowledge base. `manifest` NULL selects the bundled default. `limits` and
 * `profile` replace the manifest's parts when non-NULL. */
typedef struct gems_kb_paths {
  const char* manifest;
  const char* limits;
  const char* profile;
} gems_kb_paths;

GEMS_API gems_status gems_kb_load(const gems_kb_paths* paths, gems_kb** out);
GEMS_API void gems_kb_free(gems_kb* kb);
/* {"schema_version", "chain", "limits"} */
GEMS_API gems_status gems_kb_chain_json(const gems_kb* kb, char** out);

/* Scenario. Non-NULL fields of `overrides` replace the scenario's knowledge
 * base parts. */
GEMS_API gems_status gems_scenario_load(const char* path, const gems_kb_paths* overrides, gems_scenario** out);
GEMS_API void gems_scenario_free(gems_scenario* scenario);
GEMS_API const char* gems_scenario_id(const gems_scenario* scenario);
/* full | no-context | no-pose | no-ems | naive */
GEMS_API gems_status gems_scenario_set_condition(gems_scenario* scenario, const char* condition);

/* Model clients. */
typedef enum gems_client_kind {
  GEMS_CLIENT_MOCK = 0,   /* `path`: mock script; NULL uses the scenario's script */
  GEMS_CLIENT_HTTP = 1,   /* `base_url`; key read from the `api_key_env` variable */
  GEMS_CLIENT_REPLAY = 2  /* `path`: transcript.json written by gems_generate */
} gems_client_kind;

typedef struct gems_client_config {
  gems_client_kind kind;
  const char* path;
  const char* base_url;
  const char* model;       /* NULL: library default */
  const char* api_key_env; /* NULL: MODEL_API_KEY */
  int retries;             /* < 0: library default */
  int connect_timeout_ms;  /* <= 0: library default */
  int read_timeout_ms;     /* <= 0: library default */
} gems_client_config;

GEMS_API void gems_client_config_init(gems_client_config* cfg);
/* `scenario` is consulted only for a mock without a path. */
GEMS_API gems_status gems_client_create(const gems_client_config* cfg, const gems_scenario* scenario,
                                        gems_client** out);
GEMS_API void gems_client_free(gems_client* client);

/* Batch operations. */

/* Runs the pipeline and writes tutorial.txt, steps.json, plan.txt, plan.json,
 * constraints.json, report.json and transcript.json into `out_dir` (created
 * when missing; NULL writes nothing). `client` NULL uses the scenario's mock
 * script. `summary` receives the plan text or the full result JSON. */
GEMS_API gems_status gems_generate(const gems_scenario* scenario, gems_client* client, const char* out_dir,
                                   gems_format format, char** summary);

/* Constrains each line of an instruction file against a pose file (NULL:
 * neutral pose). Stopped verdicts are results, not errors. */
GEMS_API gems_status gems_constrain_file(const gems_kb* kb, const char* instructions_path, const char* pose_path,
                                         gems_format format, char** out);

/* Weighted edit distance of a generated instruction file against a ground
 * truth file. */
GEMS_API gems_status gems_evaluate_files(const gems_kb* kb, const char* generated_path, const char* ground_truth_path,
                                         int swap_insert_delete, gems_format format, char** out);

/* Runs every condition of a suite over its scenarios and tabulates distances.
 * `suite_path` NULL selects the bundled suite. `out_dir` non-NULL also keeps
 * the per-run plans there. */
GEMS_API gems_status gems_ablate(const char* suite_path, const char* out_dir, gems_format format, char** out);

/* Sessions. A session copies the scenario; `client` NULL uses the scenario's
 * mock script. */
GEMS_API gems_status gems_session_create(const gems_scenario* scenario, gems_client* client, gems_session** out);
GEMS_API void gems_session_free(gems_session* session);
/* Spoken or typed command, optional "EMS" prefix. Unknown text is
 * GEMS_ERR_PARSE. `ticket` (optional) identifies the command for
 * gems_session_wait. */
GEMS_API gems_status gems_session_command(gems_session* session, const char* text, uint64_t* ticket);
/* {"verb": ..., "text"?, "step"?, "mode"?} */
GEMS_API gems_status gems_session_command_json(gems_session* session, const char* json, uint64_t* ticket);
/* Waits until the command with `ticket` has been applied. Returns
 * GEMS_ERR_TRANSPORT on timeout. */
GEMS_API gems_status gems_session_wait(gems_session* session, uint64_t ticket, int timeout_ms);
/* Advances simulated time. Do not call while a service drives the session. */
GEMS_API gems_status gems_session_tick(gems_session* session, double dt_ms);
GEMS_API gems_status gems_session_snapshot(const gems_session* session, char** out);
/* Events with seq > after_seq as NDJSON; `last_seq` receives the newest seq. */
GEMS_API gems_status gems_session_events(const gems_session* session, uint64_t after_seq, char** out,
                                         uint64_t* last_seq);
/* Blocks up to timeout_ms for an event newer than after_seq; 1 if one exists. */
GEMS_API int gems_session_wait_event(const gems_session* session, uint64_t after_seq, int timeout_ms);
GEMS_API const char* gems_session_phase(const gems_session* session);

/* HTTP service driving a session with its own tick thread. `bind` is
 * "host:port" (port 0 picks a free one); bind failure is GEMS_ERR_IO.
 * `time_scale` > 1 runs simulated time faster than wall clock. */
GEMS_API gems_status gems_service_start(gems_session* session, const char* bind, double time_scale,
                                        gems_service** out);
GEMS_API int gems_service_port(const gems_service* service);
GEMS_API void gems_service_stop(gems_service* service);

#ifdef __cplusplus
}
#endif

#endif /* GEMS_GEMS_H */
