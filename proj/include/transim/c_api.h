/* Flat procedural interface to the engine. Every function returns a status
 * code equal to the engine's ErrorCode value (0 on success); the message of
 * the most recent failure on the calling thread is kept for
 * transim_last_error(). Array outputs follow one convention: the caller passes
 * a buffer and its capacity in elements, the required length is always written
 * to *len, and a short buffer yields TRANSIM_DIMENSION_MISMATCH without writing
 * data. Each declaration stays on a single line; the interface manifest is
 * generated from them. */
#ifndef TRANSIM_C_API_H
#define TRANSIM_C_API_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TRANSIM_API __declspec(dllexport)
#else
#define TRANSIM_API __attribute__((visibility("default")))
#endif

#define TRANSIM_OK 0
#define TRANSIM_DIMENSION_MISMATCH 4
#define TRANSIM_NOT_YET_COMPUTED 20
#define TRANSIM_INVALID_ARGUMENT 22

typedef struct transim_session transim_session;

TRANSIM_API int32_t transim_abi_version(void);
TRANSIM_API const char* transim_interface_digest(void);
TRANSIM_API const char* transim_last_error(void);
TRANSIM_API const char* transim_error_name(int32_t code);

TRANSIM_API int32_t transim_session_load(const char* path, transim_session** out);
TRANSIM_API int32_t transim_session_free(transim_session* s);
TRANSIM_API int32_t transim_session_export(const transim_session* s, const char* path);
TRANSIM_API int32_t transim_session_state(const transim_session* s, int32_t* state);

TRANSIM_API int32_t transim_component_count(const transim_session* s, const char* kind, int64_t* count);
TRANSIM_API int32_t transim_get_parameter(const transim_session* s, const char* kind, int32_t index, const char* field, double* value);
TRANSIM_API int32_t transim_set_parameter(transim_session* s, const char* kind, int32_t index, const char* field, double value, int32_t force);
TRANSIM_API int32_t transim_set_branch_status(transim_session* s, int32_t branch, int32_t in_service, int64_t* island_count, int32_t* flagged);

TRANSIM_API int32_t transim_run_power_flow(transim_session* s, int32_t* converged, int32_t* iterations);
TRANSIM_API int32_t transim_power_flow_voltages(const transim_session* s, double* vm, double* va, int64_t capacity, int64_t* len);
TRANSIM_API int32_t transim_set_fault(transim_session* s, int32_t branch, double location, double t_fault, double t_clear);
TRANSIM_API int32_t transim_clear_fault(transim_session* s);
TRANSIM_API int32_t transim_prepare_simulation(transim_session* s);
TRANSIM_API int32_t transim_run_simulation(transim_session* s, int32_t* label);
TRANSIM_API int32_t transim_advance(transim_session* s, int64_t steps, int64_t* taken);

TRANSIM_API int32_t transim_query_scalar(const transim_session* s, const char* item, double* value);
TRANSIM_API int32_t transim_query_matrix(const transim_session* s, const char* item, int32_t* rows, int32_t* cols, double* re, double* im, int64_t capacity, int64_t* len, int64_t* dimension);
TRANSIM_API int32_t transim_query_index_array(const transim_session* s, const char* item, int32_t* out, int64_t capacity, int64_t* len);

TRANSIM_API int32_t transim_result_shape(const transim_session* s, const char* column, int64_t* rows, int64_t* cols);
TRANSIM_API int32_t transim_result_extract(const transim_session* s, const char* column, double* out, int64_t capacity, int64_t* len);
TRANSIM_API int32_t transim_state_length(const transim_session* s, int64_t* len);
TRANSIM_API int32_t transim_get_state(const transim_session* s, int64_t k, double* out, int64_t capacity, int64_t* len);
TRANSIM_API int32_t transim_set_state(transim_session* s, int64_t k, const double* values, int64_t len);

#ifdef __cplusplus
}
#endif

#endif
