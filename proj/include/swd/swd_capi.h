#ifndef SWD_CAPI_H
#define SWD_CAPI_H

/* C interface to the stepped wedge analysis library. All inputs are document
 * contents (not paths); all outputs are heap strings owned by the caller and
 * released with swd_free. On any non-OK status the output pointers are left
 * untouched and swd_last_error() describes the failure (thread-local). */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SWD_OK = 0,
  SWD_ERR_OTHER = 1,
  SWD_ERR_CONFIG = 2,  /* invalid configuration or design */
  SWD_ERR_DATA = 3,    /* invalid or inconsistent input data */
  SWD_ERR_NUMERIC = 4, /* singular system / invalid covariance parameters */
  SWD_ERR_IO = 5       /* filesystem failure */
} swd_status;

const char* swd_version(void);

/* Message of the most recent failure on this thread; empty string if none. */
const char* swd_last_error(void);

void swd_free(char* ptr);

/* Full analysis: long-format CSV + design document + JSON config.
 * Produces the JSON report and the human-readable table (either output
 * pointer may be NULL if not wanted). */
swd_status swd_analyze(const char* data_csv, const char* design_text,
                       const char* config_json, char** report_json_out,
                       char** report_text_out);

/* Replicated simulation benchmark driven by a JSON spec. Produces the
 * aggregate metrics table and the per-replicate records, both CSV. */
swd_status swd_simulate(const char* spec_json, char** metrics_csv_out,
                        char** records_csv_out);

/* Dry-run validation; on success *summary_out describes the parsed object. */
swd_status swd_validate_design(const char* design_text, char** summary_out);
swd_status swd_validate_config(const char* config_json, char** summary_out);

#ifdef __cplusplus
}
#endif

#endif
