#ifndef PCPLAB_H
#define PCPLAB_H

/* generated by cbindgen from the pcplab-ffi crate; do not edit */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum PcplabStatus {
  PCPLAB_STATUS_OK = 0,
  PCPLAB_STATUS_DOMAIN = 1,
  PCPLAB_STATUS_PARAMETER = 2,
  PCPLAB_STATUS_SHAPE = 3,
  PCPLAB_STATUS_INDEX = 4,
  PCPLAB_STATUS_PRECONDITION = 5,
  PCPLAB_STATUS_RESOURCE = 6,
  PCPLAB_STATUS_NOT_FOUND = 7,
  PCPLAB_STATUS_CONSTRUCTION = 8,
  PCPLAB_STATUS_PARSE = 9,
  PCPLAB_STATUS_IO = 10,
  PCPLAB_STATUS_NULL_ARGUMENT = 11,
  PCPLAB_STATUS_INVALID_UTF8 = 12,
} PcplabStatus;

/**
 * Opaque CSP instance handle.
 */
typedef struct PcplabCsp PcplabCsp;

/**
 * Opaque rotation-graph handle.
 */
typedef struct PcplabGraph PcplabGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. Borrowed; valid
 * until the next failing call on the same thread.
 */
const char *pcplab_last_error(void);

/**
 * Frees a string returned by this library.
 */
void pcplab_string_free(char *s);

/**
 * Parses a CSP from its text format into a new handle.
 */
enum PcplabStatus pcplab_csp_from_text(const char *text, struct PcplabCsp **out);

void pcplab_csp_free(struct PcplabCsp *csp);

uint64_t pcplab_csp_n(const struct PcplabCsp *csp);

uint64_t pcplab_csp_m(const struct PcplabCsp *csp);

uint64_t pcplab_csp_alphabet(const struct PcplabCsp *csp);

/**
 * Exact value as a "num/den" string (caller frees); Resource when the
 * enumeration exceeds the budget.
 */
enum PcplabStatus pcplab_csp_val_exact(const struct PcplabCsp *csp, uint64_t budget, char **out);

/**
 * Serializes a CSP handle back to text (caller frees).
 */
enum PcplabStatus pcplab_csp_to_text(const struct PcplabCsp *csp, char **out);

/**
 * Searches for an n-vertex d-regular expander with certified
 * λ ≤ lambda_num/lambda_den.
 */
enum PcplabStatus pcplab_expander_build(uint64_t n,
                                        uint64_t d,
                                        int64_t lambda_num,
                                        int64_t lambda_den,
                                        uint64_t seed,
                                        uint64_t budget,
                                        struct PcplabGraph **out);

void pcplab_graph_free(struct PcplabGraph *g);

uint64_t pcplab_graph_n(const struct PcplabGraph *g);

uint64_t pcplab_graph_degree(const struct PcplabGraph *g);

/**
 * Certified spectral bound as a "num/den" string (caller frees).
 */
enum PcplabStatus pcplab_graph_lambda_upper(const struct PcplabGraph *g, char **out);

enum PcplabStatus pcplab_graph_to_text(const struct PcplabGraph *g, char **out);

enum PcplabStatus pcplab_graph_from_text(const char *text, struct PcplabGraph **out);

/**
 * Runs the amplification pipeline on a DIMACS CNF string with the
 * default configuration at this seed; returns the JSON run manifest
 * (caller frees).
 */
enum PcplabStatus pcplab_pipeline_run(const char *dimacs,
                                      uint64_t rounds,
                                      uint64_t seed,
                                      char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCPLAB_H */
