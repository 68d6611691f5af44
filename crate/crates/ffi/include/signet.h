#ifndef SIGNET_H
#define SIGNET_H

/* Generated by cbindgen from signet-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum SignetStatus {
  SIGNET_STATUS_OK = 0,
  SIGNET_STATUS_NULL_ARGUMENT = 1,
  SIGNET_STATUS_INVALID_UTF8 = 2,
  SIGNET_STATUS_PARSE_ERROR = 3,
  SIGNET_STATUS_INVALID_CONFIG = 4,
  SIGNET_STATUS_NUMERIC_ERROR = 5,
  SIGNET_STATUS_IO_ERROR = 6,
} SignetStatus;

// Opaque signed directed graph handle.
typedef struct SignetGraph SignetGraph;

// Balance census of a graph, mirrored as a flat C struct.
typedef struct SignetBalanceReport {
  double d3;
  uint64_t balanced_triangles;
  uint64_t total_triangles;
  double trace_a3;
  double trace_abs_a3;
  // 1 when the graph has no directed 3-cycles (d3 is vacuously 1).
  int degenerate;
} SignetBalanceReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message for this thread, or NULL when the previous call
// succeeded. The pointer stays valid until the next failing call on the
// same thread.
const char *signet_last_error(void);

// # Safety
// `text` must point to a NUL-terminated string; `out` must be a valid
// pointer to receive the handle.
enum SignetStatus signet_graph_parse(const char *text, int rated, struct SignetGraph **out);

// # Safety
// `path` must be a NUL-terminated file path; `out` must be valid.
enum SignetStatus signet_graph_load(const char *path, int rated, struct SignetGraph **out);

// Generate a two-faction synthetic graph.
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum SignetStatus signet_graph_two_faction(uint64_t n,
                                           double p_in,
                                           double p_out,
                                           double sign_noise,
                                           uint64_t seed,
                                           struct SignetGraph **out);

// # Safety
// `g` must be a handle from this library, not yet freed; NULL is a no-op.
void signet_graph_free(struct SignetGraph *g);

// # Safety
// `g` must be a valid handle.
uint64_t signet_graph_node_count(const struct SignetGraph *g);

// # Safety
// `g` must be a valid handle.
uint64_t signet_graph_edge_count(const struct SignetGraph *g);

// # Safety
// `g` must be a valid handle.
uint64_t signet_graph_positive_edge_count(const struct SignetGraph *g);

// Canonical edge-list serialization. The returned string must be released
// with `signet_string_free`.
//
// # Safety
// `g` must be a valid handle.
char *signet_graph_to_edge_list(const struct SignetGraph *g);

// # Safety
// `s` must have been returned by this library and not yet freed.
void signet_string_free(char *s);

// Balance census via the trace formula.
//
// # Safety
// `g` and `out` must be valid pointers.
enum SignetStatus signet_balance_degree(const struct SignetGraph *g,
                                        struct SignetBalanceReport *out);

// Balance census via the brute-force triangle enumeration (node cap 500).
//
// # Safety
// `g` and `out` must be valid pointers.
enum SignetStatus signet_balance_degree_bruteforce(const struct SignetGraph *g,
                                                   struct SignetBalanceReport *out);

// Greedy balance attack at `ptb_rate`; writes a new poisoned graph handle.
//
// # Safety
// `g` and `out` must be valid pointers.
enum SignetStatus signet_balance_attack(const struct SignetGraph *g,
                                        double ptb_rate,
                                        struct SignetGraph **out);

// Uniform random sign flips at `ptb_rate`, seeded.
//
// # Safety
// `g` and `out` must be valid pointers.
enum SignetStatus signet_random_attack(const struct SignetGraph *g,
                                       double ptb_rate,
                                       uint64_t seed,
                                       struct SignetGraph **out);

// Balance-learning restoration toward `target_d3` (flip cap = edge count).
// Writes a new restored graph handle and, optionally, the flip count.
//
// # Safety
// `g` and `out` must be valid; `flips_used` may be NULL.
enum SignetStatus signet_balance_restore(const struct SignetGraph *g,
                                         double target_d3,
                                         struct SignetGraph **out,
                                         uint64_t *flips_used);

// Number of edge positions whose signs differ between two same-topology
// graphs; -1 on mismatch.
//
// # Safety
// Both handles must be valid.
int64_t signet_perturbation_distance(const struct SignetGraph *a, const struct SignetGraph *b);

// Fraction of edges with agreeing signs; NaN on mismatch.
//
// # Safety
// Both handles must be valid.
double signet_overlap_ratio(const struct SignetGraph *a, const struct SignetGraph *b);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGNET_H */
