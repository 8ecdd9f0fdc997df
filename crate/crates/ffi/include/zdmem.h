#ifndef ZDMEM_H
#define ZDMEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ZdStatus {
  ZD_STATUS_OK = 0,
  ZD_STATUS_NULL_POINTER = 1,
  ZD_STATUS_INVALID_ARGUMENT = 2,
  ZD_STATUS_INFEASIBLE = 3,
  ZD_STATUS_UNSUPPORTED = 4,
  ZD_STATUS_UNKNOWN_BUILTIN = 5,
  ZD_STATUS_CAPACITY = 6,
  ZD_STATUS_SOLVER = 7,
  ZD_STATUS_NON_CONVERGENCE = 8,
  ZD_STATUS_RANGE = 9,
  ZD_STATUS_DIMENSION = 10,
  ZD_STATUS_BUFFER_TOO_SMALL = 11,
  ZD_STATUS_PANIC = 12,
} ZdStatus;

typedef struct ZdChain ZdChain;

typedef struct ZdGame ZdGame;

typedef struct ZdStationary ZdStationary;

typedef struct ZdStrategy ZdStrategy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *zd_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * plus one.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t zd_last_error(char *buf, uintptr_t len);

/**
 * Prisoner's dilemma with payoffs `R, S, T, P`.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum ZdStatus zd_game_new_pd(double r, double s, double t, double p, struct ZdGame **out);

/**
 * General game. `payoffs` holds `num_players` tables of one payoff per
 * action profile, profiles in lexicographic order (player 1 most significant).
 *
 * # Safety
 * `actions` must point to `num_players` values and `payoffs` to
 * `num_players * prod(actions)` values.
 */
enum ZdStatus zd_game_new(uintptr_t num_players,
                          const uintptr_t *actions,
                          const double *payoffs,
                          struct ZdGame **out);

/**
 * # Safety
 * `game` must be null or a handle from `zd_game_new*` not yet freed.
 */
void zd_game_free(struct ZdGame *game);

/**
 * Number of action profiles, or 0 for a null handle.
 *
 * # Safety
 * `game` must be null or a live handle.
 */
uintptr_t zd_game_num_profiles(const struct ZdGame *game);

/**
 * Catalog strategy `name` at memory `memory` for seat `player` (1 or 2).
 * Needs a game made by [`zd_game_new_pd`].
 *
 * # Safety
 * `game` must be a live handle, `name` a NUL-terminated string, `out` writable.
 */
enum ZdStatus zd_strategy_builtin(const struct ZdGame *game,
                                  const char *name,
                                  uintptr_t memory,
                                  uintptr_t player,
                                  struct ZdStrategy **out);

/**
 * Strategy from probabilities `T(a | h)`, row `h` (history index) by column
 * `a`. Rows are validated.
 *
 * # Safety
 * `probs` must point to `len` values; `game` must be live; `out` writable.
 */
enum ZdStatus zd_strategy_from_rows(const struct ZdGame *game,
                                    uintptr_t player,
                                    uintptr_t memory,
                                    const double *probs,
                                    uintptr_t len,
                                    struct ZdStrategy **out);

/**
 * Random strategy drawn from a ChaCha8 stream seeded with `seed`.
 *
 * # Safety
 * `game` must be live; `out` writable.
 */
enum ZdStatus zd_strategy_random(const struct ZdGame *game,
                                 uintptr_t player,
                                 uintptr_t memory,
                                 uint64_t seed,
                                 struct ZdStrategy **out);

/**
 * Copies the probabilities of `strategy` into `buf`; `needed` receives the
 * element count even when the buffer is too small.
 *
 * # Safety
 * `strategy` must be live; `buf` must have `len` writable slots.
 */
enum ZdStatus zd_strategy_probs(const struct ZdStrategy *strategy,
                                double *buf,
                                uintptr_t len,
                                uintptr_t *needed);

/**
 * # Safety
 * `strategy` must be null or a live handle.
 */
void zd_strategy_free(struct ZdStrategy *strategy);

/**
 * Markov chain of one strategy per player, in seat order. `eps > 0` mixes
 * every strategy with uniform noise at that rate.
 *
 * # Safety
 * `strategies` must point to `count` live strategy handles.
 */
enum ZdStatus zd_chain_new(const struct ZdGame *game,
                           const struct ZdStrategy *const *strategies,
                           uintptr_t count,
                           double eps,
                           struct ZdChain **out);

/**
 * Number of histories, or 0 for a null handle.
 *
 * # Safety
 * `chain` must be null or live.
 */
uintptr_t zd_chain_num_states(const struct ZdChain *chain);

/**
 * # Safety
 * `chain` must be null or a live handle.
 */
void zd_chain_free(struct ZdChain *chain);

/**
 * All extreme stationary distributions, one per recurrent class.
 *
 * # Safety
 * `chain` must be live; `out` writable.
 */
enum ZdStatus zd_chain_stationary(const struct ZdChain *chain, struct ZdStationary **out);

/**
 * Number of distributions, or 0 for a null handle.
 *
 * # Safety
 * `st` must be null or live.
 */
uintptr_t zd_stationary_count(const struct ZdStationary *st);

/**
 * Copies distribution `index` into `buf`.
 *
 * # Safety
 * `st` must be live; `buf` must have `len` writable slots.
 */
enum ZdStatus zd_stationary_copy(const struct ZdStationary *st,
                                 uintptr_t index,
                                 double *buf,
                                 uintptr_t len,
                                 uintptr_t *needed);

/**
 * # Safety
 * `st` must be null or a live handle.
 */
void zd_stationary_free(struct ZdStationary *st);

/**
 * `sum_h pi(h) Tdot(a | h)` for every action `a` of `strategy`, against
 * distribution `index`.
 *
 * # Safety
 * Handles must be live; `buf` must have `len` writable slots.
 */
enum ZdStatus zd_akin_residual(const struct ZdStrategy *strategy,
                               const struct ZdStationary *st,
                               uintptr_t index,
                               double *buf,
                               uintptr_t len,
                               uintptr_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZDMEM_H */
