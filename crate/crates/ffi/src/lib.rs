//! C ABI over `zdmem`.
//!
//! Objects are opaque handles created by `zd_*_new`-style functions and
//! released with the matching `zd_*_free`. Every fallible call returns a
//! [`ZdStatus`]; on failure the message is available from [`zd_last_error`]
//! on the same thread. Actions and players are 1-based, as in the library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use zdmem::catalog;
use zdmem::markov::{build_chain, build_chain_perturbed, stationary_exact};
use zdmem::strategy::{from_press_dyson, press_dyson, StrategyTensor};
use zdmem::verify::akin_residual;
use zdmem::{GameSpec, HistoryChain, PrisonersDilemmaParams, StationaryDistribution, ZdError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Unsupported = 4,
    UnknownBuiltin = 5,
    Capacity = 6,
    Solver = 7,
    NonConvergence = 8,
    Range = 9,
    Dimension = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

pub struct ZdGame {
    game: GameSpec,
    pd: Option<PrisonersDilemmaParams>,
}

pub struct ZdStrategy {
    tensor: StrategyTensor,
}

pub struct ZdChain {
    chain: HistoryChain,
}

pub struct ZdStationary {
    dists: Vec<StationaryDistribution>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &ZdError) -> ZdStatus {
    match e {
        ZdError::InvalidArgument(_) | ZdError::Precondition(_) | ZdError::TrivialRelation(_) => {
            ZdStatus::InvalidArgument
        }
        ZdError::InfeasibleTensor { .. } | ZdError::InfeasibleZd(_) => ZdStatus::Infeasible,
        ZdError::Unsupported(_) => ZdStatus::Unsupported,
        ZdError::UnknownBuiltin(_) => ZdStatus::UnknownBuiltin,
        ZdError::Capacity { .. } => ZdStatus::Capacity,
        ZdError::Solver(_) => ZdStatus::Solver,
        ZdError::NonConvergence { .. } => ZdStatus::NonConvergence,
        ZdError::Range(_) => ZdStatus::Range,
        ZdError::Dimension(_) => ZdStatus::Dimension,
    }
}

enum Fail {
    Lib(ZdError),
    Null(&'static str),
    Small(usize),
}

impl From<ZdError> for Fail {
    fn from(e: ZdError) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ZdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ZdStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            ZdStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("output buffer too small; {need} elements needed"));
            ZdStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            ZdStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn zd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Prisoner's dilemma with payoffs `R, S, T, P`.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn zd_game_new_pd(r: f64, s: f64, t: f64, p: f64, out: *mut *mut ZdGame) -> ZdStatus {
    guard(|| {
        let pd = PrisonersDilemmaParams::new(r, s, t, p)?;
        put(
            out,
            ZdGame {
                game: GameSpec::prisoners_dilemma(pd)?,
                pd: Some(pd),
            },
        )
    })
}

/// General game. `payoffs` holds `num_players` tables of one payoff per
/// action profile, profiles in lexicographic order (player 1 most significant).
///
/// # Safety
/// `actions` must point to `num_players` values and `payoffs` to
/// `num_players * prod(actions)` values.
#[no_mangle]
pub unsafe extern "C" fn zd_game_new(
    num_players: usize,
    actions: *const usize,
    payoffs: *const f64,
    out: *mut *mut ZdGame,
) -> ZdStatus {
    guard(|| {
        let actions = slice(actions, num_players, "actions")?.to_vec();
        let profiles = actions
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a))
            .unwrap_or(0);
        if profiles == 0 {
            return Err(ZdError::InvalidArgument("every player needs at least one action".into()).into());
        }
        let flat = slice(payoffs, num_players * profiles, "payoffs")?;
        let tables = flat.chunks(profiles).map(|c| c.to_vec()).collect();
        put(
            out,
            ZdGame {
                game: GameSpec::new(actions, tables)?,
                pd: None,
            },
        )
    })
}

/// # Safety
/// `game` must be null or a handle from `zd_game_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zd_game_free(game: *mut ZdGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Number of action profiles, or 0 for a null handle.
///
/// # Safety
/// `game` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zd_game_num_profiles(game: *const ZdGame) -> usize {
    game.as_ref().map_or(0, |g| g.game.num_profiles())
}

/// Catalog strategy `name` at memory `memory` for seat `player` (1 or 2).
/// Needs a game made by [`zd_game_new_pd`].
///
/// # Safety
/// `game` must be a live handle, `name` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zd_strategy_builtin(
    game: *const ZdGame,
    name: *const c_char,
    memory: usize,
    player: usize,
    out: *mut *mut ZdStrategy,
) -> ZdStatus {
    guard(|| {
        let g = get(game, "game")?;
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| ZdError::InvalidArgument("name is not UTF-8".into()))?;
        let pd =
            g.pd.ok_or_else(|| ZdError::Unsupported("catalog strategies need a prisoner's dilemma".into()))?;
        let mut t = catalog::builtin(name, &pd, memory)?;
        match player {
            1 => {}
            2 => t = t.swap_players()?,
            _ => return Err(ZdError::InvalidArgument(format!("player {player} must be 1 or 2")).into()),
        }
        put(
            out,
            ZdStrategy {
                tensor: from_press_dyson(&t)?,
            },
        )
    })
}

/// Strategy from probabilities `T(a | h)`, row `h` (history index) by column
/// `a`. Rows are validated.
///
/// # Safety
/// `probs` must point to `len` values; `game` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zd_strategy_from_rows(
    game: *const ZdGame,
    player: usize,
    memory: usize,
    probs: *const f64,
    len: usize,
    out: *mut *mut ZdStrategy,
) -> ZdStatus {
    guard(|| {
        let g = get(game, "game")?;
        let space = g.game.history_space(memory)?;
        let probs = slice(probs, len, "probs")?.to_vec();
        put(
            out,
            ZdStrategy {
                tensor: StrategyTensor::new(space, player, probs)?,
            },
        )
    })
}

/// Random strategy drawn from a ChaCha8 stream seeded with `seed`.
///
/// # Safety
/// `game` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zd_strategy_random(
    game: *const ZdGame,
    player: usize,
    memory: usize,
    seed: u64,
    out: *mut *mut ZdStrategy,
) -> ZdStatus {
    use rand::SeedableRng;
    guard(|| {
        let g = get(game, "game")?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = StrategyTensor::random(g.game.history_space(memory)?, player, &mut rng)?;
        put(out, ZdStrategy { tensor: t })
    })
}

/// Copies the probabilities of `strategy` into `buf`; `needed` receives the
/// element count even when the buffer is too small.
///
/// # Safety
/// `strategy` must be live; `buf` must have `len` writable slots.
#[no_mangle]
pub unsafe extern "C" fn zd_strategy_probs(
    strategy: *const ZdStrategy,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> ZdStatus {
    guard(|| {
        let s = get(strategy, "strategy")?;
        copy_out(s.tensor.probs(), buf, len, needed)
    })
}

/// # Safety
/// `strategy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zd_strategy_free(strategy: *mut ZdStrategy) {
    if !strategy.is_null() {
        drop(Box::from_raw(strategy));
    }
}

unsafe fn copy_out(data: &[f64], buf: *mut f64, len: usize, needed: *mut usize) -> Result<(), Fail> {
    if !needed.is_null() {
        *needed = data.len();
    }
    if len < data.len() {
        return Err(Fail::Small(data.len()));
    }
    if buf.is_null() {
        return Err(Fail::Null("buf"));
    }
    ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    Ok(())
}

/// Markov chain of one strategy per player, in seat order. `eps > 0` mixes
/// every strategy with uniform noise at that rate.
///
/// # Safety
/// `strategies` must point to `count` live strategy handles.
#[no_mangle]
pub unsafe extern "C" fn zd_chain_new(
    game: *const ZdGame,
    strategies: *const *const ZdStrategy,
    count: usize,
    eps: f64,
    out: *mut *mut ZdChain,
) -> ZdStatus {
    guard(|| {
        let g = get(game, "game")?;
        let handles = slice(strategies, count, "strategies")?;
        let tensors = handles
            .iter()
            .map(|&h| get(h, "strategy").map(|s| s.tensor.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let chain = if eps > 0.0 {
            build_chain_perturbed(&g.game, &tensors, eps)?
        } else {
            build_chain(&g.game, &tensors)?
        };
        put(out, ZdChain { chain })
    })
}

/// Number of histories, or 0 for a null handle.
///
/// # Safety
/// `chain` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zd_chain_num_states(chain: *const ZdChain) -> usize {
    chain.as_ref().map_or(0, |c| c.chain.num_states())
}

/// # Safety
/// `chain` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zd_chain_free(chain: *mut ZdChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// All extreme stationary distributions, one per recurrent class.
///
/// # Safety
/// `chain` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zd_chain_stationary(chain: *const ZdChain, out: *mut *mut ZdStationary) -> ZdStatus {
    guard(|| {
        let c = get(chain, "chain")?;
        put(
            out,
            ZdStationary {
                dists: stationary_exact(&c.chain)?,
            },
        )
    })
}

/// Number of distributions, or 0 for a null handle.
///
/// # Safety
/// `st` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn zd_stationary_count(st: *const ZdStationary) -> usize {
    st.as_ref().map_or(0, |s| s.dists.len())
}

/// Copies distribution `index` into `buf`.
///
/// # Safety
/// `st` must be live; `buf` must have `len` writable slots.
#[no_mangle]
pub unsafe extern "C" fn zd_stationary_copy(
    st: *const ZdStationary,
    index: usize,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> ZdStatus {
    guard(|| {
        let s = get(st, "stationary")?;
        let d = s
            .dists
            .get(index)
            .ok_or_else(|| ZdError::InvalidArgument(format!("no distribution {index}")))?;
        copy_out(&d.probs, buf, len, needed)
    })
}

/// # Safety
/// `st` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zd_stationary_free(st: *mut ZdStationary) {
    if !st.is_null() {
        drop(Box::from_raw(st));
    }
}

/// `sum_h pi(h) Tdot(a | h)` for every action `a` of `strategy`, against
/// distribution `index`.
///
/// # Safety
/// Handles must be live; `buf` must have `len` writable slots.
#[no_mangle]
pub unsafe extern "C" fn zd_akin_residual(
    strategy: *const ZdStrategy,
    st: *const ZdStationary,
    index: usize,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> ZdStatus {
    guard(|| {
        let s = get(strategy, "strategy")?;
        let d = get(st, "stationary")?
            .dists
            .get(index)
            .ok_or_else(|| ZdError::InvalidArgument(format!("no distribution {index}")))?;
        let r = akin_residual(&press_dyson(&s.tensor), d)?;
        copy_out(&r, buf, len, needed)
    })
}
