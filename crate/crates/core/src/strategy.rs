//! Memory-n strategy tensors and their Press-Dyson tensors.
//!
//! A [`StrategyTensor`] stores `T_a(sigma_a | history)` densely, one row of
//! `M_a` probabilities per history. The matching [`PressDysonTensor`] stores
//! `T_a(sigma_a | history) - delta(sigma_a, own previous action)`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, ZdError};
use crate::game::{History, HistorySpace};
use crate::tolerance::EXACT;

/// Conditional action distribution of one player over length-`memory` histories.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTensor {
    space: HistorySpace,
    player: usize,
    probs: Vec<f64>,
}

/// `T_a - delta`, the repeat-subtracted strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct PressDysonTensor {
    space: HistorySpace,
    player: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// A probability outside `[0, 1]`.
    Range,
    /// A probability row that does not sum to one.
    Normalization,
    /// A Press-Dyson row that does not sum to zero.
    ZeroSum,
    /// A Press-Dyson entry with the wrong sign for the player's previous action.
    Sign,
    /// A Press-Dyson entry with magnitude above one.
    Magnitude,
    /// A non-finite entry.
    NotFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub history: History,
    pub history_index: usize,
    /// 1-based action, absent for row-level violations.
    pub action: Option<usize>,
    /// How far outside the constraint the value lies.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub player: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_player(space: &HistorySpace, player: usize) -> Result<usize> {
    if player == 0 || player > space.num_players() {
        return Err(ZdError::InvalidArgument(format!(
            "player {player} out of range 1..={}",
            space.num_players()
        )));
    }
    Ok(space.actions_per_player()[player - 1])
}

impl StrategyTensor {
    /// Builds and validates a strategy from rows laid out in history order.
    pub fn new(space: HistorySpace, player: usize, probs: Vec<f64>) -> Result<Self> {
        let s = Self::new_unchecked(space, player, probs)?;
        let report = validate_strategy(&s);
        if let Some(v) = report.violations.first() {
            return Err(ZdError::InfeasibleTensor {
                history: v.history.to_string(),
                action: v.action.unwrap_or(0),
                detail: format!("{:?} violation of {:e}", v.kind, v.magnitude),
            });
        }
        Ok(s)
    }

    /// Checks only dimensions; use [`validate_strategy`] to inspect the rows.
    pub fn new_unchecked(space: HistorySpace, player: usize, probs: Vec<f64>) -> Result<Self> {
        let m = check_player(&space, player)?;
        if probs.len() != space.num_histories() * m {
            return Err(ZdError::Dimension(format!(
                "expected {} probabilities ({} histories x {m} actions), got {}",
                space.num_histories() * m,
                space.num_histories(),
                probs.len()
            )));
        }
        Ok(StrategyTensor { space, player, probs })
    }

    /// Builds a strategy from a row function `history index -> distribution`.
    pub fn from_fn(space: HistorySpace, player: usize, mut row: impl FnMut(usize) -> Vec<f64>) -> Result<Self> {
        let probs = (0..space.num_histories()).flat_map(&mut row).collect();
        Self::new(space, player, probs)
    }

    /// Plays action `f(h)` with certainty.
    pub fn deterministic(space: HistorySpace, player: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        let m = check_player(&space, player)?;
        Self::from_fn(space, player, |h| {
            let mut row = vec![0.0; m];
            row[f(h) - 1] = 1.0;
            row
        })
    }

    /// Replays the player's own previous action.
    pub fn repeat(space: HistorySpace, player: usize) -> Result<Self> {
        let sp = space.clone();
        Self::deterministic(space, player, move |h| sp.action_in(sp.newest(h), player))
    }

    pub fn uniform(space: HistorySpace, player: usize) -> Result<Self> {
        let m = check_player(&space, player)?;
        Self::from_fn(space, player, |_| vec![1.0 / m as f64; m])
    }

    /// Every row drawn independently from the flat Dirichlet distribution.
    pub fn random<R: Rng + ?Sized>(space: HistorySpace, player: usize, rng: &mut R) -> Result<Self> {
        let m = check_player(&space, player)?;
        let rows = space.num_histories();
        let mut probs = Vec::with_capacity(rows * m);
        for _ in 0..rows {
            let draws: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = draws.iter().sum();
            let start = probs.len();
            probs.extend(draws.iter().map(|d| d / total));
            // put the rounding remainder on the last entry so rows sum to one
            let head: f64 = probs[start..start + m - 1].iter().sum();
            probs[start + m - 1] = (1.0 - head).max(0.0);
        }
        Self::new(space, player, probs)
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn memory(&self) -> usize {
        self.space.memory()
    }

    pub fn num_actions(&self) -> usize {
        self.space.actions_per_player()[self.player - 1]
    }

    /// Probability of 1-based `action` after history index `h`.
    #[inline]
    pub fn prob(&self, h: usize, action: usize) -> f64 {
        self.probs[h * self.num_actions() + action - 1]
    }

    pub fn row(&self, h: usize) -> &[f64] {
        let m = self.num_actions();
        &self.probs[h * m..(h + 1) * m]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mixes every row with the uniform distribution at rate `eps`.
    pub fn perturb(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(ZdError::InvalidArgument(format!(
                "perturbation rate {eps} outside [0, 1]"
            )));
        }
        let u = 1.0 / self.num_actions() as f64;
        let probs = self.probs.iter().map(|p| (1.0 - eps) * p + eps * u).collect();
        Ok(StrategyTensor {
            space: self.space.clone(),
            player: self.player,
            probs,
        })
    }

    /// Moves `delta` of probability onto `action` at history `h`, taken from
    /// the other actions in proportion to their mass. If the row has no room
    /// in that direction the move is reversed. Used to build negative
    /// controls.
    pub fn corrupt(&self, h: usize, action: usize, delta: f64) -> Result<Self> {
        let m = self.num_actions();
        if h >= self.space.num_histories() || action == 0 || action > m {
            return Err(ZdError::InvalidArgument(format!(
                "corruption target (history {h}, action {action}) out of range"
            )));
        }
        let mut out = self.clone();
        let row = &mut out.probs[h * m..(h + 1) * m];
        let others: f64 = row
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != action - 1)
            .map(|(_, p)| p)
            .sum();
        let room = |d: f64| {
            if d > 0.0 {
                d.min(others)
            } else {
                d.max(-row[action - 1])
            }
        };
        let delta = if room(delta) == 0.0 { room(-delta) } else { room(delta) };
        for (i, p) in row.iter_mut().enumerate() {
            if i == action - 1 {
                *p += delta;
            } else if others > 0.0 {
                *p -= delta * *p / others;
            } else {
                *p -= delta / (m - 1) as f64;
            }
        }
        Ok(out)
    }
}

impl PressDysonTensor {
    /// Dimension-checked constructor; the tensor invariants are checked by
    /// [`validate_press_dyson`] and [`from_press_dyson`].
    pub fn new(space: HistorySpace, player: usize, values: Vec<f64>) -> Result<Self> {
        let m = check_player(&space, player)?;
        if values.len() != space.num_histories() * m {
            return Err(ZdError::Dimension(format!(
                "expected {} tensor entries, got {}",
                space.num_histories() * m,
                values.len()
            )));
        }
        Ok(PressDysonTensor { space, player, values })
    }

    /// Two-action tensor from the entry for action 1; action 2 gets the negation.
    pub fn from_first_action(space: HistorySpace, player: usize, first: Vec<f64>) -> Result<Self> {
        let m = check_player(&space, player)?;
        if m != 2 {
            return Err(ZdError::Unsupported(format!(
                "player {player} has {m} actions; this construction needs exactly 2"
            )));
        }
        if first.len() != space.num_histories() {
            return Err(ZdError::Dimension(format!(
                "expected {} entries, got {}",
                space.num_histories(),
                first.len()
            )));
        }
        let values = first.iter().flat_map(|&v| [v, -v]).collect();
        Self::new(space, player, values)
    }

    pub fn zero(space: HistorySpace, player: usize) -> Result<Self> {
        let m = check_player(&space, player)?;
        let len = space.num_histories() * m;
        Self::new(space, player, vec![0.0; len])
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn memory(&self) -> usize {
        self.space.memory()
    }

    pub fn num_actions(&self) -> usize {
        self.space.actions_per_player()[self.player - 1]
    }

    #[inline]
    pub fn value(&self, h: usize, action: usize) -> f64 {
        self.values[h * self.num_actions() + action - 1]
    }

    pub fn row(&self, h: usize) -> &[f64] {
        let m = self.num_actions();
        &self.values[h * m..(h + 1) * m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries for action 1, one per history.
    pub fn first_action(&self) -> Vec<f64> {
        (0..self.space.num_histories()).map(|h| self.value(h, 1)).collect()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.abs() <= tol)
    }

    pub fn max_abs_diff(&self, other: &PressDysonTensor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Lifts the tensor to a longer memory by ignoring the older states.
    pub fn pad(&self, memory: usize) -> Result<Self> {
        let space = padded_space(&self.space, memory)?;
        let m = self.num_actions();
        let mut values = Vec::with_capacity(space.num_histories() * m);
        for h in 0..space.num_histories() {
            values.extend_from_slice(self.row(space.truncate(h, self.memory())));
        }
        Self::new(space, self.player, values)
    }

    /// The same tensor seen from the other seat of a two-player game with
    /// identical action sets: player `a`'s tensor becomes player `3 - a`'s,
    /// with every profile's components swapped.
    pub fn swap_players(&self) -> Result<Self> {
        let space = swapped_space(&self.space)?;
        let values = swap_rows(&self.space, &space, self.num_actions(), &self.values);
        Self::new(space, 3 - self.player, values)
    }
}

fn padded_space(space: &HistorySpace, memory: usize) -> Result<HistorySpace> {
    if memory < space.memory() {
        return Err(ZdError::InvalidArgument(format!(
            "cannot pad memory {} down to {memory}",
            space.memory()
        )));
    }
    space.with_memory(memory)
}

fn swapped_space(space: &HistorySpace) -> Result<HistorySpace> {
    let acts = space.actions_per_player();
    if acts.len() != 2 || acts[0] != acts[1] {
        return Err(ZdError::Unsupported(
            "seat swapping needs a two-player game with equal action sets".into(),
        ));
    }
    Ok(space.clone())
}

fn swap_rows(from: &HistorySpace, to: &HistorySpace, m: usize, data: &[f64]) -> Vec<f64> {
    let swap_profile = |p: usize| {
        let prof = from.profile(p);
        let swapped = crate::game::ActionProfile::new(vec![prof.action(2), prof.action(1)]);
        to.profile_index(&swapped).expect("same shape")
    };
    let mut out = vec![0.0; data.len()];
    for h in 0..to.num_histories() {
        let states: Vec<usize> = (1..=to.memory()).map(|k| swap_profile(to.state(h, k))).collect();
        let src = from.index_of_states(&states);
        out[h * m..(h + 1) * m].copy_from_slice(&data[src * m..(src + 1) * m]);
    }
    out
}

impl StrategyTensor {
    /// See [`PressDysonTensor::swap_players`].
    pub fn swap_players(&self) -> Result<Self> {
        let space = swapped_space(&self.space)?;
        let probs = swap_rows(&self.space, &space, self.num_actions(), &self.probs);
        Self::new_unchecked(space, 3 - self.player, probs)
    }
}

/// `T_a(sigma_a | h) - delta(sigma_a, sigma_a^(-1))`.
pub fn press_dyson(strategy: &StrategyTensor) -> PressDysonTensor {
    let space = strategy.space.clone();
    let m = strategy.num_actions();
    let mut values = strategy.probs.clone();
    for h in 0..space.num_histories() {
        let own = space.action_in(space.newest(h), strategy.player);
        values[h * m + own - 1] -= 1.0;
    }
    PressDysonTensor {
        space,
        player: strategy.player,
        values,
    }
}

/// Inverse of [`press_dyson`]. Fails on the first entry that breaks the
/// zero-sum, sign or magnitude constraints (beyond [`EXACT`]).
pub fn from_press_dyson(pd: &PressDysonTensor) -> Result<StrategyTensor> {
    let report = validate_press_dyson(pd);
    if let Some(v) = report.violations.first() {
        return Err(ZdError::InfeasibleTensor {
            history: v.history.to_string(),
            action: v.action.unwrap_or(0),
            detail: format!("{:?} violation of {:e}", v.kind, v.magnitude),
        });
    }
    let space = pd.space.clone();
    let m = pd.num_actions();
    let mut probs = pd.values.clone();
    for h in 0..space.num_histories() {
        let own = space.action_in(space.newest(h), pd.player);
        probs[h * m + own - 1] += 1.0;
    }
    // entries within EXACT of the boundary are snapped into [0, 1]
    for p in probs.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    Ok(StrategyTensor {
        space,
        player: pd.player,
        probs,
    })
}

/// Every range and normalization violation of a strategy.
pub fn validate_strategy(strategy: &StrategyTensor) -> ValidationReport {
    let space = &strategy.space;
    let m = strategy.num_actions();
    let mut violations = Vec::new();
    for h in 0..space.num_histories() {
        let row = strategy.row(h);
        for (i, &p) in row.iter().enumerate() {
            let excess = if !p.is_finite() {
                violations.push(Violation {
                    kind: ViolationKind::NotFinite,
                    history: space.history(h),
                    history_index: h,
                    action: Some(i + 1),
                    magnitude: f64::INFINITY,
                });
                continue;
            } else if p < 0.0 {
                -p
            } else {
                p - 1.0
            };
            if excess > EXACT {
                violations.push(Violation {
                    kind: ViolationKind::Range,
                    history: space.history(h),
                    history_index: h,
                    action: Some(i + 1),
                    magnitude: excess,
                });
            }
        }
        let total: f64 = row.iter().sum();
        if total.is_finite() && (total - 1.0).abs() > EXACT {
            violations.push(Violation {
                kind: ViolationKind::Normalization,
                history: space.history(h),
                history_index: h,
                action: None,
                magnitude: (total - 1.0).abs(),
            });
        }
    }
    debug_assert_eq!(strategy.probs.len(), space.num_histories() * m);
    ValidationReport {
        player: strategy.player,
        violations,
    }
}

/// Every zero-sum, sign and magnitude violation of a Press-Dyson tensor.
pub fn validate_press_dyson(pd: &PressDysonTensor) -> ValidationReport {
    let space = &pd.space;
    let mut violations = Vec::new();
    for h in 0..space.num_histories() {
        let own = space.action_in(space.newest(h), pd.player);
        let row = pd.row(h);
        for (i, &v) in row.iter().enumerate() {
            let action = i + 1;
            let mut push = |kind, magnitude| {
                violations.push(Violation {
                    kind,
                    history: space.history(h),
                    history_index: h,
                    action: Some(action),
                    magnitude,
                })
            };
            if !v.is_finite() {
                push(ViolationKind::NotFinite, f64::INFINITY);
                continue;
            }
            let wrong_sign = if action == own { v } else { -v };
            if wrong_sign > EXACT {
                push(ViolationKind::Sign, wrong_sign);
            }
            if v.abs() - 1.0 > EXACT {
                push(ViolationKind::Magnitude, v.abs() - 1.0);
            }
        }
        let total: f64 = row.iter().sum();
        if total.is_finite() && total.abs() > EXACT {
            violations.push(Violation {
                kind: ViolationKind::ZeroSum,
                history: space.history(h),
                history_index: h,
                action: None,
                magnitude: total.abs(),
            });
        }
    }
    ValidationReport {
        player: pd.player,
        violations,
    }
}

/// Lifts a strategy to memory `memory`; the new, older states are ignored.
pub fn pad_memory(strategy: &StrategyTensor, memory: usize) -> Result<StrategyTensor> {
    let space = padded_space(&strategy.space, memory)?;
    let m = strategy.num_actions();
    let mut probs = Vec::with_capacity(space.num_histories() * m);
    for h in 0..space.num_histories() {
        probs.extend_from_slice(strategy.row(space.truncate(h, strategy.memory())));
    }
    Ok(StrategyTensor {
        space,
        player: strategy.player,
        probs,
    })
}
