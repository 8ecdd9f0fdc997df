//! Games, action profiles, histories and their index spaces.
//!
//! Actions are numbered from 1 in every public type, matching the usual
//! `A_a = {1, ..., M_a}` convention. Dense indices (profile index, history
//! index) are 0-based and only used for storage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZdError};
use crate::tolerance::MAX_TENSOR_ENTRIES;

/// A joint action `(sigma_1, ..., sigma_N)`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(pub Vec<usize>);

impl ActionProfile {
    pub fn new(actions: Vec<usize>) -> Self {
        ActionProfile(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// Action of `player` (1-based player index).
    pub fn action(&self, player: usize) -> usize {
        self.0[player - 1]
    }
}

impl fmt::Display for ActionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// The last `n` profiles, newest first: `states[m-1]` holds `sigma^(-m)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History(pub Vec<ActionProfile>);

impl History {
    pub fn states(&self) -> &[ActionProfile] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sigma^(-m)` for `m >= 1`.
    pub fn state(&self, m: usize) -> &ActionProfile {
        &self.0[m - 1]
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

/// Prisoner's dilemma payoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct PrisonersDilemmaParams {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
}

impl Default for PrisonersDilemmaParams {
    fn default() -> Self {
        PrisonersDilemmaParams {
            r: 3.0,
            s: 0.0,
            t: 5.0,
            p: 1.0,
        }
    }
}

impl PrisonersDilemmaParams {
    /// Validated constructor: requires finite values with `T > R > P > S`.
    pub fn new(r: f64, s: f64, t: f64, p: f64) -> Result<Self> {
        let pd = PrisonersDilemmaParams { r, s, t, p };
        pd.check_dilemma()?;
        Ok(pd)
    }

    pub fn check_dilemma(&self) -> Result<()> {
        let PrisonersDilemmaParams { r, s, t, p } = *self;
        if ![r, s, t, p].iter().all(|v| v.is_finite()) {
            return Err(ZdError::InvalidArgument(
                "prisoner's dilemma payoffs must be finite".into(),
            ));
        }
        if !(t > r && r > p && p > s) {
            return Err(ZdError::InvalidArgument(format!(
                "prisoner's dilemma requires T > R > P > S, got T={t} R={r} P={p} S={s}"
            )));
        }
        Ok(())
    }

    /// The two extra inequalities the catalog strategies rely on:
    /// `2R > T + S` and `2P < T + S`.
    pub fn check_catalog_assumptions(&self) -> Result<()> {
        self.check_dilemma()?;
        if 2.0 * self.r <= self.t + self.s {
            return Err(ZdError::InfeasibleZd(format!(
                "assumption 2R > T+S violated (2R={}, T+S={})",
                2.0 * self.r,
                self.t + self.s
            )));
        }
        if 2.0 * self.p >= self.t + self.s {
            return Err(ZdError::InfeasibleZd(format!(
                "assumption 2P < T+S violated (2P={}, T+S={})",
                2.0 * self.p,
                self.t + self.s
            )));
        }
        Ok(())
    }

    /// `B = max{2R - (T+S), (T+S) - 2P}`.
    pub fn b(&self) -> f64 {
        (2.0 * self.r - (self.t + self.s)).max((self.t + self.s) - 2.0 * self.p)
    }
}

/// A finite normal-form stage game with dense payoff tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    actions: Vec<usize>,
    /// `payoffs[a - 1][profile_index]` is `s_a(sigma)`.
    payoffs: Vec<Vec<f64>>,
}

impl GameSpec {
    pub fn new(actions: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(ZdError::InvalidArgument("a game needs at least one player".into()));
        }
        if let Some(m) = actions.iter().find(|&&m| m < 2) {
            return Err(ZdError::InvalidArgument(format!(
                "every player needs at least 2 actions, got {m}"
            )));
        }
        let profiles = actions
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .ok_or_else(|| ZdError::InvalidArgument("profile count overflows".into()))?;
        if payoffs.len() != actions.len() {
            return Err(ZdError::InvalidArgument(format!(
                "expected {} payoff tables, got {}",
                actions.len(),
                payoffs.len()
            )));
        }
        for (a, table) in payoffs.iter().enumerate() {
            if table.len() != profiles {
                return Err(ZdError::InvalidArgument(format!(
                    "payoff table of player {} has {} entries, expected {profiles}",
                    a + 1,
                    table.len()
                )));
            }
            if table.iter().any(|v| !v.is_finite()) {
                return Err(ZdError::InvalidArgument(format!(
                    "payoff table of player {} contains a non-finite value",
                    a + 1
                )));
            }
        }
        Ok(GameSpec { actions, payoffs })
    }

    /// Two-player prisoner's dilemma; action 1 is cooperation, 2 defection.
    pub fn prisoners_dilemma(pd: PrisonersDilemmaParams) -> Result<Self> {
        pd.check_dilemma()?;
        let PrisonersDilemmaParams { r, s, t, p } = pd;
        GameSpec::new(vec![2, 2], vec![vec![r, s, t, p], vec![r, t, s, p]])
    }

    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn actions_per_player(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.actions[player - 1]
    }

    pub fn num_profiles(&self) -> usize {
        self.actions.iter().product()
    }

    /// `s_player(profile)`, with `s_0 = 1`.
    pub fn payoff(&self, player: usize, profile: &ActionProfile) -> Result<f64> {
        if player > self.num_players() {
            return Err(ZdError::InvalidArgument(format!(
                "player {player} out of range 0..={}",
                self.num_players()
            )));
        }
        let idx = self.profile_index(profile)?;
        Ok(self.payoff_at(player, idx))
    }

    /// Unchecked variant of [`GameSpec::payoff`] over a dense profile index.
    #[inline]
    pub fn payoff_at(&self, player: usize, profile: usize) -> f64 {
        if player == 0 {
            1.0
        } else {
            self.payoffs[player - 1][profile]
        }
    }

    /// Payoff table of `player` (0 gives the constant observable).
    pub fn payoff_table(&self, player: usize) -> Vec<f64> {
        (0..self.num_profiles()).map(|p| self.payoff_at(player, p)).collect()
    }

    pub fn profile_index(&self, profile: &ActionProfile) -> Result<usize> {
        if profile.0.len() != self.num_players() {
            return Err(ZdError::InvalidArgument(format!(
                "profile {profile} has {} entries, game has {} players",
                profile.0.len(),
                self.num_players()
            )));
        }
        let mut idx = 0;
        for (&a, &m) in profile.0.iter().zip(&self.actions) {
            if a == 0 || a > m {
                return Err(ZdError::InvalidArgument(format!(
                    "action {a} out of range 1..={m} in profile {profile}"
                )));
            }
            idx = idx * m + (a - 1);
        }
        Ok(idx)
    }

    pub fn profile(&self, mut index: usize) -> ActionProfile {
        let mut out = vec![0; self.num_players()];
        for (slot, &m) in out.iter_mut().zip(&self.actions).rev() {
            *slot = index % m + 1;
            index /= m;
        }
        ActionProfile(out)
    }

    /// 1-based action of `player` inside the profile with dense index `profile`.
    #[inline]
    pub fn action_in(&self, profile: usize, player: usize) -> usize {
        let stride: usize = self.actions[player..].iter().product();
        (profile / stride) % self.actions[player - 1] + 1
    }

    /// All profiles in lexicographic order (player 1 most significant).
    pub fn enumerate_profiles(&self) -> Vec<ActionProfile> {
        (0..self.num_profiles()).map(|i| self.profile(i)).collect()
    }

    pub fn history_space(&self, memory: usize) -> Result<HistorySpace> {
        HistorySpace::new(self.actions.clone(), memory)
    }

    /// All histories of length `n` in lexicographic order, newest state most
    /// significant.
    pub fn enumerate_histories(&self, n: usize) -> Result<Vec<History>> {
        let space = self.history_space(n)?;
        Ok((0..space.num_histories()).map(|h| space.history(h)).collect())
    }
}

/// Index arithmetic over length-`memory` histories of a fixed game shape.
///
/// History index `h = sum_m p_m * P^(n-m)` where `p_m` is the profile index of
/// `sigma^(-m)` and `P` the number of profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySpace {
    actions: Vec<usize>,
    num_profiles: usize,
    memory: usize,
    num_histories: usize,
}

impl HistorySpace {
    pub fn new(actions: Vec<usize>, memory: usize) -> Result<Self> {
        if memory == 0 {
            return Err(ZdError::InvalidArgument("memory length must be at least 1".into()));
        }
        let num_profiles: usize = actions.iter().product();
        let max_actions = *actions.iter().max().unwrap_or(&1) as u128;
        let histories = (num_profiles as u128).checked_pow(memory as u32);
        match histories {
            Some(h) if h * max_actions <= MAX_TENSOR_ENTRIES => {}
            _ => {
                return Err(ZdError::Capacity {
                    entries: histories.map(|h| h.saturating_mul(max_actions)).unwrap_or(u128::MAX),
                    limit: MAX_TENSOR_ENTRIES,
                })
            }
        }
        Ok(HistorySpace {
            num_histories: num_profiles.pow(memory as u32),
            actions,
            num_profiles,
            memory,
        })
    }

    pub fn actions_per_player(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn num_profiles(&self) -> usize {
        self.num_profiles
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn num_histories(&self) -> usize {
        self.num_histories
    }

    /// Same game shape, different memory.
    pub fn with_memory(&self, memory: usize) -> Result<HistorySpace> {
        HistorySpace::new(self.actions.clone(), memory)
    }

    /// Dense profile index of `sigma^(-m)` (m is 1-based) inside history `h`.
    #[inline]
    pub fn state(&self, h: usize, m: usize) -> usize {
        let shift = self.num_profiles.pow((self.memory - m) as u32);
        (h / shift) % self.num_profiles
    }

    #[inline]
    pub fn newest(&self, h: usize) -> usize {
        h / self.num_profiles.pow((self.memory - 1) as u32)
    }

    /// History reached from `h` after the new profile `profile` is played.
    #[inline]
    pub fn shift(&self, h: usize, profile: usize) -> usize {
        profile * self.num_profiles.pow((self.memory - 1) as u32) + h / self.num_profiles
    }

    /// Index of the `shorter`-length prefix (newest states) of history `h`.
    #[inline]
    pub fn truncate(&self, h: usize, shorter: usize) -> usize {
        h / self.num_profiles.pow((self.memory - shorter) as u32)
    }

    /// 1-based action of `player` within dense profile `profile`.
    #[inline]
    pub fn action_in(&self, profile: usize, player: usize) -> usize {
        let stride: usize = self.actions[player..].iter().product();
        (profile / stride) % self.actions[player - 1] + 1
    }

    pub fn profile(&self, mut index: usize) -> ActionProfile {
        let mut out = vec![0; self.actions.len()];
        for (slot, &m) in out.iter_mut().zip(&self.actions).rev() {
            *slot = index % m + 1;
            index /= m;
        }
        ActionProfile(out)
    }

    pub fn profile_index(&self, profile: &ActionProfile) -> Result<usize> {
        if profile.0.len() != self.actions.len() {
            return Err(ZdError::InvalidArgument(format!(
                "profile {profile} has {} entries, expected {}",
                profile.0.len(),
                self.actions.len()
            )));
        }
        let mut idx = 0;
        for (&a, &m) in profile.0.iter().zip(&self.actions) {
            if a == 0 || a > m {
                return Err(ZdError::InvalidArgument(format!(
                    "action {a} out of range 1..={m} in profile {profile}"
                )));
            }
            idx = idx * m + (a - 1);
        }
        Ok(idx)
    }

    pub fn history(&self, h: usize) -> History {
        History((1..=self.memory).map(|m| self.profile(self.state(h, m))).collect())
    }

    pub fn index(&self, history: &History) -> Result<usize> {
        if history.len() != self.memory {
            return Err(ZdError::InvalidArgument(format!(
                "history has length {}, expected {}",
                history.len(),
                self.memory
            )));
        }
        history
            .0
            .iter()
            .try_fold(0usize, |acc, p| Ok(acc * self.num_profiles + self.profile_index(p)?))
    }

    /// Index of the history whose states are all the given dense profiles,
    /// newest first.
    pub fn index_of_states(&self, states: &[usize]) -> usize {
        states.iter().fold(0, |acc, &p| acc * self.num_profiles + p)
    }
}
