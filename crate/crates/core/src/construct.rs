//! Constructors for zero-determinant strategy families and a recognizer for
//! memory-one ZD tensors.
//!
//! Every constructor returns a [`PressDysonTensor`]; convert it to playable
//! probabilities with [`crate::strategy::from_press_dyson`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, ZdError};
use crate::game::{ActionProfile, GameSpec, HistorySpace};
use crate::strategy::{validate_press_dyson, PressDysonTensor};
use crate::tolerance::{EXACT, SOLVER};

/// `sum_b alpha_b s_b(sigma)` for every profile, `alpha` indexed `0..=N`.
pub fn linear_payoff(game: &GameSpec, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != game.num_players() + 1 {
        return Err(ZdError::Dimension(format!(
            "expected {} payoff coefficients (s_0..s_N), got {}",
            game.num_players() + 1,
            alpha.len()
        )));
    }
    Ok((0..game.num_profiles())
        .map(|p| alpha.iter().enumerate().map(|(b, a)| a * game.payoff_at(b, p)).sum())
        .collect())
}

/// Coefficients of a memory-one ZD strategy: `sum c Tdot = sum alpha s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryOneZdSpec {
    pub player: usize,
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// How a tensor was built; decides which relation it is expected to enforce.
#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    /// No relation claimed beyond Akin's lemma.
    Explicit,
    /// Zero tensor; every relation it enforces is `0 = 0`.
    Repeat,
    /// `sum_b alpha_b <s_b> = 0`.
    MemoryOne { alpha: Vec<f64> },
    /// Stationary probability of the target history is zero.
    ProbabilityControlling { targets: Vec<ActionProfile> },
    /// Biased-ensemble relation or zero mass on the weight support.
    Biased { alpha: Vec<f64>, weights: BiasWeights },
    /// Relation conditioned on the older states, or zero marginal.
    Conditional {
        alpha: Vec<f64>,
        condition: Vec<ActionProfile>,
    },
    /// `<prod_m G_m(sigma^(-m))> = 0`; `h_family` marks the two catalog
    /// strategies that also enforce the exponential-payoff families.
    Factorable {
        factors: Vec<Vec<f64>>,
        h_family: Option<HFamily>,
    },
}

/// Exponential-payoff relation families of the two memory-n TFT variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HFamily {
    /// Older states weighted by `s_2 - s_1 + (T - S)`.
    Tftn,
    /// Older states weighted by `s_1 - s_2 + (T - S)`.
    Tftn2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedStrategy {
    pub tensor: PressDysonTensor,
    pub construction: Construction,
}

fn swapped_profile(space: &HistorySpace, p: usize) -> usize {
    let prof = space.profile(p);
    let a = prof.actions();
    let swapped: Vec<usize> = a.iter().rev().cloned().collect();
    space
        .profile_index(&ActionProfile::new(swapped))
        .expect("equal action sets")
}

impl ConstructedStrategy {
    /// Moves the strategy to the other seat of a two-player game, carrying the
    /// construction along (coefficients, targets, weights and factors are
    /// re-indexed so the claimed relation still refers to the same players).
    pub fn swap_players(&self) -> Result<Self> {
        let tensor = self.tensor.swap_players()?;
        let swap_alpha = |a: &[f64]| vec![a[0], a[2], a[1]];
        let swap_states = |states: &[ActionProfile]| {
            states
                .iter()
                .map(|s| ActionProfile::new(s.actions().iter().rev().cloned().collect()))
                .collect::<Vec<_>>()
        };
        let space = tensor.space().clone();
        let construction = match &self.construction {
            Construction::Explicit => Construction::Explicit,
            Construction::Repeat => Construction::Repeat,
            Construction::MemoryOne { alpha } => Construction::MemoryOne {
                alpha: swap_alpha(alpha),
            },
            Construction::ProbabilityControlling { targets } => Construction::ProbabilityControlling {
                targets: swap_states(targets),
            },
            Construction::Biased { alpha, weights } => {
                let ws = weights.space();
                let w = (0..ws.num_histories())
                    .map(|h| {
                        let states: Vec<usize> =
                            (1..=ws.memory()).map(|m| swapped_profile(ws, ws.state(h, m))).collect();
                        weights.weight(ws.index_of_states(&states))
                    })
                    .collect();
                Construction::Biased {
                    alpha: swap_alpha(alpha),
                    weights: BiasWeights::new(ws.clone(), w)?,
                }
            }
            Construction::Conditional { alpha, condition } => Construction::Conditional {
                alpha: swap_alpha(alpha),
                condition: swap_states(condition),
            },
            Construction::Factorable { factors, h_family } => Construction::Factorable {
                factors: factors
                    .iter()
                    .map(|g| (0..g.len()).map(|p| g[swapped_profile(&space, p)]).collect())
                    .collect(),
                h_family: *h_family,
            },
        };
        Ok(ConstructedStrategy { tensor, construction })
    }
}

fn feasible(pd: PressDysonTensor) -> Result<PressDysonTensor> {
    let report = validate_press_dyson(&pd);
    match report.violations.first() {
        None => Ok(pd),
        Some(v) => Err(ZdError::InfeasibleZd(format!(
            "{:?} violation of {:e} at history {} (action {})",
            v.kind,
            v.magnitude,
            v.history,
            v.action.unwrap_or(0)
        ))),
    }
}

fn require_memory_one(base: &PressDysonTensor) -> Result<()> {
    if base.memory() != 1 {
        return Err(ZdError::InvalidArgument(format!(
            "base tensor must have memory 1, has {}",
            base.memory()
        )));
    }
    let report = validate_press_dyson(base);
    if let Some(v) = report.violations.first() {
        return Err(ZdError::InfeasibleTensor {
            history: v.history.to_string(),
            action: v.action.unwrap_or(0),
            detail: format!("{:?} violation of {:e}", v.kind, v.magnitude),
        });
    }
    Ok(())
}

/// Canonical two-action memory-one ZD tensor:
/// `Tdot(1|sigma) = sum_b alpha_b s_b(sigma) / (c_1 - c_2)`, `Tdot(2|.) = -Tdot(1|.)`.
pub fn memory_one_zd(game: &GameSpec, spec: &MemoryOneZdSpec) -> Result<PressDysonTensor> {
    let space = game.history_space(1)?;
    if spec.player == 0 || spec.player > game.num_players() {
        return Err(ZdError::InvalidArgument(format!("player {} out of range", spec.player)));
    }
    let m = game.num_actions(spec.player);
    if m != 2 {
        return Err(ZdError::Unsupported(format!(
            "memory-one ZD construction needs 2 actions, player {} has {m}; \
             build the tensor explicitly and use recognize_zd",
            spec.player
        )));
    }
    if spec.c.len() != 2 {
        return Err(ZdError::Dimension(format!(
            "expected 2 c-coefficients, got {}",
            spec.c.len()
        )));
    }
    let denom = spec.c[0] - spec.c[1];
    if denom == 0.0 {
        return Err(ZdError::InvalidArgument("c_1 and c_2 must differ".into()));
    }
    if spec.alpha.iter().all(|&a| a == 0.0) {
        return Err(ZdError::TrivialRelation("all alpha coefficients are zero".into()));
    }
    let first: Vec<f64> = linear_payoff(game, &spec.alpha)?
        .into_iter()
        .map(|v| v / denom)
        .collect();
    feasible(PressDysonTensor::from_first_action(space, spec.player, first)?)
}

/// `Tdot(sigma_a | h) = base(sigma_a | sigma^(-1)) * prod_m delta(sigma^(-m), targets[m])`.
pub fn probability_controlling(base: &PressDysonTensor, targets: &[ActionProfile]) -> Result<PressDysonTensor> {
    require_memory_one(base)?;
    if targets.is_empty() {
        return Err(ZdError::InvalidArgument("at least one target state is required".into()));
    }
    let one = base.space();
    let first = one.profile_index(&targets[0])?;
    if base.row(first).iter().all(|v| v.abs() <= EXACT) {
        return Err(ZdError::Precondition(format!(
            "base tensor vanishes at target state {}; nothing would be enforced",
            targets[0]
        )));
    }
    let weights = BiasWeights::indicator(one.with_memory(targets.len())?, targets)?;
    biased_zd(base, &weights)
}

/// Multiplicative history weights `exp(K(h) - K_max)`, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasWeights {
    space: HistorySpace,
    w: Vec<f64>,
}

impl BiasWeights {
    /// Entries must lie in `[0, 1]` with maximum one, unless all are zero.
    pub fn new(space: HistorySpace, w: Vec<f64>) -> Result<Self> {
        if w.len() != space.num_histories() {
            return Err(ZdError::Dimension(format!(
                "expected {} weights, got {}",
                space.num_histories(),
                w.len()
            )));
        }
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ZdError::InvalidArgument(format!(
                "weight {v} at history {} outside [0, 1]",
                space.history(i)
            )));
        }
        let max = w.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 && (1.0 - max) > EXACT {
            return Err(ZdError::InvalidArgument(format!(
                "largest weight is {max}; weights are exp(K - K_max) and must peak at 1"
            )));
        }
        Ok(BiasWeights { space, w })
    }

    /// From log-weights `K(h)`; `-inf` marks histories outside the support.
    pub fn from_log_weights(space: HistorySpace, k: &[f64]) -> Result<Self> {
        if k.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(ZdError::InvalidArgument(
                "log-weights must be < +inf and not NaN".into(),
            ));
        }
        let kmax = k.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w = if kmax == f64::NEG_INFINITY {
            vec![0.0; k.len()]
        } else {
            k.iter().map(|v| (v - kmax).exp()).collect()
        };
        Self::new(space, w)
    }

    pub fn constant(space: HistorySpace) -> Self {
        let n = space.num_histories();
        BiasWeights { space, w: vec![1.0; n] }
    }

    /// One on histories whose newest `states.len()` states equal `states`.
    pub fn indicator(space: HistorySpace, states: &[ActionProfile]) -> Result<Self> {
        let slots: Vec<(usize, ActionProfile)> = states.iter().cloned().enumerate().map(|(i, p)| (i + 1, p)).collect();
        Self::slot_indicator(space, &slots)
    }

    /// One on histories with `sigma^(-2..=n)` equal to `condition`.
    pub fn partial_indicator(space: HistorySpace, condition: &[ActionProfile]) -> Result<Self> {
        let slots: Vec<(usize, ActionProfile)> =
            condition.iter().cloned().enumerate().map(|(i, p)| (i + 2, p)).collect();
        Self::slot_indicator(space, &slots)
    }

    /// One on histories matching every `(slot, state)` pair, slots 1-based.
    pub fn slot_indicator(space: HistorySpace, slots: &[(usize, ActionProfile)]) -> Result<Self> {
        let mut fixed = Vec::with_capacity(slots.len());
        for (slot, p) in slots {
            if *slot == 0 || *slot > space.memory() {
                return Err(ZdError::InvalidArgument(format!(
                    "slot {slot} outside memory 1..={}",
                    space.memory()
                )));
            }
            fixed.push((*slot, space.profile_index(p)?));
        }
        let w = (0..space.num_histories())
            .map(|h| {
                if fixed.iter().all(|&(m, p)| space.state(h, m) == p) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(space, w)
    }

    /// `w(h) = prod_{m>=2} G_m(sigma^(-m))`, `factors[0]` being `G_2`.
    pub fn from_slot_factors(space: HistorySpace, factors: &[Vec<f64>]) -> Result<Self> {
        if factors.len() + 1 != space.memory() {
            return Err(ZdError::Dimension(format!(
                "memory {} needs {} older-state factors, got {}",
                space.memory(),
                space.memory() - 1,
                factors.len()
            )));
        }
        let w = (0..space.num_histories())
            .map(|h| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(i, g)| g[space.state(h, i + 2)])
                    .product()
            })
            .collect();
        Self::new(space, w)
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn weight(&self, h: usize) -> f64 {
        self.w[h]
    }

    /// Histories with positive weight.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.w.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(h, _)| h)
    }
}

/// `Tdot(sigma_a | h) = base(sigma_a | sigma^(-1)) * w(h)`.
pub fn biased_zd(base: &PressDysonTensor, weights: &BiasWeights) -> Result<PressDysonTensor> {
    require_memory_one(base)?;
    let space = weights.space().clone();
    if space.actions_per_player() != base.space().actions_per_player() {
        return Err(ZdError::Dimension("weights and base belong to different games".into()));
    }
    let m = base.num_actions();
    let mut values = Vec::with_capacity(space.num_histories() * m);
    for h in 0..space.num_histories() {
        let w = weights.weight(h);
        values.extend(base.row(space.newest(h)).iter().map(|v| v * w));
    }
    feasible(PressDysonTensor::new(space, base.player(), values)?)
}

/// `Tdot(sigma_a | h) = base(sigma_a | sigma^(-1)) * prod_{m>=2} delta(sigma^(-m), condition[m-2])`.
pub fn conditional_zd(base: &PressDysonTensor, condition: &[ActionProfile]) -> Result<PressDysonTensor> {
    require_memory_one(base)?;
    let space = base.space().with_memory(condition.len() + 1)?;
    biased_zd(base, &BiasWeights::partial_indicator(space, condition)?)
}

/// Per-state factors of a factorable tensor: `G_1` (a memory-one ZD vector
/// for action 1) and `G_m` for the older states, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub player: usize,
    pub g1: Vec<f64>,
    pub gm: Vec<Vec<f64>>,
}

/// `Tdot(1 | h) = prod_m G_m(sigma^(-m))`, `Tdot(2 | h) = -Tdot(1 | h)`.
pub fn factorable_zd(game: &GameSpec, spec: &FactorSpec) -> Result<PressDysonTensor> {
    let p = game.num_profiles();
    if spec.g1.len() != p || spec.gm.iter().any(|g| g.len() != p) {
        return Err(ZdError::Dimension(format!("every factor needs {p} entries")));
    }
    for (i, g) in spec.gm.iter().enumerate() {
        if let Some((j, v)) = g.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ZdError::InvalidArgument(format!(
                "G_{} = {v} at state {} is outside [0, 1]",
                i + 2,
                game.profile(j)
            )));
        }
    }
    let one = game.history_space(1)?;
    let base = feasible(PressDysonTensor::from_first_action(one, spec.player, spec.g1.clone())?)?;
    if spec.gm.is_empty() {
        return Ok(base);
    }
    let space = game.history_space(spec.gm.len() + 1)?;
    let first = (0..space.num_histories())
        .map(|h| {
            let older: f64 = spec
                .gm
                .iter()
                .enumerate()
                .map(|(i, g)| g[space.state(h, i + 2)])
                .product();
            base.value(space.newest(h), 1) * older
        })
        .collect();
    feasible(PressDysonTensor::from_first_action(space, spec.player, first)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZdClass {
    /// A nontrivial `(c, alpha)` fits within tolerance.
    Zd,
    /// Only the trivial `alpha = 0` solution exists (the zero tensor).
    TrivialZd,
    NotZd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recognition {
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Max-norm residual of `sum c Tdot - sum alpha s` over all states.
    pub residual: f64,
    pub class: ZdClass,
}

/// Finds the `(c, alpha)` with `||(c, alpha)|| = 1` and `alpha != 0` that best
/// satisfies the memory-one ZD condition.
///
/// For fixed `alpha` the optimal `c` is a least-squares fit onto the columns of
/// the tensor, so `alpha` is the smallest right singular vector of the payoff
/// matrix projected off that column space.
pub fn recognize_zd(game: &GameSpec, pd: &PressDysonTensor) -> Result<Recognition> {
    if pd.memory() != 1 {
        return Err(ZdError::InvalidArgument(
            "recognition works on memory-one tensors".into(),
        ));
    }
    if pd.space().actions_per_player() != game.actions_per_player() {
        return Err(ZdError::Dimension("tensor does not belong to this game".into()));
    }
    let p = game.num_profiles();
    let m = pd.num_actions();
    let nb = game.num_players() + 1;

    if pd.is_zero(EXACT) {
        let mut c = vec![0.0; m];
        c[0] = 1.0;
        return Ok(Recognition {
            c,
            alpha: vec![0.0; nb],
            residual: 0.0,
            class: ZdClass::TrivialZd,
        });
    }

    let tdot = DMatrix::from_fn(p, m, |r, a| pd.value(r, a + 1));
    let pay = DMatrix::from_fn(p, nb, |r, b| game.payoff_at(b, r));

    let svd_t = tdot.clone().svd(true, false);
    let u = svd_t.u.as_ref().expect("requested U");
    let smax = svd_t.singular_values.max();
    let rank_cols: Vec<usize> = (0..svd_t.singular_values.len())
        .filter(|&i| svd_t.singular_values[i] > 1e-12 * smax.max(1.0))
        .collect();
    let mut proj = DMatrix::<f64>::identity(p, p);
    for &i in &rank_cols {
        let col = u.column(i);
        proj -= col * col.transpose();
    }
    let projected = &proj * &pay;
    // pad with zero rows so the SVD exposes a full right basis
    let rows = projected.nrows().max(nb);
    let mut padded = DMatrix::<f64>::zeros(rows, nb);
    padded.view_mut((0, 0), (p, nb)).copy_from(&projected);
    let svd_b = padded.svd(false, true);
    let vt = svd_b.v_t.as_ref().expect("requested V^T");
    let (imin, _) = svd_b
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let alpha = DVector::from_iterator(nb, vt.row(imin).iter().cloned());

    let target = &pay * &alpha;
    let pinv = tdot
        .clone()
        .pseudo_inverse(1e-12 * smax.max(1.0))
        .map_err(|e| ZdError::Solver(e.to_string()))?;
    let c = &pinv * &target;

    let mut coeffs: Vec<f64> = c.iter().chain(alpha.iter()).cloned().collect();
    let norm = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
    coeffs.iter_mut().for_each(|v| *v /= norm);
    if let Some(first) = coeffs.iter().find(|v| v.abs() > EXACT) {
        if *first < 0.0 {
            coeffs.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let (c, alpha) = coeffs.split_at(m);
    let cv = DVector::from_column_slice(c);
    let av = DVector::from_column_slice(alpha);
    let resid = &tdot * &cv - &pay * &av;
    let residual = resid.amax();
    Ok(Recognition {
        c: c.to_vec(),
        alpha: alpha.to_vec(),
        residual,
        class: if residual <= SOLVER {
            ZdClass::Zd
        } else {
            ZdClass::NotZd
        },
    })
}
