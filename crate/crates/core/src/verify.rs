//! Residuals of the relations ZD-type tensors enforce, evaluated against
//! stationary distributions.
//!
//! Every check runs over all supplied distributions (normally every extreme
//! stationary distribution of a chain) and passes only if each one does.

use serde::{Deserialize, Serialize};

use crate::construct::{BiasWeights, ConstructedStrategy, Construction, HFamily};
use crate::error::{Result, ZdError};
use crate::game::{ActionProfile, GameSpec, HistorySpace, PrisonersDilemmaParams};
use crate::markov::StationaryDistribution;
use crate::strategy::PressDysonTensor;
use crate::tolerance::{DEGENERATE, EXACT, H_SWEEP, MAX_EXPONENT, SOLVER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// The relation itself was checked.
    Relation,
    /// The normalizer vanished; zero mass on the support was checked instead.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationEntry {
    /// Index of the distribution in the supplied list.
    pub distribution: usize,
    pub branch: Branch,
    pub residual: f64,
    /// Biased-ensemble normalizer `<w>`, when applicable.
    pub normalizer: Option<f64>,
    /// Largest stationary mass on the weight support, when applicable.
    pub support_mass: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationReport {
    pub relation: String,
    pub player: Option<usize>,
    pub tolerance: f64,
    pub degenerate_threshold: Option<f64>,
    pub entries: Vec<RelationEntry>,
    /// The relation reads `0 = 0` regardless of the distribution.
    pub vacuous: bool,
    pub pass: bool,
}

impl RelationReport {
    fn finish(relation: impl Into<String>, tolerance: f64, entries: Vec<RelationEntry>) -> Self {
        let pass = entries.iter().all(|e| e.pass);
        RelationReport {
            relation: relation.into(),
            player: None,
            tolerance,
            degenerate_threshold: None,
            entries,
            vacuous: false,
            pass,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    fn with_player(mut self, player: usize) -> Self {
        self.player = Some(player);
        self
    }
}

fn same_shape(a: &HistorySpace, b: &HistorySpace) -> Result<()> {
    if a.actions_per_player() != b.actions_per_player() {
        return Err(ZdError::Dimension("objects belong to different games".into()));
    }
    if a.memory() > b.memory() {
        return Err(ZdError::Dimension(format!(
            "memory {} exceeds the distribution's memory {}",
            a.memory(),
            b.memory()
        )));
    }
    Ok(())
}

/// `sum_h pi(h) Tdot_a(sigma_a | h)` for every action `sigma_a`.
pub fn akin_residual(pd: &PressDysonTensor, pi: &StationaryDistribution) -> Result<Vec<f64>> {
    same_shape(pd.space(), pi.space())?;
    let space = pi.space();
    Ok((1..=pd.num_actions())
        .map(|a| pi.expect(|h| pd.value(space.truncate(h, pd.memory()), a)))
        .collect())
}

/// Akin's lemma for one tensor across distributions.
pub fn akin_report(pd: &PressDysonTensor, pis: &[StationaryDistribution], tol: f64) -> Result<RelationReport> {
    let mut entries = Vec::with_capacity(pis.len());
    for (i, pi) in pis.iter().enumerate() {
        let r = akin_residual(pd, pi)?.iter().map(|v| v.abs()).fold(0.0, f64::max);
        entries.push(RelationEntry {
            distribution: i,
            branch: Branch::Relation,
            residual: r,
            normalizer: None,
            support_mass: None,
            pass: r <= tol,
        });
    }
    let mut rep = RelationReport::finish("akin", tol, entries).with_player(pd.player());
    rep.vacuous = pd.is_zero(0.0);
    Ok(rep)
}

fn check_alpha(game: &GameSpec, alpha: &[f64]) -> Result<()> {
    if alpha.len() != game.num_players() + 1 {
        return Err(ZdError::Dimension(format!(
            "expected {} alpha coefficients, got {}",
            game.num_players() + 1,
            alpha.len()
        )));
    }
    if alpha.iter().all(|a| *a == 0.0) {
        return Err(ZdError::TrivialRelation("all alpha coefficients are zero".into()));
    }
    Ok(())
}

/// Biased-ensemble relation: with `D = <w>`, either
/// `sum_b alpha_b <s_b(sigma^(-1)) w> / D = 0` (when `D >= 1e-12`) or every
/// history in the support of `w` has zero stationary mass.
pub fn biased_relation(
    game: &GameSpec,
    alpha: &[f64],
    weights: &BiasWeights,
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<RelationReport> {
    check_alpha(game, alpha)?;
    let mut entries = Vec::with_capacity(pis.len());
    for (i, pi) in pis.iter().enumerate() {
        same_shape(weights.space(), pi.space())?;
        let space = pi.space();
        let wn = weights.space().memory();
        let w = |h: usize| weights.weight(space.truncate(h, wn));
        let d = pi.expect(w);
        if d >= DEGENERATE {
            let num = pi.expect(|h| {
                let newest = space.newest(h);
                let lin: f64 = alpha
                    .iter()
                    .enumerate()
                    .map(|(b, a)| a * game.payoff_at(b, newest))
                    .sum();
                lin * w(h)
            });
            let r = (num / d).abs();
            entries.push(RelationEntry {
                distribution: i,
                branch: Branch::Relation,
                residual: r,
                normalizer: Some(d),
                support_mass: None,
                pass: r <= tol,
            });
        } else {
            let mass = (0..space.num_histories())
                .filter(|&h| w(h) > 0.0)
                .map(|h| pi.prob(h))
                .fold(0.0, f64::max);
            entries.push(RelationEntry {
                distribution: i,
                branch: Branch::Degenerate,
                residual: mass,
                normalizer: Some(d),
                support_mass: Some(mass),
                pass: mass <= DEGENERATE,
            });
        }
    }
    let mut rep = RelationReport::finish("biased", tol, entries);
    rep.degenerate_threshold = Some(DEGENERATE);
    Ok(rep)
}

/// `sum_b alpha_b <s_b> = 0`.
pub fn memory_one_relation(
    game: &GameSpec,
    alpha: &[f64],
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<RelationReport> {
    let space = game.history_space(1)?;
    let mut rep = biased_relation(game, alpha, &BiasWeights::constant(space), pis, tol)?;
    rep.relation = "memory_one".into();
    Ok(rep)
}

/// Relation conditioned on `sigma^(-2..)` = `condition`, or zero marginal.
pub fn conditional_relation(
    game: &GameSpec,
    alpha: &[f64],
    condition: &[ActionProfile],
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<RelationReport> {
    let space = game.history_space(condition.len() + 1)?;
    let mut rep = biased_relation(
        game,
        alpha,
        &BiasWeights::partial_indicator(space, condition)?,
        pis,
        tol,
    )?;
    rep.relation = "conditional".into();
    Ok(rep)
}

/// Stationary mass of the history whose newest states are `targets` must vanish.
pub fn probability_zero(
    game: &GameSpec,
    targets: &[ActionProfile],
    pis: &[StationaryDistribution],
) -> Result<RelationReport> {
    let mut entries = Vec::with_capacity(pis.len());
    for (i, pi) in pis.iter().enumerate() {
        let space = pi.space();
        if targets.len() > space.memory() {
            return Err(ZdError::Dimension("more target states than memory".into()));
        }
        let fixed: Vec<usize> = targets.iter().map(|t| game.profile_index(t)).collect::<Result<_>>()?;
        let mass: f64 = (0..space.num_histories())
            .filter(|&h| fixed.iter().enumerate().all(|(m, &p)| space.state(h, m + 1) == p))
            .map(|h| pi.prob(h))
            .sum();
        entries.push(RelationEntry {
            distribution: i,
            branch: Branch::Degenerate,
            residual: mass,
            normalizer: None,
            support_mass: Some(mass),
            pass: mass <= DEGENERATE,
        });
    }
    Ok(RelationReport::finish("probability_zero", DEGENERATE, entries))
}

fn slot_product(space: &HistorySpace, factors: &[Vec<f64>], h: usize) -> f64 {
    factors
        .iter()
        .enumerate()
        .map(|(i, g)| g[space.state(h, i + 1)])
        .product()
}

/// `<prod_m G_m(sigma^(-m))> = 0`; `factors[0]` is `G_1`.
pub fn correlation_relation(
    game: &GameSpec,
    factors: &[Vec<f64>],
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<RelationReport> {
    if factors.is_empty() {
        return Err(ZdError::InvalidArgument("at least one factor is required".into()));
    }
    if factors.iter().any(|g| g.len() != game.num_profiles()) {
        return Err(ZdError::Dimension(format!(
            "every factor needs {} entries",
            game.num_profiles()
        )));
    }
    let mut entries = Vec::with_capacity(pis.len());
    let mut vacuous = true;
    for (i, pi) in pis.iter().enumerate() {
        let space = pi.space();
        if factors.len() > space.memory() {
            return Err(ZdError::Dimension("more factors than memory".into()));
        }
        vacuous &= (0..space.num_histories()).all(|h| slot_product(space, factors, h) == 0.0);
        let r = pi.expect(|h| slot_product(space, factors, h)).abs();
        entries.push(RelationEntry {
            distribution: i,
            branch: Branch::Relation,
            residual: r,
            normalizer: None,
            support_mass: None,
            pass: r <= tol,
        });
    }
    let mut rep = RelationReport::finish("correlation", tol, entries);
    rep.vacuous = vacuous && !pis.is_empty();
    Ok(rep)
}

/// One term of a payoff observable: a monomial `coeff * prod_b s_b^k_b` or an
/// exponential `coeff * exp(sum_b h_b s_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffTerm {
    Monomial { coeff: f64, exponents: Vec<u32> },
    Exponential { coeff: f64, rates: Vec<f64> },
}

/// Finite sum of payoff terms, evaluated on one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffObservable(pub Vec<PayoffTerm>);

impl PayoffObservable {
    /// `s_1^k - s_2^k` in a two-player game.
    pub fn power_difference(k: u32) -> Self {
        PayoffObservable(vec![
            PayoffTerm::Monomial {
                coeff: 1.0,
                exponents: vec![k, 0],
            },
            PayoffTerm::Monomial {
                coeff: -1.0,
                exponents: vec![0, k],
            },
        ])
    }

    /// `exp(h s_1) - exp(h s_2)` in a two-player game.
    pub fn exp_difference(h: f64) -> Self {
        PayoffObservable(vec![
            PayoffTerm::Exponential {
                coeff: 1.0,
                rates: vec![h, 0.0],
            },
            PayoffTerm::Exponential {
                coeff: -1.0,
                rates: vec![0.0, h],
            },
        ])
    }

    /// A fixed table of values, one per state (as a sum of indicator-free constants
    /// this is only usable for older slots).
    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|t| match t {
            PayoffTerm::Monomial { coeff, exponents } => *coeff == 0.0 || exponents.iter().all(|k| *k == 0),
            PayoffTerm::Exponential { coeff, rates } => *coeff == 0.0 || rates.iter().all(|r| *r == 0.0),
        })
    }

    pub fn table(&self, game: &GameSpec) -> Result<Vec<f64>> {
        let n = game.num_players();
        let mut out = vec![0.0; game.num_profiles()];
        for term in &self.0 {
            match term {
                PayoffTerm::Monomial { coeff, exponents } => {
                    if exponents.len() != n {
                        return Err(ZdError::Dimension(format!("monomial needs {n} exponents")));
                    }
                    for (p, v) in out.iter_mut().enumerate() {
                        let mono: f64 = exponents
                            .iter()
                            .enumerate()
                            .map(|(b, &k)| game.payoff_at(b + 1, p).powi(k as i32))
                            .product();
                        *v += coeff * mono;
                    }
                }
                PayoffTerm::Exponential { coeff, rates } => {
                    if rates.len() != n {
                        return Err(ZdError::Dimension(format!("exponential needs {n} rates")));
                    }
                    for (p, v) in out.iter_mut().enumerate() {
                        let x: f64 = rates
                            .iter()
                            .enumerate()
                            .map(|(b, r)| r * game.payoff_at(b + 1, p))
                            .sum();
                        if x.abs() > MAX_EXPONENT {
                            return Err(ZdError::Range(format!(
                                "exponent {x} exceeds {MAX_EXPONENT}; rescale payoffs or rates"
                            )));
                        }
                        *v += coeff * x.exp();
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `< prod_m F_m(sigma^(-m)) > = 0` for payoff observables `F_m`, slot 1 first.
pub fn deformed_relation(
    game: &GameSpec,
    slots: &[PayoffObservable],
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<RelationReport> {
    match slots.first() {
        None => {
            return Err(ZdError::InvalidArgument(
                "at least one slot observable is required".into(),
            ))
        }
        Some(first) if first.is_constant() => {
            return Err(ZdError::TrivialRelation(
                "newest-state observable has no payoff dependence".into(),
            ))
        }
        _ => {}
    }
    let tables = slots.iter().map(|s| s.table(game)).collect::<Result<Vec<_>>>()?;
    let mut rep = correlation_relation(game, &tables, pis, tol)?;
    rep.relation = "deformed".into();
    Ok(rep)
}

fn checked_exp(x: f64) -> Result<f64> {
    if x.abs() > MAX_EXPONENT {
        return Err(ZdError::Range(format!(
            "exponent {x} exceeds {MAX_EXPONENT}; rescale payoffs or h"
        )));
    }
    Ok(x.exp())
}

type Factors = Vec<Vec<f64>>;

/// Per-state factors of the exponential-payoff relation at rates `h`:
/// the raw form (numerators) and the normalized form (divided by
/// `exp(h T) - exp(h S)`, or the linear limit at `h = 0`).
fn h_factors(pd: &PrisonersDilemmaParams, family: HFamily, h: &[f64]) -> Result<(Factors, Factors)> {
    let s1 = [pd.r, pd.s, pd.t, pd.p];
    let s2 = [pd.r, pd.t, pd.s, pd.p];
    let d = pd.t - pd.s;
    let mut raw = Vec::with_capacity(h.len());
    let mut norm = Vec::with_capacity(h.len());
    for (m, &hm) in h.iter().enumerate() {
        let delta = checked_exp(hm * pd.t)? - checked_exp(hm * pd.s)?;
        let mut r = vec![0.0; 4];
        let mut q = vec![0.0; 4];
        for p in 0..4 {
            let (a, b) = if m == 0 || family == HFamily::Tftn2 {
                (s1[p], s2[p])
            } else {
                (s2[p], s1[p])
            };
            let e = checked_exp(hm * a)? - checked_exp(hm * b)?;
            if m == 0 {
                r[p] = e;
                q[p] = if hm == 0.0 { (a - b) / d } else { e / delta };
            } else {
                r[p] = e + delta;
                q[p] = if hm == 0.0 {
                    (a - b + d) / (2.0 * d)
                } else {
                    (e + delta) / (2.0 * delta)
                };
            }
        }
        raw.push(r);
        norm.push(q);
    }
    Ok((raw, norm))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HSweepPoint {
    pub h: Vec<f64>,
    /// `|<prod F_m>|` of the normalized relation, max over distributions.
    pub residual: f64,
    /// Same for the unnormalized exponential form.
    pub raw_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HSweepReport {
    pub family: HFamily,
    pub tolerance: f64,
    pub points: Vec<HSweepPoint>,
    pub pass: bool,
}

/// Exponential-payoff relations of the memory-n TFT variants over a grid of
/// rate vectors, all against the same distributions.
pub fn h_sweep(
    pd: &PrisonersDilemmaParams,
    family: HFamily,
    h_grid: &[Vec<f64>],
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<HSweepReport> {
    let mut points = Vec::with_capacity(h_grid.len());
    for h in h_grid {
        let (raw, norm) = h_factors(pd, family, h)?;
        let mut residual = 0.0f64;
        let mut raw_residual = 0.0f64;
        for pi in pis {
            let space = pi.space();
            if h.len() != space.memory() {
                return Err(ZdError::Dimension(format!(
                    "h vector has {} entries, memory is {}",
                    h.len(),
                    space.memory()
                )));
            }
            residual = residual.max(pi.expect(|x| slot_product(space, &norm, x)).abs());
            raw_residual = raw_residual.max(pi.expect(|x| slot_product(space, &raw, x)).abs());
        }
        points.push(HSweepPoint {
            h: h.clone(),
            residual,
            raw_residual,
            pass: residual <= tol,
        });
    }
    let pass = points.iter().all(|p| p.pass);
    Ok(HSweepReport {
        family,
        tolerance: tol,
        points,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HDerivative {
    pub h: Vec<f64>,
    pub coordinate: usize,
    /// Central difference of the raw relation, scaled by the older factors'
    /// `|exp(h_m T) - exp(h_m S)|` for nonzero `h_m`.
    pub value: f64,
    pub pass: bool,
}

/// Central-difference derivative of the raw exponential relation with
/// respect to `h[coordinate]` (0-based), at `h`.
pub fn h_derivative(
    pd: &PrisonersDilemmaParams,
    family: HFamily,
    h: &[f64],
    coordinate: usize,
    step: f64,
    pis: &[StationaryDistribution],
    tol: f64,
) -> Result<HDerivative> {
    if coordinate >= h.len() {
        return Err(ZdError::InvalidArgument(format!(
            "coordinate {coordinate} out of range"
        )));
    }
    let mut value = 0.0f64;
    for pi in pis {
        let eval_one = |hv: &[f64]| -> Result<f64> {
            let (raw, _) = h_factors(pd, family, hv)?;
            Ok(pi.expect(|x| slot_product(pi.space(), &raw, x)))
        };
        let mut plus = h.to_vec();
        let mut minus = h.to_vec();
        plus[coordinate] += step;
        minus[coordinate] -= step;
        let d = (eval_one(&plus)? - eval_one(&minus)?) / (2.0 * step);
        value = value.max(d.abs());
    }
    let scale: f64 = h
        .iter()
        .enumerate()
        .filter(|(m, hm)| *m != coordinate && **hm != 0.0)
        .map(|(_, &hm)| ((hm * pd.t).exp() - (hm * pd.s).exp()).abs())
        .product();
    let value = value / scale;
    Ok(HDerivative {
        h: h.to_vec(),
        coordinate,
        value,
        pass: value <= tol,
    })
}

/// Cartesian grid `values^n`.
pub fn h_grid(values: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut grid = vec![vec![]];
    for _ in 0..n {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub tol: f64,
    pub h_tol: f64,
    pub h_values: Vec<f64>,
    pub fd_step: f64,
    pub fd_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: SOLVER,
            h_tol: H_SWEEP,
            h_values: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            fd_step: 1e-4,
            fd_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyVerification {
    pub relations: Vec<RelationReport>,
    pub h_sweep: Option<HSweepReport>,
    pub h_derivatives: Vec<HDerivative>,
    pub pass: bool,
}

/// Akin's lemma plus every relation the construction claims, against `pis`.
pub fn verify_constructed(
    game: &GameSpec,
    pd_params: Option<&PrisonersDilemmaParams>,
    strategy: &ConstructedStrategy,
    pis: &[StationaryDistribution],
    opts: &VerifyOptions,
) -> Result<StrategyVerification> {
    let player = strategy.tensor.player();
    let mut relations = vec![akin_report(&strategy.tensor, pis, opts.tol)?];
    let mut h_sweep_report = None;
    let mut h_derivatives = Vec::new();
    match &strategy.construction {
        Construction::Explicit => {}
        Construction::Repeat => {
            let mut r = akin_report(&strategy.tensor, pis, opts.tol)?;
            r.relation = "repeat".into();
            r.vacuous = true;
            relations.push(r);
        }
        Construction::MemoryOne { alpha } => {
            relations.push(memory_one_relation(game, alpha, pis, opts.tol)?);
        }
        Construction::ProbabilityControlling { targets } => {
            relations.push(probability_zero(game, targets, pis)?);
        }
        Construction::Biased { alpha, weights } => {
            relations.push(biased_relation(game, alpha, weights, pis, opts.tol)?);
        }
        Construction::Conditional { alpha, condition } => {
            relations.push(conditional_relation(game, alpha, condition, pis, opts.tol)?);
        }
        Construction::Factorable { factors, h_family } => {
            relations.push(correlation_relation(game, factors, pis, opts.tol)?);
            if let (Some(family), Some(pd)) = (h_family, pd_params) {
                let n = pis.first().map(|p| p.space().memory()).unwrap_or(factors.len());
                let grid = h_grid(&opts.h_values, n);
                h_sweep_report = Some(h_sweep(pd, *family, &grid, pis, opts.h_tol)?);
                for h in grid.iter() {
                    for c in 0..n {
                        if h[c] == 0.0 {
                            h_derivatives.push(h_derivative(pd, *family, h, c, opts.fd_step, pis, opts.fd_tol)?);
                        }
                    }
                }
            }
        }
    }
    let relations: Vec<RelationReport> = relations
        .into_iter()
        .map(|r| if r.player.is_none() { r.with_player(player) } else { r })
        .collect();
    let pass = relations.iter().all(|r| r.pass)
        && h_sweep_report.as_ref().is_none_or(|r| r.pass)
        && h_derivatives.iter().all(|d| d.pass);
    Ok(StrategyVerification {
        relations,
        h_sweep: h_sweep_report,
        h_derivatives,
        pass,
    })
}

/// Slack used when comparing exact-by-construction identities in reports.
pub const IDENTITY_TOL: f64 = EXACT;
