//! JSON run configuration and its resolution into library objects.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::construct::{
    biased_zd, conditional_zd, factorable_zd, memory_one_zd, probability_controlling, BiasWeights, ConstructedStrategy,
    Construction, FactorSpec, MemoryOneZdSpec,
};
use crate::error::{Result, ZdError};
use crate::game::{ActionProfile, GameSpec, History, PrisonersDilemmaParams};
use crate::markov::{Damping, PowerOptions};
use crate::strategy::{press_dyson, StrategyTensor};
use crate::tolerance::{H_SWEEP, SOLVER};
use crate::verify::{PayoffObservable, VerifyOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub game: GameConfig,
    pub strategies: Vec<StrategyConfig>,
    #[serde(default)]
    pub task: TaskConfig,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameConfig {
    Pd {
        pd: PrisonersDilemmaParams,
    },
    Explicit {
        actions: Vec<usize>,
        payoffs: Vec<Vec<f64>>,
    },
}

impl GameConfig {
    pub fn build(&self) -> Result<GameSpec> {
        match self {
            GameConfig::Pd { pd } => GameSpec::prisoners_dilemma(*pd),
            GameConfig::Explicit { actions, payoffs } => GameSpec::new(actions.clone(), payoffs.clone()),
        }
    }

    pub fn pd(&self) -> Option<PrisonersDilemmaParams> {
        match self {
            GameConfig::Pd { pd } => Some(*pd),
            GameConfig::Explicit { .. } => None,
        }
    }
}

/// Replaces one probability in a tensor; used for negative controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corruption {
    /// Newest state first.
    pub history: Vec<Vec<usize>>,
    pub action: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySource {
    Builtin {
        name: String,
        #[serde(default = "one")]
        memory: usize,
    },
    /// Rows of `T(a | h)` in history-index order.
    Tensor {
        memory: usize,
        rows: Vec<Vec<f64>>,
    },
    Random {
        memory: usize,
        seed: u64,
    },
    MemoryOneZd {
        c: Vec<f64>,
        alpha: Vec<f64>,
    },
    ProbabilityControlling {
        base: Box<StrategySource>,
        targets: Vec<Vec<usize>>,
    },
    Biased {
        base: Box<StrategySource>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        log_weights: Option<Vec<f64>>,
        memory: usize,
    },
    Conditional {
        base: Box<StrategySource>,
        condition: Vec<Vec<usize>>,
    },
    Factorable {
        g1: Vec<f64>,
        gm: Vec<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    #[serde(flatten)]
    pub source: StrategySource,
    /// Seat, 1-based; defaults to the position in the list.
    #[serde(default)]
    pub player: Option<usize>,
    #[serde(default)]
    pub corrupt: Option<Corruption>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    #[default]
    Exact,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpponentsConfig {
    pub count: usize,
    pub seed: u64,
    pub memory: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    #[serde(default = "max_iters")]
    pub max_iters: usize,
    #[serde(default = "power_tol")]
    pub tol: f64,
    #[serde(default)]
    pub damping: DampingConfig,
}

fn max_iters() -> usize {
    PowerOptions::default().max_iters
}

fn power_tol() -> f64 {
    PowerOptions::default().tol
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            max_iters: max_iters(),
            tol: power_tol(),
            damping: DampingConfig::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DampingConfig {
    #[default]
    Auto,
    Always,
    Never,
}

impl PowerConfig {
    pub fn options(&self) -> PowerOptions {
        PowerOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            damping: match self.damping {
                DampingConfig::Auto => Damping::Auto,
                DampingConfig::Always => Damping::Always,
                DampingConfig::Never => Damping::Never,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default)]
    pub command: Option<String>,
    /// Replace seat 2 of the match-up with seeded random opponents.
    #[serde(default)]
    pub opponents: Option<OpponentsConfig>,
    #[serde(default)]
    pub method: SolveMethod,
    #[serde(default)]
    pub power: PowerConfig,
    /// Mix every strategy with uniform noise at this rate.
    #[serde(default)]
    pub perturb: Option<f64>,
    #[serde(default = "rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub thin: Option<usize>,
    /// Starting history for simulation, newest state first.
    #[serde(default)]
    pub initial: Option<Vec<Vec<usize>>>,
    #[serde(default = "tol")]
    pub tol: f64,
    #[serde(default = "h_tol")]
    pub h_tol: f64,
    #[serde(default = "h_values")]
    pub h_values: Vec<f64>,
    #[serde(default = "fd_step")]
    pub fd_step: f64,
    #[serde(default = "fd_tol")]
    pub fd_tol: f64,
    /// Extra product relations over payoff observables, slot 1 first.
    #[serde(default)]
    pub deformed: Vec<Vec<PayoffObservable>>,
}

fn rounds() -> usize {
    100_000
}

fn tol() -> f64 {
    SOLVER
}

fn h_tol() -> f64 {
    H_SWEEP
}

fn h_values() -> Vec<f64> {
    VerifyOptions::default().h_values
}

fn fd_step() -> f64 {
    VerifyOptions::default().fd_step
}

fn fd_tol() -> f64 {
    VerifyOptions::default().fd_tol
}

impl Default for TaskConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl TaskConfig {
    pub fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            tol: self.tol,
            h_tol: self.h_tol,
            h_values: self.h_values.clone(),
            fd_step: self.fd_step,
            fd_tol: self.fd_tol,
        }
    }
}

/// A resolved strategy: the probability tensor actually played and, when it
/// came from a construction, the relation it claims.
#[derive(Debug, Clone)]
pub struct ResolvedStrategy {
    pub label: String,
    pub tensor: StrategyTensor,
    pub constructed: ConstructedStrategy,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ZdError::InvalidArgument(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ZdError::InvalidArgument(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Strategies ordered by seat. Feasibility of explicit tensors is not
    /// enforced here so `validate` can report on them.
    pub fn resolve(&self, game: &GameSpec) -> Result<Vec<ResolvedStrategy>> {
        let mut out = Vec::with_capacity(self.strategies.len());
        for (i, s) in self.strategies.iter().enumerate() {
            let player = s.player.unwrap_or(i + 1);
            if player == 0 || player > game.num_players() {
                return Err(ZdError::InvalidArgument(format!(
                    "strategy {} names player {player}, game has {}",
                    i + 1,
                    game.num_players()
                )));
            }
            if out.iter().any(|r: &ResolvedStrategy| r.tensor.player() == player) {
                return Err(ZdError::InvalidArgument(format!("two strategies for player {player}")));
            }
            let label = s.label.clone().unwrap_or_else(|| describe(&s.source));
            let mut r = resolve_source(game, self.game.pd().as_ref(), &s.source, player)?;
            r.label = label;
            if let Some(c) = &s.corrupt {
                let states = parse_states(game, &c.history)?;
                let h = r.tensor.space().index(&History(states))?;
                r.tensor = r.tensor.corrupt(h, c.action, c.delta)?;
                r.constructed.tensor = press_dyson(&r.tensor);
            }
            out.push(r);
        }
        out.sort_by_key(|r| r.tensor.player());
        Ok(out)
    }

    pub fn pd(&self) -> Option<PrisonersDilemmaParams> {
        self.game.pd()
    }
}

fn describe(source: &StrategySource) -> String {
    match source {
        StrategySource::Builtin { name, memory } => format!("{name}(n={memory})"),
        StrategySource::Tensor { memory, .. } => format!("tensor(n={memory})"),
        StrategySource::Random { memory, seed } => format!("random(n={memory},seed={seed})"),
        StrategySource::MemoryOneZd { .. } => "memory_one_zd".into(),
        StrategySource::ProbabilityControlling { .. } => "probability_controlling".into(),
        StrategySource::Biased { .. } => "biased".into(),
        StrategySource::Conditional { .. } => "conditional".into(),
        StrategySource::Factorable { .. } => "factorable".into(),
    }
}

pub fn parse_states(game: &GameSpec, states: &[Vec<usize>]) -> Result<Vec<ActionProfile>> {
    states
        .iter()
        .map(|s| {
            let p = ActionProfile::new(s.clone());
            game.profile_index(&p)?;
            Ok(p)
        })
        .collect()
}

fn memory_one_base(
    game: &GameSpec,
    pd: Option<&PrisonersDilemmaParams>,
    base: &StrategySource,
) -> Result<ConstructedStrategy> {
    let c = constructed_for_player_one(game, pd, base)?;
    if c.tensor.memory() != 1 {
        return Err(ZdError::InvalidArgument("base strategy must have memory 1".into()));
    }
    Ok(c)
}

fn base_alpha(base: &ConstructedStrategy) -> Option<Vec<f64>> {
    match &base.construction {
        Construction::MemoryOne { alpha } => Some(alpha.clone()),
        _ => None,
    }
}

/// Builds the source as player 1's strategy.
fn constructed_for_player_one(
    game: &GameSpec,
    pd: Option<&PrisonersDilemmaParams>,
    source: &StrategySource,
) -> Result<ConstructedStrategy> {
    let need_pd = || {
        pd.copied()
            .ok_or_else(|| ZdError::InvalidArgument("catalog strategies need a pd game".into()))
    };
    Ok(match source {
        StrategySource::Builtin { name, memory } => catalog::builtin_constructed(name, &need_pd()?, *memory)?,
        StrategySource::Tensor { .. } | StrategySource::Random { .. } => {
            let t = explicit_tensor(game, source, 1)?;
            ConstructedStrategy {
                tensor: press_dyson(&t),
                construction: Construction::Explicit,
            }
        }
        StrategySource::MemoryOneZd { c, alpha } => ConstructedStrategy {
            tensor: memory_one_zd(
                game,
                &MemoryOneZdSpec {
                    player: 1,
                    c: c.clone(),
                    alpha: alpha.clone(),
                },
            )?,
            construction: Construction::MemoryOne { alpha: alpha.clone() },
        },
        StrategySource::ProbabilityControlling { base, targets } => {
            let b = memory_one_base(game, pd, base)?;
            let targets = parse_states(game, targets)?;
            ConstructedStrategy {
                tensor: probability_controlling(&b.tensor, &targets)?,
                construction: Construction::ProbabilityControlling { targets },
            }
        }
        StrategySource::Biased {
            base,
            weights,
            log_weights,
            memory,
        } => {
            let b = memory_one_base(game, pd, base)?;
            let space = game.history_space(*memory)?;
            let w = match (weights, log_weights) {
                (Some(w), None) => BiasWeights::new(space, w.clone())?,
                (None, Some(k)) => BiasWeights::from_log_weights(space, k)?,
                _ => {
                    return Err(ZdError::InvalidArgument(
                        "biased strategies need exactly one of weights, log_weights".into(),
                    ))
                }
            };
            let tensor = biased_zd(&b.tensor, &w)?;
            let construction = match base_alpha(&b) {
                Some(alpha) => Construction::Biased { alpha, weights: w },
                None => Construction::Explicit,
            };
            ConstructedStrategy { tensor, construction }
        }
        StrategySource::Conditional { base, condition } => {
            let b = memory_one_base(game, pd, base)?;
            let condition = parse_states(game, condition)?;
            let tensor = conditional_zd(&b.tensor, &condition)?;
            let construction = match base_alpha(&b) {
                Some(alpha) => Construction::Conditional { alpha, condition },
                None => Construction::Explicit,
            };
            ConstructedStrategy { tensor, construction }
        }
        StrategySource::Factorable { g1, gm } => {
            let tensor = factorable_zd(
                game,
                &FactorSpec {
                    player: 1,
                    g1: g1.clone(),
                    gm: gm.clone(),
                },
            )?;
            let mut factors = vec![g1.clone()];
            factors.extend(gm.iter().cloned());
            ConstructedStrategy {
                tensor,
                construction: Construction::Factorable {
                    factors,
                    h_family: None,
                },
            }
        }
    })
}

fn explicit_tensor(game: &GameSpec, source: &StrategySource, player: usize) -> Result<StrategyTensor> {
    match source {
        StrategySource::Tensor { memory, rows } => {
            let space = game.history_space(*memory)?;
            let m = game.num_actions(player);
            if rows.len() != space.num_histories() || rows.iter().any(|r| r.len() != m) {
                return Err(ZdError::Dimension(format!(
                    "tensor needs {} rows of {m} probabilities",
                    space.num_histories()
                )));
            }
            StrategyTensor::new_unchecked(space, player, rows.concat())
        }
        StrategySource::Random { memory, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            StrategyTensor::random(game.history_space(*memory)?, player, &mut rng)
        }
        _ => unreachable!("only explicit sources"),
    }
}

fn resolve_source(
    game: &GameSpec,
    pd: Option<&PrisonersDilemmaParams>,
    source: &StrategySource,
    player: usize,
) -> Result<ResolvedStrategy> {
    if matches!(source, StrategySource::Tensor { .. } | StrategySource::Random { .. }) {
        let tensor = explicit_tensor(game, source, player)?;
        let constructed = ConstructedStrategy {
            tensor: press_dyson(&tensor),
            construction: Construction::Explicit,
        };
        return Ok(ResolvedStrategy {
            label: String::new(),
            tensor,
            constructed,
        });
    }
    let mut constructed = constructed_for_player_one(game, pd, source)?;
    if player != 1 {
        if player != 2 {
            return Err(ZdError::Unsupported(
                "constructed strategies are placed in seats 1 or 2".into(),
            ));
        }
        constructed = constructed.swap_players()?;
    }
    let tensor = crate::strategy::from_press_dyson(&constructed.tensor)?;
    Ok(ResolvedStrategy {
        label: String::new(),
        tensor,
        constructed,
    })
}
