//! Named prisoner's dilemma strategies for player 1.
//!
//! Factor families: `g1_*` are memory-one ZD vectors for action 1; `gm_*` are
//! older-state weights in `[0, 1]`. A `gm_*` entry at memory `n` is the
//! factorable tensor `G_1 = g1_tft` times the named factor on every older
//! state. Names are stable; new entries are only ever appended.

use serde::Serialize;

use crate::construct::{
    factorable_zd, probability_controlling, ConstructedStrategy, Construction, FactorSpec, HFamily,
};
use crate::error::{Result, ZdError};
use crate::game::{ActionProfile, GameSpec, PrisonersDilemmaParams};
use crate::strategy::{press_dyson, PressDysonTensor, StrategyTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    /// Memory-one ZD vector, padded to the requested memory.
    FirstFactor,
    /// Factorable memory-n tensor with a named older-state weight.
    OlderFactor,
    /// Probability-controlling tensor.
    Controlling,
    /// Reference strategy with no claimed relation beyond Akin's lemma.
    Reference,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub kind: EntryKind,
    pub formula: &'static str,
    pub constraints: &'static str,
}

const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "repeat",
        kind: EntryKind::Reference,
        formula: "Tdot = 0 (replay own previous action)",
        constraints: "none",
    },
    CatalogEntry {
        name: "tft",
        kind: EntryKind::FirstFactor,
        formula: "Tdot(1|s) = [s1 - s2]/(T - S)",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "grim",
        kind: EntryKind::Controlling,
        formula: "Tdot(1|s) = [s1 - s2]/(T - S) * delta(s, (1,2)); enforces P(1,2) = 0",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "g1_equalizer_P",
        kind: EntryKind::FirstFactor,
        formula: "G1 = -[s2 - P]/(T - P); enforces <s2> = P",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "g1_equalizer_R",
        kind: EntryKind::FirstFactor,
        formula: "G1 = -[s2 - R]/(R - S); enforces <s2> = R",
        constraints: "T > R > P > S, 2R > T+S, 2P < T+S",
    },
    CatalogEntry {
        name: "g1_tft",
        kind: EntryKind::FirstFactor,
        formula: "G1 = [s1 - s2]/(T - S); enforces <s1> = <s2>",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "g1_mutual_B",
        kind: EntryKind::FirstFactor,
        formula: "G1 = -[s1 + s2 - (T+S)]/B, B = max{2R-(T+S), (T+S)-2P}; enforces <s1 + s2> = T+S",
        constraints: "T > R > P > S, 2R > T+S, 2P < T+S",
    },
    CatalogEntry {
        name: "gm_mutual",
        kind: EntryKind::OlderFactor,
        formula: "Gm = [s1 + s2 - 2P]/(2(R - P))",
        constraints: "T > R > P > S, 2R > T+S, 2P < T+S",
    },
    CatalogEntry {
        name: "gm_diff_plus",
        kind: EntryKind::OlderFactor,
        formula: "Gm = [s1 - s2 + (T - S)]/(2(T - S))",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "gm_diff_minus",
        kind: EntryKind::OlderFactor,
        formula: "Gm = -[s1 - s2 - (T - S)]/(2(T - S))",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "gm_s1_above_S",
        kind: EntryKind::OlderFactor,
        formula: "Gm = [s1 - S]/(T - S)",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "gm_s1_below_T",
        kind: EntryKind::OlderFactor,
        formula: "Gm = -[s1 - T]/(T - S)",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "gm_s2_above_S",
        kind: EntryKind::OlderFactor,
        formula: "Gm = [s2 - S]/(T - S)",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "gm_s2_below_T",
        kind: EntryKind::OlderFactor,
        formula: "Gm = -[s2 - T]/(T - S)",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "tftn",
        kind: EntryKind::OlderFactor,
        formula: "Tdot(1|h) = [s1 - s2]/(T - S) * prod_{m>=2} [s2 - s1 + (T - S)]/(2(T - S)); \
                  enforces <(s1 - s2) prod (s2 - s1 + T - S)> = 0",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "tftn2",
        kind: EntryKind::OlderFactor,
        formula: "Tdot(1|h) = [s1 - s2]/(T - S) * prod_{m>=2} [s1 - s2 + (T - S)]/(2(T - S)); \
                  enforces <(s1 - s2) prod (s1 - s2 + T - S)> = 0",
        constraints: "T > R > P > S",
    },
    CatalogEntry {
        name: "allc",
        kind: EntryKind::Reference,
        formula: "always cooperate",
        constraints: "none",
    },
    CatalogEntry {
        name: "alld",
        kind: EntryKind::Reference,
        formula: "always defect",
        constraints: "none",
    },
    CatalogEntry {
        name: "wsls",
        kind: EntryKind::Reference,
        formula: "win-stay lose-shift: cooperate after (1,1) and (2,2)",
        constraints: "none",
    },
    CatalogEntry {
        name: "anti_tft",
        kind: EntryKind::Reference,
        formula: "play the opposite of the co-player's previous action",
        constraints: "none",
    },
];

pub fn entries() -> &'static [CatalogEntry] {
    CATALOG
}

pub fn entry(name: &str) -> Result<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ZdError::UnknownBuiltin(name.to_string()))
}

/// A per-state factor together with its payoff coefficients `alpha_0..alpha_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub values: Vec<f64>,
    pub alpha: Vec<f64>,
}

fn needs_assumptions(name: &str) -> bool {
    entry(name).map(|e| e.constraints.contains("2R")).unwrap_or(false)
}

fn factor_from(pd: &PrisonersDilemmaParams, f: impl Fn(f64, f64) -> f64, alpha: [f64; 3]) -> Factor {
    let s1 = [pd.r, pd.s, pd.t, pd.p];
    let s2 = [pd.r, pd.t, pd.s, pd.p];
    Factor {
        values: s1.iter().zip(&s2).map(|(&a, &b)| f(a, b)).collect(),
        alpha: alpha.to_vec(),
    }
}

/// Memory-one factor `G_1` by name (`tft` is accepted for `g1_tft`).
pub fn first_factor(name: &str, pd: &PrisonersDilemmaParams) -> Result<Factor> {
    pd.check_dilemma()?;
    if needs_assumptions(name) {
        pd.check_catalog_assumptions()?;
    }
    let PrisonersDilemmaParams { r, s, t, p } = *pd;
    Ok(match name {
        "g1_equalizer_P" => factor_from(pd, |_, s2| -(s2 - p) / (t - p), [p / (t - p), 0.0, -1.0 / (t - p)]),
        "g1_equalizer_R" => factor_from(pd, |_, s2| -(s2 - r) / (r - s), [r / (r - s), 0.0, -1.0 / (r - s)]),
        "g1_tft" | "tft" => factor_from(pd, |s1, s2| (s1 - s2) / (t - s), [0.0, 1.0 / (t - s), -1.0 / (t - s)]),
        "g1_mutual_B" => {
            let b = pd.b();
            factor_from(pd, |s1, s2| -(s1 + s2 - (t + s)) / b, [(t + s) / b, -1.0 / b, -1.0 / b])
        }
        other => return Err(ZdError::UnknownBuiltin(other.to_string())),
    })
}

/// Older-state factor `G_m` by name (`tftn`/`tftn2` map to the diff factors).
pub fn older_factor(name: &str, pd: &PrisonersDilemmaParams) -> Result<Factor> {
    pd.check_dilemma()?;
    if needs_assumptions(name) {
        pd.check_catalog_assumptions()?;
    }
    let PrisonersDilemmaParams { r, s, t, p } = *pd;
    let d = t - s;
    Ok(match name {
        "gm_mutual" => factor_from(
            pd,
            |s1, s2| (s1 + s2 - 2.0 * p) / (2.0 * (r - p)),
            [-p / (r - p), 0.5 / (r - p), 0.5 / (r - p)],
        ),
        "gm_diff_plus" | "tftn2" => factor_from(pd, |s1, s2| (s1 - s2 + d) / (2.0 * d), [0.5, 0.5 / d, -0.5 / d]),
        "gm_diff_minus" | "tftn" => factor_from(pd, |s1, s2| -(s1 - s2 - d) / (2.0 * d), [0.5, -0.5 / d, 0.5 / d]),
        "gm_s1_above_S" => factor_from(pd, |s1, _| (s1 - s) / d, [-s / d, 1.0 / d, 0.0]),
        "gm_s1_below_T" => factor_from(pd, |s1, _| -(s1 - t) / d, [t / d, -1.0 / d, 0.0]),
        "gm_s2_above_S" => factor_from(pd, |_, s2| (s2 - s) / d, [-s / d, 0.0, 1.0 / d]),
        "gm_s2_below_T" => factor_from(pd, |_, s2| -(s2 - t) / d, [t / d, 0.0, -1.0 / d]),
        other => return Err(ZdError::UnknownBuiltin(other.to_string())),
    })
}

/// Press-Dyson tensor of the named strategy for player 1 at memory `n`.
pub fn builtin(name: &str, pd: &PrisonersDilemmaParams, n: usize) -> Result<PressDysonTensor> {
    Ok(builtin_constructed(name, pd, n)?.tensor)
}

/// Like [`builtin`], also returning the relation the tensor is built to enforce.
pub fn builtin_constructed(name: &str, pd: &PrisonersDilemmaParams, n: usize) -> Result<ConstructedStrategy> {
    let entry = entry(name)?;
    if n == 0 {
        return Err(ZdError::InvalidArgument("memory length must be at least 1".into()));
    }
    let game = GameSpec::prisoners_dilemma(*pd)?;
    let space = game.history_space(n)?;
    let one = game.history_space(1)?;
    match entry.kind {
        EntryKind::FirstFactor => {
            let g1 = first_factor(name, pd)?;
            let base = factorable_zd(
                &game,
                &FactorSpec {
                    player: 1,
                    g1: g1.values,
                    gm: vec![],
                },
            )?;
            Ok(ConstructedStrategy {
                tensor: base.pad(n)?,
                construction: Construction::MemoryOne { alpha: g1.alpha },
            })
        }
        EntryKind::OlderFactor => {
            let g1 = first_factor("g1_tft", pd)?;
            let gm = older_factor(name, pd)?;
            let spec = FactorSpec {
                player: 1,
                g1: g1.values.clone(),
                gm: vec![gm.values.clone(); n - 1],
            };
            let mut factors = vec![g1.values];
            factors.extend(std::iter::repeat_n(gm.values, n - 1));
            let h_family = match name {
                "tftn" | "gm_diff_minus" => Some(HFamily::Tftn),
                "tftn2" | "gm_diff_plus" => Some(HFamily::Tftn2),
                _ => None,
            };
            Ok(ConstructedStrategy {
                tensor: factorable_zd(&game, &spec)?,
                construction: Construction::Factorable { factors, h_family },
            })
        }
        EntryKind::Controlling => {
            let base = builtin("tft", pd, 1)?;
            let target = ActionProfile::new(vec![1, 2]);
            let t = probability_controlling(&base, std::slice::from_ref(&target))?;
            Ok(ConstructedStrategy {
                tensor: t.pad(n)?,
                construction: Construction::ProbabilityControlling { targets: vec![target] },
            })
        }
        EntryKind::Reference => {
            let strat = match name {
                "repeat" => StrategyTensor::repeat(space.clone(), 1)?,
                "allc" => StrategyTensor::deterministic(one.clone(), 1, |_| 1)?,
                "alld" => StrategyTensor::deterministic(one.clone(), 1, |_| 2)?,
                "wsls" => StrategyTensor::deterministic(one.clone(), 1, |h| [1, 2, 2, 1][h])?,
                "anti_tft" => {
                    let sp = one.clone();
                    StrategyTensor::deterministic(one.clone(), 1, move |h| 3 - sp.action_in(sp.newest(h), 2))?
                }
                other => return Err(ZdError::UnknownBuiltin(other.to_string())),
            };
            let construction = if name == "repeat" {
                Construction::Repeat
            } else {
                Construction::Explicit
            };
            Ok(ConstructedStrategy {
                tensor: press_dyson(&strat).pad(n)?,
                construction,
            })
        }
    }
}
