//! Independent reference computations for integration tests. These work on
//! raw probability tables with their own index arithmetic and do not call
//! the library's chain, tensor or relation code.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zdmem::{GameSpec, PrisonersDilemmaParams, StationaryDistribution, StrategyTensor};

pub fn pd() -> PrisonersDilemmaParams {
    PrisonersDilemmaParams::new(3.0, 0.0, 5.0, 1.0).unwrap()
}

pub fn game() -> GameSpec {
    GameSpec::prisoners_dilemma(pd()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_strategy(n: usize, player: usize, seed: u64) -> StrategyTensor {
    StrategyTensor::random(game().history_space(n).unwrap(), player, &mut rng(seed)).unwrap()
}

/// Two-player two-action histories: index `sum_m p_m 4^(n-m)`, newest most
/// significant, profile `p = 2 (a1 - 1) + (a2 - 1)`.
pub struct Pd2 {
    pub n: usize,
}

impl Pd2 {
    pub fn states(&self) -> usize {
        4usize.pow(self.n as u32)
    }

    /// Profile index of the `m`-th newest state (1-based).
    pub fn slot(&self, h: usize, m: usize) -> usize {
        (h / 4usize.pow((self.n - m) as u32)) % 4
    }

    pub fn next(&self, h: usize, p: usize) -> usize {
        p * 4usize.pow((self.n - 1) as u32) + h / 4
    }

    pub fn actions(p: usize) -> (usize, usize) {
        (p / 2 + 1, p % 2 + 1)
    }

    pub fn s1(pd: &PrisonersDilemmaParams, p: usize) -> f64 {
        [pd.r, pd.s, pd.t, pd.p][p]
    }

    pub fn s2(pd: &PrisonersDilemmaParams, p: usize) -> f64 {
        [pd.r, pd.t, pd.s, pd.p][p]
    }
}

/// Probability that player `player` plays `action` at history `h` (of
/// memory `n`), reading the tensor's row for the truncated history.
pub fn play_prob(s: &StrategyTensor, n: usize, h: usize, action: usize) -> f64 {
    let k = s.memory();
    let row = h / 4usize.pow((n - k) as u32);
    s.probs()[row * 2 + action - 1]
}

/// `max_h |(pi P)(h) - pi(h)|` for the two-player chain built from raw tables.
pub fn stationarity_residual(s1: &StrategyTensor, s2: &StrategyTensor, pi: &[f64]) -> f64 {
    let n = s1.memory().max(s2.memory());
    let sp = Pd2 { n };
    let mut next = vec![0.0; sp.states()];
    for (h, &mass) in pi.iter().enumerate() {
        for p in 0..4 {
            let (a1, a2) = Pd2::actions(p);
            next[sp.next(h, p)] += mass * play_prob(s1, n, h, a1) * play_prob(s2, n, h, a2);
        }
    }
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// `sum_h pi(h) (T(a | h) - [a == own previous action])`.
pub fn akin_oracle(s: &StrategyTensor, pi: &[f64], action: usize) -> f64 {
    let mem = (pi.len() as f64).log(4.0).round() as usize;
    let sp = Pd2 { n: mem };
    pi.iter()
        .enumerate()
        .map(|(h, &mass)| {
            let (a1, a2) = Pd2::actions(sp.slot(h, 1));
            let own = if s.player() == 1 { a1 } else { a2 };
            mass * (play_prob(s, mem, h, action) - if own == action { 1.0 } else { 0.0 })
        })
        .sum()
}

/// `sum_h pi(h) f(h)` with `f` given raw history index and memory.
pub fn expect(pi: &StationaryDistribution, f: impl Fn(&Pd2, usize) -> f64) -> f64 {
    let mem = pi.space().memory();
    let sp = Pd2 { n: mem };
    pi.probs.iter().enumerate().map(|(h, &m)| m * f(&sp, h)).sum()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Writes a criterion line to the real stderr, bypassing test capture.
pub fn report(id: usize, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!(
        "acceptance criterion {id:>2} [{}] {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}
