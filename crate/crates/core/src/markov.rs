//! The Markov chain over length-n histories induced by one strategy per
//! player, and its stationary distributions.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, ZdError};
use crate::game::{GameSpec, History, HistorySpace};
use crate::strategy::{pad_memory, StrategyTensor};
use crate::tolerance::{DENSE_LIMIT, SOLVER, STATIONARY_SUM};

/// Transition operator over history indices.
///
/// Row `h` holds, for every profile `p`, the probability `T(p | h)` that `p`
/// is played next; the chain then moves to `space.shift(h, p)`.
#[derive(Debug, Clone)]
pub struct HistoryChain {
    game: GameSpec,
    space: HistorySpace,
    strategies: Vec<StrategyTensor>,
    perturbation: Option<f64>,
    transition: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactClass,
    PowerIteration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    #[serde(skip)]
    space: HistorySpace,
    pub probs: Vec<f64>,
    pub method: Method,
    /// Recurrent class index, for exact solves.
    pub class_id: Option<usize>,
    /// Whether lazy damping `(I + T)/2` was applied.
    pub damped: bool,
    pub iterations: usize,
    /// `||pi - pi T||_inf` against the chain it was computed for.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn new(space: HistorySpace, probs: Vec<f64>, method: Method) -> Result<Self> {
        if probs.len() != space.num_histories() {
            return Err(ZdError::Dimension(format!(
                "expected {} probabilities, got {}",
                space.num_histories(),
                probs.len()
            )));
        }
        Ok(StationaryDistribution {
            space,
            probs,
            method,
            class_id: None,
            damped: false,
            iterations: 0,
            residual: f64::NAN,
        })
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    #[inline]
    pub fn prob(&self, h: usize) -> f64 {
        self.probs[h]
    }

    /// `sum_h pi(h) f(h)`.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(h, p)| p * f(h)).sum()
    }

    pub fn total_variation(&self, other: &StationaryDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Histories with positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&h| self.probs[h] > 0.0).collect()
    }
}

/// Pads every strategy to the longest memory and builds the chain.
pub fn build_chain(game: &GameSpec, strategies: &[StrategyTensor]) -> Result<HistoryChain> {
    build(game, strategies, None)
}

/// Like [`build_chain`] with every strategy mixed with uniform noise at rate
/// `eps`, forcing ergodicity.
pub fn build_chain_perturbed(game: &GameSpec, strategies: &[StrategyTensor], eps: f64) -> Result<HistoryChain> {
    let noisy = strategies.iter().map(|s| s.perturb(eps)).collect::<Result<Vec<_>>>()?;
    build(game, &noisy, Some(eps))
}

fn build(game: &GameSpec, strategies: &[StrategyTensor], perturbation: Option<f64>) -> Result<HistoryChain> {
    if strategies.len() != game.num_players() {
        return Err(ZdError::InvalidArgument(format!(
            "expected {} strategies, got {}",
            game.num_players(),
            strategies.len()
        )));
    }
    for (i, s) in strategies.iter().enumerate() {
        if s.player() != i + 1 {
            return Err(ZdError::InvalidArgument(format!(
                "strategy {} belongs to player {}, expected player {}",
                i,
                s.player(),
                i + 1
            )));
        }
        if s.space().actions_per_player() != game.actions_per_player() {
            return Err(ZdError::InvalidArgument(format!(
                "strategy of player {} was built for a different game",
                i + 1
            )));
        }
    }
    let n = strategies.iter().map(|s| s.memory()).max().unwrap_or(1);
    let space = game.history_space(n)?;
    let strategies = strategies
        .iter()
        .map(|s| pad_memory(s, n))
        .collect::<Result<Vec<_>>>()?;
    let np = space.num_profiles();
    let mut transition = vec![0.0; space.num_histories() * np];
    for h in 0..space.num_histories() {
        for p in 0..np {
            transition[h * np + p] = strategies
                .iter()
                .enumerate()
                .map(|(a, s)| s.prob(h, space.action_in(p, a + 1)))
                .product();
        }
    }
    Ok(HistoryChain {
        game: game.clone(),
        space,
        strategies,
        perturbation,
        transition,
    })
}

impl HistoryChain {
    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn space(&self) -> &HistorySpace {
        &self.space
    }

    pub fn strategies(&self) -> &[StrategyTensor] {
        &self.strategies
    }

    pub fn perturbation(&self) -> Option<f64> {
        self.perturbation
    }

    pub fn num_states(&self) -> usize {
        self.space.num_histories()
    }

    /// `T(profile | h)`.
    #[inline]
    pub fn profile_prob(&self, h: usize, profile: usize) -> f64 {
        self.transition[h * self.space.num_profiles() + profile]
    }

    /// Probability of moving from history `from` to history `to`.
    pub fn transition_prob(&self, from: usize, to: usize) -> f64 {
        let p = self.space.newest(to);
        if self.space.shift(from, p) == to {
            self.profile_prob(from, p)
        } else {
            0.0
        }
    }

    /// Largest deviation of a transition row sum from one.
    pub fn row_sum_error(&self) -> f64 {
        let np = self.space.num_profiles();
        self.transition
            .chunks(np)
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `pi T`.
    pub fn step(&self, dist: &[f64]) -> Vec<f64> {
        let np = self.space.num_profiles();
        let mut out = vec![0.0; dist.len()];
        for (h, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for p in 0..np {
                out[self.space.shift(h, p)] += mass * self.transition[h * np + p];
            }
        }
        out
    }

    /// `||pi - pi T||_inf`.
    pub fn residual(&self, dist: &[f64]) -> f64 {
        self.step(dist)
            .iter()
            .zip(dist)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn support_graph(&self) -> DiGraph<(), ()> {
        let np = self.space.num_profiles();
        let mut g = DiGraph::with_capacity(self.num_states(), self.num_states() * np);
        for _ in 0..self.num_states() {
            g.add_node(());
        }
        for h in 0..self.num_states() {
            for p in 0..np {
                if self.transition[h * np + p] > 0.0 {
                    g.add_edge(NodeIndex::new(h), NodeIndex::new(self.space.shift(h, p)), ());
                }
            }
        }
        g
    }

    /// Closed communicating classes, each sorted, ordered by smallest member.
    pub fn recurrent_classes(&self) -> Vec<Vec<usize>> {
        let graph = self.support_graph();
        let comps = tarjan_scc(&graph);
        let mut comp_of = vec![0usize; self.num_states()];
        for (c, nodes) in comps.iter().enumerate() {
            for n in nodes {
                comp_of[n.index()] = c;
            }
        }
        let np = self.space.num_profiles();
        let mut closed: Vec<Vec<usize>> = comps
            .iter()
            .enumerate()
            .filter(|(c, nodes)| {
                nodes.iter().all(|n| {
                    let h = n.index();
                    (0..np).all(|p| self.transition[h * np + p] == 0.0 || comp_of[self.space.shift(h, p)] == *c)
                })
            })
            .map(|(_, nodes)| {
                let mut v: Vec<usize> = nodes.iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        closed.sort_by_key(|c| c[0]);
        closed
    }

    /// Period of a closed class (gcd of cycle lengths through its members).
    pub fn period(&self, class: &[usize]) -> usize {
        let np = self.space.num_profiles();
        let mut level = vec![usize::MAX; self.num_states()];
        let mut queue = std::collections::VecDeque::new();
        level[class[0]] = 0;
        queue.push_back(class[0]);
        let mut g = 0usize;
        while let Some(h) = queue.pop_front() {
            for p in 0..np {
                if self.transition[h * np + p] == 0.0 {
                    continue;
                }
                let next = self.space.shift(h, p);
                if level[next] == usize::MAX {
                    level[next] = level[h] + 1;
                    queue.push_back(next);
                } else {
                    let diff = (level[h] + 1).abs_diff(level[next]);
                    g = gcd(g, diff);
                }
            }
        }
        g.max(1)
    }

    /// True when some recurrent class has period greater than one.
    pub fn is_periodic(&self) -> bool {
        self.recurrent_classes().iter().any(|c| self.period(c) > 1)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// One stationary distribution per recurrent class; every stationary
/// distribution of the chain is a convex combination of these.
pub fn stationary_exact(chain: &HistoryChain) -> Result<Vec<StationaryDistribution>> {
    let classes = chain.recurrent_classes();
    let mut out = Vec::with_capacity(classes.len());
    for (id, class) in classes.iter().enumerate() {
        let mut dist = if class.len() <= DENSE_LIMIT {
            solve_class_dense(chain, class)?
        } else {
            solve_class_iterative(chain, class)?
        };
        dist.class_id = Some(id);
        dist.residual = chain.residual(&dist.probs);
        if dist.residual > SOLVER {
            return Err(ZdError::Solver(format!(
                "class {id} ({} histories) solved with stationarity residual {:e}",
                class.len(),
                dist.residual
            )));
        }
        out.push(dist);
    }
    Ok(out)
}

fn solve_class_dense(chain: &HistoryChain, class: &[usize]) -> Result<StationaryDistribution> {
    let k = class.len();
    let mut local = vec![usize::MAX; chain.num_states()];
    for (i, &h) in class.iter().enumerate() {
        local[h] = i;
    }
    let np = chain.space.num_profiles();
    // rows: balance equations pi_j = sum_i pi_i T(i -> j); last row: sum pi = 1
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (i, &h) in class.iter().enumerate() {
        a[(i, i)] -= 1.0;
        for p in 0..np {
            let t = chain.transition[h * np + p];
            if t != 0.0 {
                let j = local[chain.space.shift(h, p)];
                a[(j, i)] += t;
            }
        }
    }
    for i in 0..k {
        a[(k - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let lu = a.clone().lu();
    let x = lu.solve(&b).ok_or_else(|| {
        let svd = a.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        ZdError::Solver(format!(
            "singular balance system for a class of {k} histories (singular values {smax:e} .. {smin:e})"
        ))
    })?;
    let mut probs = vec![0.0; chain.num_states()];
    for (i, &h) in class.iter().enumerate() {
        probs[h] = x[i].max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > STATIONARY_SUM * 1e3 {
        return Err(ZdError::Solver(format!("class solution sums to {total}")));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    StationaryDistribution::new(chain.space.clone(), probs, Method::ExactClass)
}

fn solve_class_iterative(chain: &HistoryChain, class: &[usize]) -> Result<StationaryDistribution> {
    let mut init = vec![0.0; chain.num_states()];
    for &h in class {
        init[h] = 1.0 / class.len() as f64;
    }
    let opts = PowerOptions {
        damping: Damping::Always,
        ..PowerOptions::default()
    };
    let mut d = stationary_power(chain, &init, &opts)?;
    d.method = Method::ExactClass;
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Damping {
    /// Damp only when a recurrent class is periodic.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub damping: Damping,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            max_iters: 1_000_000,
            tol: 1e-12,
            damping: Damping::Auto,
        }
    }
}

/// Iterates `pi <- pi T` (or the lazy `pi (I + T)/2`) from `initial` until
/// the sup-norm change drops below `opts.tol`.
pub fn stationary_power(chain: &HistoryChain, initial: &[f64], opts: &PowerOptions) -> Result<StationaryDistribution> {
    if initial.len() != chain.num_states() {
        return Err(ZdError::Dimension(format!(
            "initial distribution has {} entries, chain has {} histories",
            initial.len(),
            chain.num_states()
        )));
    }
    let total: f64 = initial.iter().sum();
    if initial.iter().any(|p| *p < 0.0 || !p.is_finite()) || (total - 1.0).abs() > STATIONARY_SUM {
        return Err(ZdError::InvalidArgument(
            "initial vector is not a probability distribution".into(),
        ));
    }
    let damped = match opts.damping {
        Damping::Always => true,
        Damping::Never => false,
        Damping::Auto => chain.is_periodic(),
    };
    let mut pi = initial.to_vec();
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let mut next = chain.step(&pi);
        if damped {
            next.iter_mut().zip(&pi).for_each(|(n, p)| *n = 0.5 * (*n + p));
        }
        change = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if change < opts.tol {
            let s: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|p| *p /= s);
            let mut d = StationaryDistribution::new(chain.space.clone(), pi, Method::PowerIteration)?;
            d.damped = damped;
            d.iterations = it;
            d.residual = chain.residual(&d.probs);
            return Ok(d);
        }
    }
    Err(ZdError::NonConvergence {
        iterations: opts.max_iters,
        residual: change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub rounds: usize,
    /// Fraction of rounds ending in each history.
    pub empirical: Vec<f64>,
    /// Time-averaged payoff of players 1..=N.
    pub average_payoffs: Vec<f64>,
    /// Profile index played every `thin` rounds (empty when not recorded).
    pub trajectory: Vec<usize>,
    pub thin: Option<usize>,
}

impl SimulationSummary {
    pub fn as_distribution(&self, space: &HistorySpace) -> Result<StationaryDistribution> {
        StationaryDistribution::new(space.clone(), self.empirical.clone(), Method::MonteCarlo)
    }
}

/// Plays the chain for `rounds` rounds from `initial` with a ChaCha8 stream
/// seeded by `seed`. Output is a pure function of the inputs.
pub fn simulate(
    chain: &HistoryChain,
    initial: &History,
    rounds: usize,
    seed: u64,
    thin: Option<usize>,
) -> Result<SimulationSummary> {
    if rounds == 0 {
        return Err(ZdError::InvalidArgument("rounds must be at least 1".into()));
    }
    if thin == Some(0) {
        return Err(ZdError::InvalidArgument("thinning factor must be positive".into()));
    }
    let mut h = chain.space.index(initial)?;
    let np = chain.space.num_profiles();
    let players = chain.game.num_players();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; chain.num_states()];
    let mut payoff_sums = vec![0.0; players];
    let mut trajectory = Vec::with_capacity(thin.map_or(0, |t| rounds / t));
    for round in 1..=rounds {
        let u: f64 = rng.random();
        let row = &chain.transition[h * np..(h + 1) * np];
        let mut acc = 0.0;
        let mut profile = np - 1;
        for (p, &t) in row.iter().enumerate() {
            acc += t;
            if u < acc {
                profile = p;
                break;
            }
        }
        // guard against rounding in the cumulative sum landing on a zero entry
        while row[profile] == 0.0 && profile > 0 {
            profile -= 1;
        }
        h = chain.space.shift(h, profile);
        counts[h] += 1;
        for (a, sum) in payoff_sums.iter_mut().enumerate() {
            *sum += chain.game.payoff_at(a + 1, profile);
        }
        if let Some(t) = thin {
            if round % t == 0 {
                trajectory.push(profile);
            }
        }
    }
    Ok(SimulationSummary {
        seed,
        rounds,
        empirical: counts.iter().map(|&c| c as f64 / rounds as f64).collect(),
        average_payoffs: payoff_sums.iter().map(|s| s / rounds as f64).collect(),
        trajectory,
        thin,
    })
}
