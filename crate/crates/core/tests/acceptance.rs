//! Acceptance criteria. Each test prints one PASS/FAIL line to stderr.
//!
//! Game: prisoner's dilemma with T = 5, R = 3, P = 1, S = 0.

mod common;

use common::*;
use rand::Rng;
use zdmem::catalog::{builtin, builtin_constructed, entries, EntryKind};
use zdmem::construct::{
    biased_zd, conditional_zd, probability_controlling, recognize_zd, BiasWeights, Construction, HFamily, ZdClass,
};
use zdmem::markov::{build_chain, build_chain_perturbed, simulate, stationary_power, PowerOptions};
use zdmem::strategy::{from_press_dyson, press_dyson};
use zdmem::verify::{
    akin_residual, biased_relation, conditional_relation, correlation_relation, h_grid, h_sweep, memory_one_relation,
    probability_zero, verify_constructed, Branch, PayoffObservable, PayoffTerm, VerifyOptions,
};
use zdmem::{stationary_exact, ActionProfile, History, StationaryDistribution, StrategyTensor};

const REL_TOL: f64 = 1e-9;
const MASS_TOL: f64 = 1e-12;
const H_TOL: f64 = 1e-8;
const FD_TOL: f64 = 1e-6;

fn solve(s1: &StrategyTensor, s2: &StrategyTensor) -> Vec<StationaryDistribution> {
    let chain = build_chain(&game(), &[s1.clone(), s2.clone()]).unwrap();
    let pis = stationary_exact(&chain).unwrap();
    for pi in &pis {
        assert!(
            stationarity_residual(s1, s2, &pi.probs) <= 1e-12,
            "solver returned a non-stationary vector"
        );
    }
    pis
}

fn tft_base() -> zdmem::PressDysonTensor {
    builtin("tft", &pd(), 1).unwrap()
}

#[test]
fn c01_akin_universality() {
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut count = 0;
    for i in 0..200u64 {
        let n1 = 1 + (i % 3) as usize;
        let n2 = 1 + ((i / 3) % 3) as usize;
        let s1 = random_strategy(n1, 1, 2 * i);
        let s2 = random_strategy(n2, 2, 2 * i + 1);
        for pi in solve(&s1, &s2) {
            count += 1;
            for s in [&s1, &s2] {
                let r = akin_residual(&press_dyson(s), &pi).unwrap();
                worst = r.iter().fold(worst, |w, v| w.max(v.abs()));
                for a in 1..=2 {
                    worst_oracle = worst_oracle.max(akin_oracle(s, &pi.probs, a).abs());
                }
            }
        }
    }
    let pass = worst <= REL_TOL && worst_oracle <= REL_TOL;
    report(
        1,
        "akin universality",
        pass,
        &format!("{count} distributions, max residual {worst:.3e}, oracle {worst_oracle:.3e}"),
    );
    assert!(pass);
}

type Oracle = fn(&StationaryDistribution) -> f64;

#[test]
fn c02_memory_one_zd() {
    let p = pd();
    let oracles: [(&str, Oracle); 4] = [
        ("g1_equalizer_P", |pi| {
            expect(pi, |sp, h| Pd2::s2(&pd(), sp.slot(h, 1))) - pd().p
        }),
        ("g1_equalizer_R", |pi| {
            expect(pi, |sp, h| Pd2::s2(&pd(), sp.slot(h, 1))) - pd().r
        }),
        ("g1_tft", |pi| {
            expect(pi, |sp, h| {
                Pd2::s1(&pd(), sp.slot(h, 1)) - Pd2::s2(&pd(), sp.slot(h, 1))
            })
        }),
        ("g1_mutual_B", |pi| {
            expect(pi, |sp, h| {
                Pd2::s1(&pd(), sp.slot(h, 1)) + Pd2::s2(&pd(), sp.slot(h, 1))
            }) - (pd().t + pd().s)
        }),
    ];
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for (k, (name, oracle)) in oracles.iter().enumerate() {
        let cs = builtin_constructed(name, &p, 1).unwrap();
        let Construction::MemoryOne { alpha } = &cs.construction else {
            panic!("{name} is not memory-one")
        };
        let focal = from_press_dyson(&cs.tensor).unwrap();
        for j in 0..100u64 {
            let opp = random_strategy(1, 2, 1000 * (k as u64 + 1) + j);
            let pis = solve(&focal, &opp);
            let rep = memory_one_relation(&game(), alpha, &pis, REL_TOL).unwrap();
            worst = worst.max(rep.max_residual());
            for pi in &pis {
                worst_oracle = worst_oracle.max(oracle(pi).abs());
            }
        }
    }
    let pass = worst <= REL_TOL && worst_oracle <= REL_TOL;
    report(
        2,
        "memory-one ZD relations (incl. <s2> = P)",
        pass,
        &format!("400 match-ups, max residual {worst:.3e}, oracle {worst_oracle:.3e}"),
    );
    assert!(pass);
}

#[test]
fn c03_probability_controlling() {
    let mut r = rng(303);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for i in 0..20u64 {
        let n = 1 + (i % 3) as usize;
        let base = press_dyson(&random_strategy(1, 1, 3000 + i));
        let targets: Vec<ActionProfile> = (0..n)
            .map(|_| ActionProfile::new(vec![r.random_range(1..=2), r.random_range(1..=2)]))
            .collect();
        let target_index: usize = targets
            .iter()
            .enumerate()
            .map(|(m, t)| {
                let a = t.actions();
                (2 * (a[0] - 1) + (a[1] - 1)) * 4usize.pow((n - 1 - m) as u32)
            })
            .sum();
        let focal = from_press_dyson(&probability_controlling(&base, &targets).unwrap()).unwrap();
        for j in 0..20u64 {
            let opp = random_strategy(n, 2, 30_000 + 100 * i + j);
            let pis = solve(&focal, &opp);
            let rep = probability_zero(&game(), &targets, &pis).unwrap();
            assert!(rep.pass);
            for pi in &pis {
                cases += 1;
                worst = worst.max(pi.probs[target_index]);
            }
        }
    }
    let pass = worst <= MASS_TOL;
    report(
        3,
        "probability-controlling strategies",
        pass,
        &format!("{cases} distributions, max targeted mass {worst:.3e}"),
    );
    assert!(pass);
}

fn random_weights(i: usize, r: &mut impl Rng) -> BiasWeights {
    let space = game().history_space(2).unwrap();
    if i < 40 {
        let k: Vec<f64> = (0..16).map(|_| -3.0 * r.random::<f64>()).collect();
        return BiasWeights::from_log_weights(space, &k).unwrap();
    }
    let mut w: Vec<f64> = if i < 45 {
        let keep = r.random_range(0..16);
        (0..16).map(|h| if h == keep { 1.0 } else { 0.0 }).collect()
    } else {
        (0..16)
            .map(|_| if r.random::<bool>() { r.random::<f64>() } else { 0.0 })
            .collect()
    };
    if w.iter().all(|x| *x == 0.0) {
        w[r.random_range(0..16)] = 1.0;
    }
    let max = w.iter().cloned().fold(0.0, f64::max);
    w.iter_mut().for_each(|x| *x /= max);
    BiasWeights::new(space, w).unwrap()
}

#[test]
fn c04_biased_dichotomy() {
    let mut r = rng(404);
    let alpha = [0.0, 1.0, -1.0];
    let (mut relation_cases, mut degenerate_cases, mut bad) = (0, 0, 0);
    let mut worst_rel = 0.0f64;
    let mut worst_mass = 0.0f64;
    for i in 0..50 {
        let w = random_weights(i, &mut r);
        let focal = from_press_dyson(&biased_zd(&tft_base(), &w).unwrap()).unwrap();
        for j in 0..5u64 {
            let opp = random_strategy(2, 2, 40_000 + 10 * i as u64 + j);
            let pis = solve(&focal, &opp);
            let rep = biased_relation(&game(), &alpha, &w, &pis, REL_TOL).unwrap();
            for (pi, e) in pis.iter().zip(&rep.entries) {
                let d = expect(pi, |_, h| w.weights()[h]);
                let relation_ok = d >= MASS_TOL && {
                    let v = expect(pi, |sp, h| {
                        w.weights()[h] * (Pd2::s1(&pd(), sp.slot(h, 1)) - Pd2::s2(&pd(), sp.slot(h, 1)))
                    }) / d;
                    worst_rel = worst_rel.max(v.abs());
                    v.abs() <= REL_TOL
                };
                let degenerate_ok = d < MASS_TOL && {
                    let m = (0..16)
                        .filter(|&h| w.weights()[h] > 0.0)
                        .map(|h| pi.probs[h])
                        .fold(0.0, f64::max);
                    worst_mass = worst_mass.max(m);
                    m <= MASS_TOL
                };
                let expected_branch = if d >= MASS_TOL {
                    Branch::Relation
                } else {
                    Branch::Degenerate
                };
                if relation_ok ^ degenerate_ok && e.pass && e.branch == expected_branch {
                    if relation_ok {
                        relation_cases += 1;
                    } else {
                        degenerate_cases += 1;
                    }
                } else {
                    bad += 1;
                }
            }
        }
    }
    let pass = bad == 0;
    report(
        4,
        "biased-ensemble dichotomy",
        pass,
        &format!(
            "{relation_cases} relation / {degenerate_cases} degenerate / {bad} failing; \
             max residual {worst_rel:.3e}, max support mass {worst_mass:.3e}"
        ),
    );
    assert!(pass);
}

#[test]
fn c05_conditional_zd() {
    let (mut relation_cases, mut degenerate_cases, mut bad) = (0, 0, 0);
    let mut worst = 0.0f64;
    for c in 0..4usize {
        let (a1, a2) = Pd2::actions(c);
        let condition = vec![ActionProfile::new(vec![a1, a2])];
        let focal = from_press_dyson(&conditional_zd(&tft_base(), &condition).unwrap()).unwrap();
        for j in 0..50u64 {
            let opp = random_strategy(2, 2, 50_000 + 100 * c as u64 + j);
            let pis = solve(&focal, &opp);
            let rep = conditional_relation(&game(), &[0.0, 1.0, -1.0], &condition, &pis, REL_TOL).unwrap();
            for (pi, e) in pis.iter().zip(&rep.entries) {
                let marginal = expect(pi, |sp, h| if sp.slot(h, 2) == c { 1.0 } else { 0.0 });
                let ok = if marginal >= MASS_TOL {
                    let v = expect(pi, |sp, h| {
                        if sp.slot(h, 2) == c {
                            Pd2::s1(&pd(), sp.slot(h, 1)) - Pd2::s2(&pd(), sp.slot(h, 1))
                        } else {
                            0.0
                        }
                    }) / marginal;
                    worst = worst.max(v.abs());
                    relation_cases += 1;
                    v.abs() <= REL_TOL && e.branch == Branch::Relation
                } else {
                    degenerate_cases += 1;
                    (0..16).filter(|h| h % 4 == c).all(|h| pi.probs[h] <= MASS_TOL) && e.branch == Branch::Degenerate
                };
                if !(ok && e.pass) {
                    bad += 1;
                }
            }
        }
    }
    let pass = bad == 0;
    report(
        5,
        "conditional ZD",
        pass,
        &format!(
            "{relation_cases} relation / {degenerate_cases} marginal-zero / {bad} failing; max residual {worst:.3e}"
        ),
    );
    assert!(pass);
}

/// `<(s1 - s2)(newest) prod_m (+-(s1 - s2) + T - S)(older)>` scaled to unit factors.
fn tftn_oracle(pi: &StationaryDistribution, family: HFamily) -> f64 {
    let p = pd();
    let d = p.t - p.s;
    let n = pi.space().memory();
    let sign = if family == HFamily::Tftn { -1.0 } else { 1.0 };
    expect(pi, |sp, h| {
        let diff = |m: usize| Pd2::s1(&p, sp.slot(h, m)) - Pd2::s2(&p, sp.slot(h, m));
        (2..=n).fold(diff(1), |acc, m| acc * (sign * diff(m) + d))
    }) / (d * (2.0 * d).powi(n as i32 - 1))
}

fn families() -> [(&'static str, HFamily); 2] {
    [("tftn", HFamily::Tftn), ("tftn2", HFamily::Tftn2)]
}

#[test]
fn c06_memory_n_tft_variants() {
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut reduces = true;
    for (name, family) in families() {
        let at_one = builtin(name, &pd(), 1).unwrap();
        reduces &= at_one.values() == tft_base().values();
        for n in [2usize, 3] {
            let cs = builtin_constructed(name, &pd(), n).unwrap();
            let Construction::Factorable { factors, .. } = &cs.construction else {
                panic!()
            };
            let focal = from_press_dyson(&cs.tensor).unwrap();
            for j in 0..50u64 {
                let opp = random_strategy(n, 2, 60_000 + 1000 * n as u64 + j);
                let pis = solve(&focal, &opp);
                let rep = correlation_relation(&game(), factors, &pis, REL_TOL).unwrap();
                worst = worst.max(rep.max_residual());
                for pi in &pis {
                    worst_oracle = worst_oracle.max(tftn_oracle(pi, family).abs());
                }
            }
        }
    }
    let pass = worst <= REL_TOL && worst_oracle <= REL_TOL && reduces;
    report(
        6,
        "memory-n TFT variants",
        pass,
        &format!("200 match-ups, max residual {worst:.3e}, oracle {worst_oracle:.3e}, n=1 reduces to TFT: {reduces}"),
    );
    assert!(pass);
}

/// Normalized exponential factor product, with linear limits at `h_m = 0`.
fn h_oracle(pi: &StationaryDistribution, family: HFamily, h: &[f64]) -> f64 {
    let p = pd();
    let (t, s) = (p.t, p.s);
    expect(pi, |sp, x| {
        let mut prod = 1.0;
        for (m, &hm) in h.iter().enumerate() {
            let prof = sp.slot(x, m + 1);
            let (u, v) = (Pd2::s1(&p, prof), Pd2::s2(&p, prof));
            let (a, b) = if m == 0 || family == HFamily::Tftn2 {
                (u, v)
            } else {
                (v, u)
            };
            prod *= match (m, hm == 0.0) {
                (0, true) => (a - b) / (t - s),
                (0, false) => ((hm * a).exp() - (hm * b).exp()) / ((hm * t).exp() - (hm * s).exp()),
                (_, true) => (a - b + t - s) / (2.0 * (t - s)),
                (_, false) => {
                    let delta = (hm * t).exp() - (hm * s).exp();
                    ((hm * a).exp() - (hm * b).exp() + delta) / (2.0 * delta)
                }
            };
        }
        prod
    })
}

#[test]
fn c07_h_sweeps() {
    let values = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let opts = VerifyOptions {
        h_values: values.to_vec(),
        ..VerifyOptions::default()
    };
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut points = 0;
    let mut derivatives = 0;
    for (name, family) in families() {
        for n in [2usize, 3] {
            let cs = builtin_constructed(name, &pd(), n).unwrap();
            let focal = from_press_dyson(&cs.tensor).unwrap();
            let grid = h_grid(&values, n);
            for j in 0..50u64 {
                let opp = random_strategy(n, 2, 60_000 + 1000 * n as u64 + j);
                // one stationary solve per match-up feeds every grid point
                let pis = solve(&focal, &opp);
                let before = pis.clone();
                let sweep = h_sweep(&pd(), family, &grid, &pis, H_TOL).unwrap();
                for (pt, h) in sweep.points.iter().zip(&grid) {
                    points += 1;
                    worst = worst.max(pt.residual);
                    for pi in &pis {
                        worst_oracle = worst_oracle.max(h_oracle(pi, family, h).abs());
                    }
                }
                let v = verify_constructed(&game(), Some(&pd()), &cs, &pis, &opts).unwrap();
                for d in &v.h_derivatives {
                    derivatives += 1;
                    worst_fd = worst_fd.max(d.value);
                }
                assert_eq!(before, pis);
            }
        }
    }
    let pass = worst <= H_TOL && worst_oracle <= H_TOL && worst_fd <= FD_TOL;
    report(
        7,
        "exponential-payoff h-sweeps",
        pass,
        &format!(
            "{points} grid points, max residual {worst:.3e}, oracle {worst_oracle:.3e}; \
             {derivatives} derivatives, max {worst_fd:.3e}"
        ),
    );
    assert!(pass);
}

#[test]
fn c08_deformed_identities() {
    let p = pd();
    let (t, s) = (p.t, p.s);
    let g = game();
    let mut worst = 0.0f64;
    for k in 1..=5u32 {
        let kf = k as i32;
        let scale = t.powi(kf) - s.powi(kf);
        let first = PayoffObservable::power_difference(k).table(&g).unwrap();
        let second = PayoffObservable(vec![
            PayoffTerm::Monomial {
                coeff: 1.0,
                exponents: vec![0, k],
            },
            PayoffTerm::Monomial {
                coeff: -1.0,
                exponents: vec![k, 0],
            },
            PayoffTerm::Monomial {
                coeff: scale,
                exponents: vec![0, 0],
            },
        ])
        .table(&g)
        .unwrap();
        for prof in 0..4 {
            let (u, v) = (Pd2::s1(&p, prof), Pd2::s2(&p, prof));
            worst = worst.max((first[prof] / scale - (u - v) / (t - s)).abs());
            worst = worst.max((second[prof] / (2.0 * scale) - (v - u + t - s) / (2.0 * (t - s))).abs());
        }
    }
    for h in [-1.0, -0.5, 0.5, 1.0] {
        let scale = (h * t).exp() - (h * s).exp();
        let first = PayoffObservable::exp_difference(h).table(&g).unwrap();
        let second = PayoffObservable(vec![
            PayoffTerm::Exponential {
                coeff: 1.0,
                rates: vec![0.0, h],
            },
            PayoffTerm::Exponential {
                coeff: -1.0,
                rates: vec![h, 0.0],
            },
            PayoffTerm::Monomial {
                coeff: scale,
                exponents: vec![0, 0],
            },
        ])
        .table(&g)
        .unwrap();
        for prof in 0..4 {
            let (u, v) = (Pd2::s1(&p, prof), Pd2::s2(&p, prof));
            worst = worst.max((first[prof] / scale - (u - v) / (t - s)).abs());
            worst = worst.max((second[prof] / (2.0 * scale) - (v - u + t - s) / (2.0 * (t - s))).abs());
        }
    }
    let pass = worst <= 1e-12;
    report(
        8,
        "deformed factor identities",
        pass,
        &format!("max pointwise gap {worst:.3e}"),
    );
    assert!(pass);
}

#[test]
fn c09_solver_cross_validation() {
    let rounds = 1_000_000usize;
    let mut worst_power = 0.0f64;
    let mut worst_mc_ratio = 0.0f64;
    for i in 0..50u64 {
        let n1 = 1 + (i % 3) as usize;
        let n2 = 1 + ((i / 3) % 3) as usize;
        let s1 = random_strategy(n1, 1, 90_000 + 2 * i);
        let s2 = random_strategy(n2, 2, 90_001 + 2 * i);
        let chain = build_chain_perturbed(&game(), &[s1, s2], 1e-6).unwrap();
        let exact = stationary_exact(&chain).unwrap();
        assert_eq!(exact.len(), 1, "perturbed chain must be ergodic");
        let states = chain.num_states();
        let power = stationary_power(&chain, &vec![1.0 / states as f64; states], &PowerOptions::default()).unwrap();
        worst_power = worst_power.max(total_variation(&exact[0].probs, &power.probs));
        let start = History(vec![ActionProfile::new(vec![1, 1]); chain.space().memory()]);
        let sim = simulate(&chain, &start, rounds, 7_000 + i, None).unwrap();
        let bound = 5.0 * (states as f64 / rounds as f64).sqrt();
        worst_mc_ratio = worst_mc_ratio.max(total_variation(&exact[0].probs, &sim.empirical) / bound);
    }
    let pass = worst_power <= 1e-8 && worst_mc_ratio <= 1.0;
    report(
        9,
        "solver cross-validation",
        pass,
        &format!("50 chains, exact vs power TV {worst_power:.3e}, Monte Carlo TV / bound {worst_mc_ratio:.3}"),
    );
    assert!(pass);
}

/// `|det [Tdot_1, 1, s1, s2]|`; zero exactly for memory-one ZD tensors.
fn zd_determinant(tdot1: &[f64]) -> f64 {
    let p = pd();
    let m: Vec<[f64; 4]> = (0..4)
        .map(|r| [tdot1[r], 1.0, Pd2::s1(&p, r), Pd2::s2(&p, r)])
        .collect();
    let det3 = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    (0..4)
        .map(|c| {
            let minor = |r: usize| {
                let cols: Vec<usize> = (0..4).filter(|&k| k != c).collect();
                [m[r][cols[0]], m[r][cols[1]], m[r][cols[2]]]
            };
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][c] * det3([minor(1), minor(2), minor(3)])
        })
        .sum::<f64>()
        .abs()
}

#[test]
fn c10_recognition() {
    let g = game();
    let mut worst_zd = 0.0f64;
    let mut worst_alpha = 0.0f64;
    let mut zd_count = 0;
    let mut classified = true;
    let zd_names: Vec<&str> = entries()
        .iter()
        .filter(|e| e.kind == EntryKind::FirstFactor || e.name == "tftn" || e.name == "tftn2")
        .map(|e| e.name)
        .collect();
    for name in &zd_names {
        let cs = builtin_constructed(name, &pd(), 1).unwrap();
        let rec = recognize_zd(&g, &cs.tensor).unwrap();
        zd_count += 1;
        classified &= rec.class == ZdClass::Zd;
        worst_zd = worst_zd.max(rec.residual);
        let scaled: Vec<f64> = rec.alpha.iter().map(|a| a / (rec.c[0] - rec.c[1])).collect();
        let first = cs.tensor.first_action();
        for (prof, value) in first.iter().enumerate() {
            let fit = scaled[0] + scaled[1] * Pd2::s1(&pd(), prof) + scaled[2] * Pd2::s2(&pd(), prof);
            worst_alpha = worst_alpha.max((fit - value).abs());
        }
        assert!(zd_determinant(&first) < 1e-12, "{name}");
    }
    let repeat = recognize_zd(&g, &builtin("repeat", &pd(), 1).unwrap()).unwrap();
    classified &= repeat.class == ZdClass::TrivialZd;

    let mut min_non_zd = f64::INFINITY;
    let wsls = recognize_zd(&g, &builtin("wsls", &pd(), 1).unwrap()).unwrap();
    classified &= wsls.class == ZdClass::NotZd;
    min_non_zd = min_non_zd.min(wsls.residual);
    for j in 0..50u64 {
        let t = press_dyson(&random_strategy(1, 1, 100_000 + j));
        assert!(
            zd_determinant(&t.first_action()) > 1e-6,
            "random tensor {j} is numerically ZD"
        );
        let rec = recognize_zd(&g, &t).unwrap();
        classified &= rec.class == ZdClass::NotZd;
        min_non_zd = min_non_zd.min(rec.residual);
    }
    let pass = classified && worst_zd <= REL_TOL && worst_alpha <= REL_TOL && min_non_zd > 1e-4;
    report(
        10,
        "ZD recognition",
        pass,
        &format!(
            "{zd_count} catalog ZD tensors max residual {worst_zd:.3e} (coefficient fit {worst_alpha:.3e}); \
             WSLS + 50 random min residual {min_non_zd:.3e}"
        ),
    );
    assert!(pass);
}
