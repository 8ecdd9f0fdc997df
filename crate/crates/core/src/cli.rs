//! Command-line front end. Exit codes: 0 all checks pass, 1 a check failed,
//! 2 configuration or usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::catalog;
use crate::config::{parse_states, ResolvedStrategy, RunConfig, SolveMethod, SCHEMA_VERSION};
use crate::construct::{ConstructedStrategy, Construction};
use crate::error::ZdError;
use crate::game::{GameSpec, History, HistorySpace};
use crate::markov::{
    build_chain, build_chain_perturbed, simulate, stationary_exact, stationary_power, HistoryChain,
    StationaryDistribution,
};
use crate::strategy::{press_dyson, validate_strategy, StrategyTensor};
use crate::tolerance::{DEGENERATE, STATIONARY_SUM};
use crate::verify::{deformed_relation, verify_constructed, RelationReport, StrategyVerification};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "zdmem", version, about = "Memory-n zero-determinant strategy toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "ZDMEM_OUT")]
    pub out: Option<PathBuf>,
    /// Overrides every seed in the task block.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the relation tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Format of the report written to standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check every configured strategy tensor for feasibility.
    Validate,
    /// Solve for all extreme stationary distributions.
    Stationary,
    /// Seeded Monte Carlo play.
    Simulate,
    /// Check the relations each strategy is built to enforce.
    Verify,
    /// List builtin strategies.
    Catalog,
    /// Run the command named in the config's task block.
    Run,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ZdError> for Failure {
    fn from(e: ZdError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn runtime(e: ZdError) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Report written to stdout and to files: a JSON document plus CSV rows.
struct Output {
    json: Value,
    csv_header: Vec<String>,
    csv_rows: Vec<Vec<String>>,
    files: Vec<(String, String)>,
    pass: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => match emit(&cli, &out, stdout) {
            Ok(()) => {
                if out.pass {
                    EXIT_PASS
                } else {
                    EXIT_FAIL
                }
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_USAGE
            }
        },
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_FAIL
        }
    }
}

struct Loaded {
    cfg: RunConfig,
    hash: String,
    game: GameSpec,
    strategies: Vec<ResolvedStrategy>,
}

fn load(cli: &Cli) -> Result<Loaded, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config is required for this command".into()))?;
    let bytes = fs::read(path).map_err(|e| Failure::Usage(format!("reading {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Usage("config is not UTF-8".into()))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.task.seed = seed;
        if let Some(o) = cfg.task.opponents.as_mut() {
            o.seed = seed;
        }
    }
    if let Some(tol) = cli.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
        }
        cfg.task.tol = tol;
    }
    let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let game = cfg.game.build()?;
    let strategies = cfg.resolve(&game)?;
    Ok(Loaded {
        cfg,
        hash,
        game,
        strategies,
    })
}

fn metadata(command: &str, l: &Loaded) -> Value {
    let t = &l.cfg.task;
    let mut seeds = vec![t.seed];
    if let Some(o) = &t.opponents {
        seeds.push(o.seed);
    }
    json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "zdmem",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": l.hash,
        "seeds": seeds,
        "tolerances": {
            "relation": t.tol,
            "h_sweep": t.h_tol,
            "h_derivative": t.fd_tol,
            "degenerate": DEGENERATE,
            "stationary_sum": STATIONARY_SUM,
            "power": t.power.tol,
        },
        "perturbation": t.perturb,
        "perturbed": t.perturb.is_some(),
    })
}

fn execute(cli: &Cli) -> Result<Output, Failure> {
    let command = match cli.command {
        Command::Catalog => return Ok(cmd_catalog()),
        Command::Run => {
            let l = load(cli)?;
            let name = l.cfg.task.command.clone().ok_or_else(|| {
                Failure::Usage("task.command must name validate, stationary, simulate or verify".into())
            })?;
            match name.as_str() {
                "validate" => Command::Validate,
                "stationary" => Command::Stationary,
                "simulate" => Command::Simulate,
                "verify" => Command::Verify,
                "catalog" => return Ok(cmd_catalog()),
                other => return Err(Failure::Usage(format!("unknown task.command {other:?}"))),
            }
        }
        c => c,
    };
    let l = load(cli)?;
    match command {
        Command::Validate => Ok(cmd_validate(&l)),
        Command::Stationary => cmd_stationary(&l),
        Command::Simulate => cmd_simulate(&l),
        Command::Verify => cmd_verify(&l),
        Command::Catalog | Command::Run => unreachable!(),
    }
}

fn emit(cli: &Cli, out: &Output, stdout: &mut dyn Write) -> std::io::Result<()> {
    match cli.format {
        Format::Json => writeln!(
            stdout,
            "{}",
            serde_json::to_string_pretty(&out.json).expect("serializable")
        )?,
        Format::Csv => write!(
            stdout,
            "{}",
            render_csv(out.json.get("metadata"), &out.csv_header, &out.csv_rows)
        )?,
    }
    if let Some(dir) = &cli.out {
        if !out.files.is_empty() {
            write_files(dir, &out.files)?;
        }
    }
    Ok(())
}

fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn render_csv(meta: Option<&Value>, header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    if let Some(Value::Object(m)) = meta {
        for (k, v) in m {
            s.push_str(&format!("# {k}: {v}\n"));
        }
    }
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    s.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    s
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn cmd_catalog() -> Output {
    let entries = catalog::entries();
    let rows = entries
        .iter()
        .map(|e| {
            vec![
                e.name.to_string(),
                serde_json::to_value(e.kind)
                    .expect("enum")
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                e.formula.to_string(),
                e.constraints.to_string(),
            ]
        })
        .collect();
    Output {
        json: json!({ "entries": entries }),
        csv_header: ["name", "kind", "formula", "constraints"].map(String::from).to_vec(),
        csv_rows: rows,
        files: vec![],
        pass: true,
    }
}

fn cmd_validate(l: &Loaded) -> Output {
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for s in &l.strategies {
        let rep = validate_strategy(&s.tensor);
        for v in &rep.violations {
            rows.push(vec![
                s.label.clone(),
                s.tensor.player().to_string(),
                serde_json::to_value(v.kind)
                    .expect("enum")
                    .as_str()
                    .unwrap_or_default()
                    .to_string(),
                v.history.to_string(),
                v.action.map(|a| a.to_string()).unwrap_or_default(),
                v.magnitude.to_string(),
            ]);
        }
        reports.push(json!({
            "label": s.label,
            "player": s.tensor.player(),
            "memory": s.tensor.memory(),
            "valid": rep.is_valid(),
            "violations": rep.violations,
        }));
    }
    let pass = reports.iter().all(|r| r["valid"] == json!(true));
    Output {
        json: json!({ "metadata": metadata("validate", l), "strategies": reports, "pass": pass }),
        csv_header: ["label", "player", "kind", "history", "action", "magnitude"]
            .map(String::from)
            .to_vec(),
        csv_rows: rows,
        files: vec![],
        pass,
    }
}

struct Matchup {
    id: usize,
    opponent_seed: Option<u64>,
    strategies: Vec<ResolvedStrategy>,
}

/// The configured match-up, or one per seeded random opponent in seat 2.
fn matchups(l: &Loaded) -> Result<Vec<Matchup>, Failure> {
    let n = l.game.num_players();
    match &l.cfg.task.opponents {
        None => {
            if l.strategies.len() != n {
                return Err(Failure::Usage(format!(
                    "a match-up needs {n} strategies, config has {}",
                    l.strategies.len()
                )));
            }
            Ok(vec![Matchup {
                id: 0,
                opponent_seed: None,
                strategies: l.strategies.clone(),
            }])
        }
        Some(o) => {
            if n != 2 {
                return Err(Failure::Usage("random opponents need a two-player game".into()));
            }
            let focal: Vec<&ResolvedStrategy> = l.strategies.iter().filter(|s| s.tensor.player() == 1).collect();
            if focal.len() != 1 || l.strategies.len() != 1 {
                return Err(Failure::Usage(
                    "with task.opponents configure exactly one strategy, in seat 1".into(),
                ));
            }
            let space = l.game.history_space(o.memory)?;
            let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
            (0..o.count)
                .map(|k| {
                    let opp = StrategyTensor::random(space.clone(), 2, &mut rng)?;
                    let resolved = ResolvedStrategy {
                        label: format!("random(n={},seed={},k={k})", o.memory, o.seed),
                        constructed: ConstructedStrategy {
                            tensor: press_dyson(&opp),
                            construction: Construction::Explicit,
                        },
                        tensor: opp,
                    };
                    Ok(Matchup {
                        id: k,
                        opponent_seed: Some(o.seed),
                        strategies: vec![focal[0].clone(), resolved],
                    })
                })
                .collect::<Result<_, ZdError>>()
                .map_err(Failure::from)
        }
    }
}

fn chain_for(l: &Loaded, m: &Matchup) -> Result<HistoryChain, Failure> {
    let tensors: Vec<StrategyTensor> = m.strategies.iter().map(|s| s.tensor.clone()).collect();
    Ok(match l.cfg.task.perturb {
        Some(eps) => build_chain_perturbed(&l.game, &tensors, eps)?,
        None => build_chain(&l.game, &tensors)?,
    })
}

fn solve(l: &Loaded, chain: &HistoryChain) -> Result<Vec<StationaryDistribution>, Failure> {
    match l.cfg.task.method {
        SolveMethod::Exact => stationary_exact(chain).map_err(runtime),
        SolveMethod::Power => {
            let n = chain.num_states();
            let uniform = vec![1.0 / n as f64; n];
            Ok(vec![
                stationary_power(chain, &uniform, &l.cfg.task.power.options()).map_err(runtime)?
            ])
        }
    }
}

fn history_header(space: &HistorySpace) -> Vec<String> {
    let mut h = Vec::new();
    for m in 1..=space.memory() {
        for p in 1..=space.num_players() {
            h.push(format!("m{m}_p{p}"));
        }
    }
    h
}

fn history_cells(space: &HistorySpace, h: usize) -> Vec<String> {
    space
        .history(h)
        .states()
        .iter()
        .flat_map(|s| s.actions().iter().map(|a| a.to_string()).collect::<Vec<_>>())
        .collect()
}

fn cmd_stationary(l: &Loaded) -> Result<Output, Failure> {
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut header = vec!["matchup".to_string(), "distribution".to_string()];
    let mut any_damped = false;
    for m in matchups(l)? {
        let chain = chain_for(l, &m)?;
        let space = chain.space().clone();
        if m.id == 0 {
            header.extend(history_header(&space));
            header.push("prob".into());
        }
        let pis = solve(l, &chain)?;
        any_damped |= pis.iter().any(|p| p.damped);
        for (i, pi) in pis.iter().enumerate() {
            for h in 0..space.num_histories() {
                let mut r = vec![m.id.to_string(), i.to_string()];
                r.extend(history_cells(&space, h));
                r.push(pi.prob(h).to_string());
                rows.push(r);
            }
        }
        let classes = chain.recurrent_classes();
        results.push(json!({
            "matchup": m.id,
            "opponent_seed": m.opponent_seed,
            "strategies": m.strategies.iter().map(|s| json!({"label": s.label, "player": s.tensor.player()})).collect::<Vec<_>>(),
            "memory": space.memory(),
            "num_histories": space.num_histories(),
            "diagnostics": {
                "row_sum_error": chain.row_sum_error(),
                "recurrent_classes": classes.len(),
                "periodic": chain.is_periodic(),
                "max_residual": pis.iter().map(|p| p.residual).fold(0.0, f64::max),
            },
            "distributions": pis.iter().map(|p| json!({
                "method": p.method,
                "class_id": p.class_id,
                "damped": p.damped,
                "iterations": p.iterations,
                "residual": p.residual,
                "support": p.support().iter().map(|&h| space.history(h).to_string()).collect::<Vec<_>>(),
                "probs": p.probs,
            })).collect::<Vec<_>>(),
        }));
    }
    let mut meta = metadata("stationary", l);
    meta["method"] = json!(l.cfg.task.method);
    if l.cfg.task.method == SolveMethod::Power {
        meta["damping"] = json!(l.cfg.task.power.damping);
        meta["damped"] = json!(any_damped);
    }
    let doc = json!({ "metadata": meta, "matchups": results });
    let csv_text = render_csv(doc.get("metadata"), &header, &rows);
    Ok(Output {
        files: vec![
            ("stationary.json".into(), pretty(&doc)),
            ("stationary.csv".into(), csv_text),
        ],
        json: doc,
        csv_header: header,
        csv_rows: rows,
        pass: true,
    })
}

fn cmd_simulate(l: &Loaded) -> Result<Output, Failure> {
    let t = &l.cfg.task;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut traj_rows = Vec::new();
    let mut header = vec!["matchup".to_string()];
    for m in matchups(l)? {
        let chain = chain_for(l, &m)?;
        let space = chain.space().clone();
        if m.id == 0 {
            header.extend(history_header(&space));
            header.push("frequency".into());
        }
        let initial = match &t.initial {
            Some(states) => History(parse_states(&l.game, states)?),
            None => space.history(0),
        };
        let sim = simulate(&chain, &initial, t.rounds, t.seed, t.thin).map_err(|e| match e {
            ZdError::InvalidArgument(_) | ZdError::Dimension(_) => Failure::from(e),
            e => runtime(e),
        })?;
        for h in 0..space.num_histories() {
            let mut r = vec![m.id.to_string()];
            r.extend(history_cells(&space, h));
            r.push(sim.empirical[h].to_string());
            rows.push(r);
        }
        if let Some(thin) = sim.thin {
            for (k, &p) in sim.trajectory.iter().enumerate() {
                let mut r = vec![m.id.to_string(), ((k + 1) * thin).to_string()];
                r.extend(space.profile(p).actions().iter().map(|a| a.to_string()));
                traj_rows.push(r);
            }
        }
        results.push(json!({
            "matchup": m.id,
            "opponent_seed": m.opponent_seed,
            "initial": initial.to_string(),
            "summary": sim,
        }));
    }
    let doc = json!({ "metadata": metadata("simulate", l), "matchups": results });
    let mut files = vec![
        ("simulation.json".into(), pretty(&doc)),
        ("empirical.csv".into(), render_csv(doc.get("metadata"), &header, &rows)),
    ];
    if t.thin.is_some() {
        let mut th = vec!["matchup".to_string(), "round".to_string()];
        th.extend((1..=l.game.num_players()).map(|p| format!("p{p}")));
        files.push((
            "trajectory.csv".into(),
            render_csv(doc.get("metadata"), &th, &traj_rows),
        ));
    }
    Ok(Output {
        files,
        json: doc,
        csv_header: header,
        csv_rows: rows,
        pass: true,
    })
}

fn report_rows(matchup: usize, label: &str, r: &RelationReport, rows: &mut Vec<Vec<String>>) {
    for e in &r.entries {
        rows.push(vec![
            matchup.to_string(),
            label.to_string(),
            r.player.map(|p| p.to_string()).unwrap_or_default(),
            r.relation.clone(),
            String::new(),
            e.distribution.to_string(),
            serde_json::to_value(e.branch)
                .expect("enum")
                .as_str()
                .unwrap_or_default()
                .to_string(),
            e.residual.to_string(),
            r.tolerance.to_string(),
            e.pass.to_string(),
        ]);
    }
}

fn verification_rows(matchup: usize, label: &str, v: &StrategyVerification, rows: &mut Vec<Vec<String>>) {
    for r in &v.relations {
        report_rows(matchup, label, r, rows);
    }
    let player = v
        .relations
        .first()
        .and_then(|r| r.player)
        .map(|p| p.to_string())
        .unwrap_or_default();
    let fmt_h = |h: &[f64]| h.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    if let Some(s) = &v.h_sweep {
        for p in &s.points {
            rows.push(vec![
                matchup.to_string(),
                label.to_string(),
                player.clone(),
                "h_sweep".into(),
                fmt_h(&p.h),
                String::new(),
                "relation".into(),
                p.residual.to_string(),
                s.tolerance.to_string(),
                p.pass.to_string(),
            ]);
        }
    }
    for d in &v.h_derivatives {
        rows.push(vec![
            matchup.to_string(),
            label.to_string(),
            player.clone(),
            format!("h_derivative_{}", d.coordinate + 1),
            fmt_h(&d.h),
            String::new(),
            "relation".into(),
            d.value.to_string(),
            String::new(),
            d.pass.to_string(),
        ]);
    }
}

fn cmd_verify(l: &Loaded) -> Result<Output, Failure> {
    let opts = l.cfg.task.verify_options();
    let pd = l.cfg.pd();
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut pass = true;
    for m in matchups(l)? {
        let chain = chain_for(l, &m)?;
        let pis = solve(l, &chain)?;
        let mut strategies = Vec::new();
        for s in &m.strategies {
            let v = verify_constructed(&l.game, pd.as_ref(), &s.constructed, &pis, &opts).map_err(|e| match e {
                ZdError::Range(_) | ZdError::Dimension(_) | ZdError::InvalidArgument(_) => Failure::from(e),
                e => runtime(e),
            })?;
            pass &= v.pass;
            verification_rows(m.id, &s.label, &v, &mut rows);
            strategies.push(json!({ "label": s.label, "player": s.tensor.player(), "verification": v }));
        }
        let mut deformed = Vec::new();
        for slots in &l.cfg.task.deformed {
            let r = deformed_relation(&l.game, slots, &pis, opts.tol)?;
            pass &= r.pass;
            report_rows(m.id, "deformed", &r, &mut rows);
            deformed.push(r);
        }
        results.push(json!({
            "matchup": m.id,
            "opponent_seed": m.opponent_seed,
            "distributions": pis.len(),
            "strategies": strategies,
            "deformed": deformed,
        }));
    }
    let doc = json!({ "metadata": metadata("verify", l), "matchups": results, "pass": pass });
    let header: Vec<String> = [
        "matchup",
        "label",
        "player",
        "relation",
        "h",
        "distribution",
        "branch",
        "residual",
        "tolerance",
        "pass",
    ]
    .map(String::from)
    .to_vec();
    let csv_text = render_csv(doc.get("metadata"), &header, &rows);
    Ok(Output {
        files: vec![("verify.json".into(), pretty(&doc)), ("residuals.csv".into(), csv_text)],
        json: doc,
        csv_header: header,
        csv_rows: rows,
        pass,
    })
}
