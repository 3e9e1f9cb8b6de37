//! `scbf`: run simulations and numerical checks from a TOML configuration.
//!
//! Exit status: 0 when every check passes, 1 when a property check fails,
//! 2 on usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use scbf::config::{auxiliary_rng, parse_config, RunConfig};
use scbf::diagnostics::{
    delta_scaling_check, energy_ledger, ensemble_energy_balance, galerkin_convergence_study, gronwall_uniqueness_test,
    moment_bound_check, residual_study, verify_suite, Verdict,
};
use scbf::io::{write_jsonl_file, write_ledger_csv, write_snapshot, RunManifest};
use scbf::noise::{certification_corpus, certify_hypotheses};

#[derive(Parser)]
#[command(name = "scbf", version, about = "Stochastic Brinkman-Forchheimer simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration, or a manifest JSON from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles.
    #[arg(long, env = "SCBF_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One path: snapshot and energy ledger.
    Simulate(Common),
    /// Ensemble moment bound and energy balance.
    Ensemble(Common),
    /// Operator and noise property suites.
    Verify(Common),
    /// Step-size and cutoff convergence studies.
    Converge(Common),
    /// Twin runs on shared noise.
    Uniqueness(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::Ensemble(c) => ("ensemble", c),
            Command::Verify(c) => ("verify", c),
            Command::Converge(c) => ("converge", c),
            Command::Uniqueness(c) => ("uniqueness", c),
        }
    }
}

/// Failure that maps to exit status 2.
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn load_config(c: &Common) -> Result<RunConfig, Usage> {
    let mut cfg = match &c.config {
        None => RunConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
            if p.extension().is_some_and(|x| x == "json") {
                let m: RunManifest = serde_json::from_str(&text).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
                m.config
            } else {
                parse_config(&text).map_err(|e| Usage(format!("{}: {e}", p.display())))?
            }
        }
    };
    if let Some(s) = c.seed {
        cfg.run.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Report object tagged with its kind.
fn tagged<T: Serialize>(kind: &str, value: &T) -> Result<Value, Usage> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        map.insert("kind".into(), Value::String(kind.into()));
    }
    Ok(v)
}

struct Outcome {
    files: Vec<&'static str>,
    pass: bool,
    summary: Vec<String>,
}

fn line(pass: bool, what: &str) -> String {
    format!("{} {what}", if pass { "PASS" } else { "FAIL" })
}

fn verdict_line(v: Verdict, what: &str) -> String {
    let tag = match v {
        Verdict::Pass => "PASS",
        Verdict::Inconclusive => "INCONCLUSIVE",
        Verdict::Fail => "FAIL",
    };
    format!("{tag} {what}")
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome, Usage> {
    let sim = cfg.build()?;
    let u0 = cfg.initial_state(sim.basis())?;
    let tr = sim.simulate(&u0, 0)?;
    let ledger = energy_ledger(&sim, &tr)?;
    write_snapshot(&tr, &out.join("trajectory.snap"))?;
    write_ledger_csv(&ledger, &out.join("ledger.csv"))?;
    let pass = tr.completed();
    let last = ledger.terminal();
    Ok(Outcome {
        files: vec!["trajectory.snap", "ledger.csv"],
        pass,
        summary: vec![line(
            pass,
            &format!(
                "simulate: {} outputs, ‖u(T)‖² = {:.6e}, residual = {:.3e}, jumps = {}",
                tr.times.len(),
                last.energy_h2,
                last.residual,
                ledger.jumps
            ),
        )],
    })
}

fn ensemble(cfg: &RunConfig, out: &Path, k1: f64) -> Result<Outcome, Usage> {
    let sim = cfg.build()?;
    let u0 = cfg.initial_state(sim.basis())?;
    let m = cfg.run.ensemble;
    let moments = moment_bound_check(&sim, &u0, m, k1, cfg.tolerances.scheme)?;
    let balance = ensemble_energy_balance(&sim, &u0, m, (m / 10).max(2), cfg.tolerances.std_errors)?;
    write_jsonl_file(
        &out.join("ensemble.jsonl"),
        &[tagged("moment-bound", &moments)?, tagged("energy-balance", &balance)?],
    )?;
    // A violation inside the scheme tolerance is reported, not failed.
    let mpass = moments.verdict != Verdict::Fail;
    Ok(Outcome {
        files: vec!["ensemble.jsonl"],
        pass: mpass && balance.pass,
        summary: vec![
            verdict_line(
                moments.verdict,
                &format!(
                    "moment bound: E sup‖u‖² = {:.4e} ± {:.1e}, combined {:.4e}, bound {:.4e}",
                    moments.sup_energy.mean,
                    moments.sup_energy.ci_high - moments.sup_energy.mean,
                    moments.combined.mean,
                    moments.bound
                ),
            ),
            line(
                balance.pass,
                &format!(
                    "energy balance: mean {:.3e}, SE {:.1e}, bias band {:.1e}",
                    balance.statistic.mean, balance.statistic.std_error, balance.bias_band
                ),
            ),
        ],
    })
}

fn verify(cfg: &RunConfig, out: &Path) -> Result<Outcome, Usage> {
    let reports = verify_suite(cfg, cfg.run.ensemble)?;
    write_jsonl_file(&out.join("verify.jsonl"), &reports)?;
    Ok(Outcome {
        files: vec!["verify.jsonl"],
        pass: reports.iter().all(|r| r.pass),
        summary: reports
            .iter()
            .map(|r| line(r.pass, &format!("{} (worst margin {:.3e})", r.name, r.worst_margin)))
            .collect(),
    })
}

fn converge(cfg: &RunConfig, out: &Path) -> Result<Outcome, Usage> {
    // The step-size study checks the deterministic energy identity.
    let mut quiet = cfg.clone();
    quiet.noise.sigma_amplitude = 0.0;
    quiet.noise.intensity = 0.0;
    let dt = residual_study(&quiet, cfg.run.dt_levels, 0.9)?;
    let n = galerkin_convergence_study(cfg, &cfg.run.cutoffs, 0, 1.0)?;
    write_jsonl_file(
        &out.join("converge.jsonl"),
        &[tagged("dt-residual", &dt)?, tagged("galerkin", &n)?],
    )?;
    Ok(Outcome {
        files: vec!["converge.jsonl"],
        pass: dt.pass && n.pass,
        summary: vec![
            line(dt.pass, &format!("ledger residual slope {:.3}", dt.slope)),
            line(
                n.pass,
                &format!("galerkin differences {:?}, rate {:.3}", n.sup_differences, n.rate),
            ),
        ],
    })
}

fn uniqueness(cfg: &RunConfig, out: &Path) -> Result<Outcome, Usage> {
    cfg.check_uniqueness_regime()?;
    let sim = cfg.build()?;
    let u0 = cfg.initial_state(sim.basis())?;
    let twins = cfg.run.twins;
    let reports = vec![
        gronwall_uniqueness_test(&sim, &u0, 0.0, twins, cfg.tolerances.scheme)?,
        gronwall_uniqueness_test(&sim, &u0, cfg.run.delta, twins, cfg.tolerances.scheme)?,
        delta_scaling_check(&sim, &u0, cfg.run.delta, twins.min(10))?,
    ];
    write_jsonl_file(&out.join("uniqueness.jsonl"), &reports)?;
    Ok(Outcome {
        files: vec!["uniqueness.jsonl"],
        pass: reports.iter().all(|r| r.pass),
        summary: reports
            .iter()
            .map(|r| line(r.pass, &format!("{} δ = {:e}", r.name, r.details["delta"])))
            .collect(),
    })
}

fn run(cmd: &Command) -> Result<bool, Usage> {
    let (name, common) = cmd.parts();
    let cfg = load_config(common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    fs::create_dir_all(&common.out).map_err(|e| Usage(format!("{}: {e}", common.out.display())))?;

    let basis = cfg.basis()?;
    let model = cfg.noise_model(&basis)?;
    let corpus = certification_corpus(&basis, 200, 10.0, &mut auxiliary_rng(cfg.run.seed, 70));
    let cert = certify_hypotheses(&model, &corpus);
    let out = common.out.as_path();
    let outcome = pool.install(|| match cmd {
        Command::Simulate(_) => simulate(&cfg, out),
        Command::Ensemble(_) => ensemble(&cfg, out, cert.constants.k1),
        Command::Verify(_) => verify(&cfg, out),
        Command::Converge(_) => converge(&cfg, out),
        Command::Uniqueness(_) => uniqueness(&cfg, out),
    })?;
    let mut manifest = RunManifest::new(name, &cfg, cert.constants, cert.pass);
    manifest.record_outputs(out, &outcome.files)?;
    manifest.write(&out.join("manifest.json"))?;
    for l in &outcome.summary {
        println!("{l}");
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
