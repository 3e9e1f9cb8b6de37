//! Acceptance battery. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any criterion fails. Sizes and tolerances are fixed
//! here; the library checks carry their own declared tolerances.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use scbf::config::{auxiliary_rng, parse_config, RunConfig};
use scbf::diagnostics::{
    check_monotonicity, delta_scaling_check, ensemble_energy_balance, galerkin_convergence_study,
    gronwall_uniqueness_test, inner_product_suite, moment_bound_check, noise_statistics, operator_identity_suite,
    residual_study, stationary_variance_check, PropertyReport, Verdict, EXPONENTS,
};
use scbf::io::{decode_snapshot, encode_snapshot, trajectories_bitwise_eq, RunManifest};
use scbf::noise::{certification_corpus, certify_hypotheses};
use scbf::operators::{Dealias, OperatorConfig, Operators};

const SEED: u64 = 20_240_611;
const IDENTITY_TRIPLES: usize = 10_000;
const INNER_PRODUCT_SAMPLES: usize = 2_000;
const MONOTONICITY_PAIRS: usize = 10_000;
const NOISE_PATHS: usize = 10_000;
const BALANCE_PATHS: usize = 10_000;
const BALANCE_CONTROLS: usize = 1_000;
const STATIONARY_PATHS: usize = 10_000;
const MOMENT_PATHS: usize = 1_000;
const TWIN_SEEDS: usize = 100;
const SCHEME_TOLERANCE: f64 = 0.05;
const STD_ERRORS: f64 = 3.0;
const MIN_RESIDUAL_SLOPE: f64 = 0.9;
const MIN_GALERKIN_RATE: f64 = 1.0;

type Outcome = Result<(bool, String), String>;

/// Name, check and wall-clock budget.
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn config(text: &str) -> RunConfig {
    let mut cfg = parse_config(text).expect("acceptance configuration parses");
    cfg.run.seed = SEED;
    cfg
}

fn all_pass(reports: &[PropertyReport]) -> (bool, String) {
    let pass = reports.iter().all(|r| r.pass);
    let worst = reports
        .iter()
        .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
        .map(|r| format!("worst {} margin {:.2e}", r.name, r.worst_margin))
        .unwrap_or_default();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    let mut msg = format!("{} checks, {worst}", reports.len());
    if !failed.is_empty() {
        msg.push_str(&format!(", failed: {}", failed.join(", ")));
    }
    (pass, msg)
}

fn exact_ops(d: usize, n: usize, r: f64) -> Operators {
    let cfg = config(&format!("[model]\nd = {d}\nn = {n}"));
    let basis = cfg.basis().expect("basis");
    Operators::new(
        &basis,
        OperatorConfig {
            r,
            dealias: Dealias::ExactConvolution,
            ..OperatorConfig::default()
        },
    )
    .expect("operators")
}

fn operator_identities() -> Outcome {
    let mut reports = Vec::new();
    for (d, n) in [(2, 8), (3, 4)] {
        let basis = config(&format!("[model]\nd = {d}\nn = {n}")).basis().map_err(|e| e.to_string())?;
        reports.push(operator_identity_suite(&basis, IDENTITY_TRIPLES, SEED));
    }
    Ok(all_pass(&reports))
}

fn inner_products() -> Outcome {
    let mut reports = Vec::new();
    for (d, n) in [(2, 8), (3, 4)] {
        let basis = config(&format!("[model]\nd = {d}\nn = {n}")).basis().map_err(|e| e.to_string())?;
        reports.extend(inner_product_suite(&basis, INNER_PRODUCT_SAMPLES, &EXPONENTS, SEED).map_err(|e| e.to_string())?);
    }
    Ok(all_pass(&reports))
}

fn monotonicity() -> Outcome {
    let mut reports = Vec::new();
    for r in EXPONENTS {
        let ops = exact_ops(2, 8, r);
        reports.push(check_monotonicity(&ops, MONOTONICITY_PAIRS, SEED).map_err(|e| e.to_string())?);
    }
    Ok(all_pass(&reports))
}

fn noise_moments() -> Outcome {
    let cfg = config(
        "[model]\nn = 8\n[time]\nhorizon = 1.0\ndt = 0.03125\n[noise]\nsigma = \"bounded-multiplicative\"\n\
         sigma_amplitude = 0.5\nsigma_rho = 0.5\nintensity = 3.0\nmark_low = 0.0\nmark_high = 1.0\n\
         gamma_c0 = 0.4\ngamma_c1 = 0.2",
    );
    let basis = cfg.basis().map_err(|e| e.to_string())?;
    let model = cfg.noise_model(&basis).map_err(|e| e.to_string())?;
    let reports = noise_statistics(&model, 1.0, 0.03125, NOISE_PATHS, SEED, 1.0, STD_ERRORS).map_err(|e| e.to_string())?;
    Ok(all_pass(&reports))
}

fn deterministic_ledger() -> Outcome {
    let cfg = config(
        "[model]\nn = 16\nr = 3.0\n[time]\nhorizon = 1.0\ndt = 0.015625\n[initial]\npreset = \"random\"\ndecay = 3.0\n\
         [scheme]\nkind = \"exponential-tamed\"",
    );
    let study = residual_study(&cfg, 5, MIN_RESIDUAL_SLOPE).map_err(|e| e.to_string())?;
    Ok((
        study.pass,
        format!("slope {:.3} (need {MIN_RESIDUAL_SLOPE}), residuals {:.2e}..{:.2e}", study.slope, study.residuals[0], study.residuals[4]),
    ))
}

const JUMP_NOISE: &str = "[noise]\nsigma_amplitude = 0.5\nintensity = 2.0\nmark_low = 0.0\nmark_high = 1.0\ngamma_c0 = 0.5";

fn energy_balance() -> Outcome {
    let cfg = config(&format!("[model]\nn = 8\n[time]\nhorizon = 1.0\ndt = 0.015625\n{JUMP_NOISE}"));
    let sim = cfg.build().map_err(|e| e.to_string())?;
    let u0 = cfg.initial_state(sim.basis()).map_err(|e| e.to_string())?;
    let bal = ensemble_energy_balance(&sim, &u0, BALANCE_PATHS, BALANCE_CONTROLS, STD_ERRORS).map_err(|e| e.to_string())?;

    let ou = config(
        "[model]\nn = 4\nconvection = false\nabsorption = false\n[time]\nhorizon = 4.0\ndt = 0.00390625\n\
         [initial]\npreset = \"zero\"\n[noise]\nsigma_amplitude = 0.5",
    );
    let ou_sim = ou.build().map_err(|e| e.to_string())?;
    let var = stationary_variance_check(&ou_sim, STATIONARY_PATHS, 2.0, STD_ERRORS).map_err(|e| e.to_string())?;
    Ok((
        bal.pass && var.pass,
        format!(
            "balance mean {:.2e} SE {:.1e} band {:.1e} ({}), stationary variance worst z-margin {:.2} ({})",
            bal.statistic.mean,
            bal.statistic.std_error,
            bal.bias_band,
            if bal.pass { "ok" } else { "out" },
            var.worst_margin,
            if var.pass { "ok" } else { "out" },
        ),
    ))
}

fn moment_bound() -> Outcome {
    let cfg = config(&format!("[model]\nn = 8\n[time]\nhorizon = 1.0\ndt = 0.0078125\n{JUMP_NOISE}"));
    let sim = cfg.build().map_err(|e| e.to_string())?;
    let u0 = cfg.initial_state(sim.basis()).map_err(|e| e.to_string())?;
    let corpus = certification_corpus(sim.basis(), 2_000, 10.0, &mut auxiliary_rng(SEED, 70));
    let cert = certify_hypotheses(&sim.noise, &corpus);
    if !cert.pass {
        return Ok((false, format!("noise hypotheses not certified: {:?}", cert.violations)));
    }
    let rep = moment_bound_check(&sim, &u0, MOMENT_PATHS, cert.constants.k1, SCHEME_TOLERANCE).map_err(|e| e.to_string())?;
    Ok((
        rep.verdict == Verdict::Pass,
        format!(
            "K1 {:.3}, E sup {:.3e}, combined upper CI {:.3e}, bound {:.3e} ({:?})",
            cert.constants.k1, rep.sup_energy.mean, rep.combined.ci_high, rep.bound, rep.verdict
        ),
    ))
}

fn uniqueness() -> Outcome {
    let regimes = [
        "[model]\nd = 2\nn = 8\nr = 3.0",
        "[model]\nd = 2\nn = 8\nr = 5.0",
        "[model]\nd = 3\nn = 3\nr = 3.0\nmu = 1.0\nbeta = 1.0",
        "[model]\nd = 3\nn = 3\nr = 5.0",
    ];
    let mut reports = Vec::new();
    for (i, model) in regimes.iter().enumerate() {
        let cfg = config(&format!("{model}\n[time]\nhorizon = 0.5\ndt = 0.0078125\n[noise]\nsigma_amplitude = 0.5"));
        let sim = cfg.build().map_err(|e| e.to_string())?;
        let u0 = cfg.initial_state(sim.basis()).map_err(|e| e.to_string())?;
        for delta in [0.0, 1e-6] {
            reports.push(gronwall_uniqueness_test(&sim, &u0, delta, TWIN_SEEDS, SCHEME_TOLERANCE).map_err(|e| e.to_string())?);
        }
        if i == 0 {
            reports.push(delta_scaling_check(&sim, &u0, 1e-6, 10).map_err(|e| e.to_string())?);
        }
    }
    let refused = config("[model]\nd = 3\nn = 3\nr = 3.0\nmu = 0.5\nbeta = 0.5").check_uniqueness_regime().is_err()
        && config("[model]\nd = 3\nn = 3\nr = 2.0").check_uniqueness_regime().is_err();
    let (pass, msg) = all_pass(&reports);
    Ok((pass && refused, format!("{msg}, uncovered regimes refused: {refused}")))
}

fn galerkin() -> Outcome {
    let cfg = config(
        "[model]\nr = 3.0\n[time]\nhorizon = 1.0\ndt = 0.015625\n[initial]\npreset = \"random\"\ndecay = 3.0\n\
         [noise]\nsigma_amplitude = 0.5\nq_s = 3.0\n[scheme]\nkind = \"exponential-tamed\"",
    );
    let rep = galerkin_convergence_study(&cfg, &[4, 8, 16, 32], 0, MIN_GALERKIN_RATE).map_err(|e| e.to_string())?;
    Ok((
        rep.pass,
        format!("sup differences {:?}, strictly decreasing {}, rate {:.2}", rep.sup_differences.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(), rep.strictly_decreasing, rep.rate),
    ))
}

fn scbf(args: &[&str], dir: &Path) -> Result<i32, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_scbf"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    Ok(status.status.code().unwrap_or(-1))
}

fn infrastructure() -> Outcome {
    let cfg = config(&format!("[model]\nn = 6\n[time]\nhorizon = 0.5\ndt = 0.0078125\n{JUMP_NOISE}"));
    let sim = cfg.build().map_err(|e| e.to_string())?;
    let u0 = cfg.initial_state(sim.basis()).map_err(|e| e.to_string())?;
    let tr = sim.simulate(&u0, 3).map_err(|e| e.to_string())?;
    let bytes = encode_snapshot(&tr);
    let back = decode_snapshot(&bytes).map_err(|e| e.to_string())?;
    let round_trip = trajectories_bitwise_eq(&tr, &back) && encode_snapshot(&back) == bytes;
    let record = tr.record.clone().ok_or("trajectory without noise record")?;
    let replay = sim.run(&u0, record, &mut |_| {}).map_err(|e| e.to_string())?;
    let replayed = replay.states_bitwise_eq(&tr);

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = tmp.path().join("verify.toml");
    std::fs::write(&cfg_path, "[model]\nn = 4\n[noise]\nsigma_amplitude = 0.5\n[run]\nensemble = 300\nseed = 11\n")
        .map_err(|e| e.to_string())?;
    let cfg_arg = cfg_path.to_str().ok_or("non-utf8 path")?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let code_a = scbf(&["verify", "--config", cfg_arg], &a)?;
    let code_b = scbf(&["verify", "--config", cfg_arg], &b)?;
    let read = |p: &Path| std::fs::read(p.join("verify.jsonl")).map_err(|e| e.to_string());
    let verify_identical = code_a == 0 && code_b == 0 && read(&a)? == read(&b)?;

    let manifest = a.join("manifest.json");
    let c = tmp.path().join("c");
    let code_c = scbf(&["verify", "--config", manifest.to_str().ok_or("non-utf8 path")?], &c)?;
    let rerun = code_c == 0
        && RunManifest::read(&manifest)
            .map_err(|e| e.to_string())?
            .verify_outputs(&c)
            .map_err(|e| e.to_string())?
            .is_empty();
    Ok((
        round_trip && replayed && verify_identical && rerun,
        format!(
            "snapshot round trip {round_trip}, replay bitwise {replayed}, verify byte-identical {verify_identical}, manifest rerun {rerun}"
        ),
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("operator identities", operator_identities, Duration::from_secs(60)),
        ("inner products", inner_products, Duration::from_secs(60)),
        ("monotonicity", monotonicity, Duration::from_secs(120)),
        ("noise statistics", noise_moments, Duration::from_secs(300)),
        ("deterministic energy ledger", deterministic_ledger, Duration::from_secs(300)),
        ("ensemble energy balance", energy_balance, Duration::from_secs(900)),
        ("moment bound", moment_bound, Duration::from_secs(600)),
        ("pathwise uniqueness", uniqueness, Duration::from_secs(600)),
        ("galerkin self-convergence", galerkin, Duration::from_secs(600)),
        ("infrastructure", infrastructure, Duration::from_secs(300)),
    ];
    let only: Vec<usize> = std::env::var("SCBF_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !only.is_empty() && !only.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && elapsed <= *budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] {number:>2} {name}: {detail} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
