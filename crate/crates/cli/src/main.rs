mod config;
mod report;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nashmoser::iteration::{ledger_csv, run_with_observer, theta_requirement, SchemeResult};
use nashmoser::models::{build_hopping, build_potential, check_diophantine};
use nashmoser::operator::OperatorSnapshot;
use nashmoser::{distal_margin, TameConstants};

use config::{Loaded, RunConfig};

#[derive(Parser)]
#[command(name = "nashmoser", version, about = "Nash-Moser conjugation of long-range lattice operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// `key=value` override with a dotted key, e.g. `hopping.epsilon=0.05`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory for output files (default: current directory).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scheme and the localization post-processing.
    Run(Common),
    /// Measure distal and Diophantine constants of the potential.
    VerifyDistal(Common),
    /// Evaluate the sufficient conditions of the convergence theorem.
    CheckTheory(Common),
    /// Cartesian sweep over epsilon, s and the box radius.
    Sweep(Common),
}

enum Failure {
    Config(anyhow::Error),
    Numerical(String),
}

impl From<nashmoser::Error> for Failure {
    fn from(e: nashmoser::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(c) => with_config(c, cmd_run),
        Command::VerifyDistal(c) => with_config(c, cmd_verify_distal),
        Command::CheckTheory(c) => with_config(c, cmd_check_theory),
        Command::Sweep(c) => with_config(c, cmd_sweep),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
    }
}

fn with_config(c: &Common, f: fn(&Loaded, &Path) -> Outcome) -> Outcome {
    let loaded = config::load(&c.config, &c.overrides).map_err(Failure::Config)?;
    fs::create_dir_all(&c.out_dir)?;
    f(&loaded, &c.out_dir)
}

/// Writes through a temporary file so readers never see partial output.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

fn execute(cfg: &RunConfig, out_dir: &Path) -> Result<SchemeResult, Failure> {
    let lattice = cfg.lattice().map_err(Failure::Config)?;
    let policy = cfg.policy();
    let d = build_potential(&cfg.potential, &lattice, policy.clone())?;
    let t = build_hopping(&cfg.hopping, &lattice, policy)?;
    let ckpt = cfg.output.checkpoint_dir.as_ref().map(|p| cfg.resolve(out_dir, p));
    let result = run_with_observer(&t, &d, &cfg.params, |state, row| {
        log::info!("step {}: |R|_0 = {:e}", row.k, row.norm("R", Some(0.0)));
        if let Some(dir) = &ckpt {
            for (name, op) in [("q", &state.q), ("r", &state.r)] {
                let bytes = OperatorSnapshot::from_operator(op).to_bytes();
                write_atomic(&dir.join(format!("step_{:03}_{name}.bin", row.k)), &bytes)
                    .map_err(|e| nashmoser::Error::Snapshot(e.to_string()))?;
            }
        }
        Ok(())
    })?;
    Ok(result)
}

struct CellSummary {
    converged: bool,
    steps: usize,
    final_residual: f64,
    min_singular_value: f64,
    max_interior_residual: f64,
    min_envelope_margin: f64,
    failed: Vec<&'static str>,
}

fn run_and_report(loaded: &Loaded, out_dir: &Path) -> Result<CellSummary, Failure> {
    let cfg = &loaded.config;
    let result = execute(cfg, out_dir)?;
    let rep = report::build(&loaded.echo, &result)?;
    let json = serde_json::to_string_pretty(&rep).map_err(|e| Failure::Numerical(e.to_string()))?;
    write_atomic(&cfg.resolve(out_dir, &cfg.output.report_json_path), json.as_bytes())?;
    write_atomic(&cfg.resolve(out_dir, &cfg.output.ledger_csv_path), ledger_csv(&result.ledger).as_bytes())?;
    let inv = report::invariants(&result, &rep.localization);
    Ok(CellSummary {
        converged: result.converged,
        steps: result.steps_taken(),
        final_residual: result.final_residual.sobolev_norm(0.0),
        min_singular_value: rep.localization.completeness.min_singular_value,
        max_interior_residual: rep.localization.max_interior_residual,
        min_envelope_margin: rep.localization.min_interior_envelope_margin,
        failed: inv.iter().filter(|i| !i.passed).map(|i| i.name).collect(),
    })
    .inspect(|_| {
        for i in &inv {
            println!("{:<24} {}  {}", i.name, if i.passed { "ok  " } else { "FAIL" }, i.detail);
        }
    })
}

fn cmd_run(loaded: &Loaded, out_dir: &Path) -> Outcome {
    let s = run_and_report(loaded, out_dir)?;
    println!(
        "converged: {} after {} steps, final |R|_0 = {:e}, min singular value of Q+ = {}",
        s.converged, s.steps, s.final_residual, s.min_singular_value
    );
    if s.failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("invariant violated: {}", s.failed.join(", "))))
    }
}

fn cmd_verify_distal(loaded: &Loaded, _out: &Path) -> Outcome {
    let cfg = &loaded.config;
    let lattice = cfg.lattice().map_err(Failure::Config)?;
    let d = build_potential(&cfg.potential, &lattice, cfg.policy())?;
    let max_offset = lattice.max_offset();
    let p = &cfg.params;
    let mut taus = vec![0.5, 1.0, 1.5, 2.0, 3.0, p.tau];
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    println!("tau       largest gamma   worst offset");
    for &tau in &taus {
        let rep = distal_margin(d.sequence(), tau, p.gamma, max_offset)?;
        println!("{tau:<9} {:<15.8e} {:?}", rep.largest_gamma, rep.worst_offset);
    }
    if cfg.potential.is_quasi_periodic() {
        let dio = check_diophantine(&cfg.potential.omega, p.tau, max_offset)?;
        println!(
            "diophantine: gamma_best = {:.17e} at k = {:?} (tau = {}, |k| <= {max_offset})",
            dio.gamma_best, dio.worst_k, p.tau
        );
    }
    let rep = distal_margin(d.sequence(), p.tau, p.gamma, max_offset)?;
    println!(
        "configured (tau, gamma) = ({}, {}): {} (margin {:e}, {} offsets)",
        p.tau,
        p.gamma,
        if rep.passed() { "distal" } else { "NOT distal" },
        rep.empirical_margin,
        rep.offsets_tested
    );
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("distal condition fails at offset {:?}", rep.worst_offset)))
    }
}

fn cmd_check_theory(loaded: &Loaded, _out: &Path) -> Outcome {
    let cfg = &loaded.config;
    let lattice = cfg.lattice().map_err(Failure::Config)?;
    let t = build_hopping(&cfg.hopping, &lattice, cfg.policy())?;
    let p = &cfg.params;
    let input = nashmoser::iteration::TheoryInput::from_params(
        p,
        lattice.dimension(),
        t.sobolev_norm(p.alpha + 4.0 * p.delta),
        t.sobolev_norm(p.alpha + 3.0 * p.delta),
    );
    let conds = nashmoser::iteration::check_theory_conditions(&input)?;
    for c in &conds {
        println!(
            "{:<8} {:<5} margin {:>12.4e}{}  {}",
            c.name,
            if c.holds { "holds" } else { "FAILS" },
            c.margin,
            if c.effective { "" } else { " (C = 1)" },
            c.statement
        );
    }
    let tc = TameConstants::new(lattice.dimension(), p.alpha0)?;
    let req = theta_requirement(p.delta, p.alpha0, tc.c0);
    println!(
        "Theta requirement: 10^{:.3} (binding: {}); configured Theta = 10^{:.3}",
        req.log10_required,
        req.binding,
        p.big_theta.log10()
    );
    let failing: Vec<&str> = conds.iter().filter(|c| c.effective && !c.holds).map(|c| c.name.as_str()).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("theory conditions fail: {}", failing.join(", "))))
    }
}

fn sweep_cells(loaded: &Loaded) -> Result<Vec<(f64, f64, usize, Loaded)>, Failure> {
    let cfg = &loaded.config;
    let axes = cfg.sweep.clone().unwrap_or_default();
    let eps = if axes.epsilon.is_empty() { vec![cfg.hopping.epsilon] } else { axes.epsilon };
    let ss = if axes.s_exponent.is_empty() { vec![cfg.hopping.s_exponent] } else { axes.s_exponent };
    let rs = if axes.radius.is_empty() { vec![cfg.lattice.radius] } else { axes.radius };
    let mut cells = Vec::new();
    for &e in &eps {
        for &s in &ss {
            for &r in &rs {
                let mut v = loaded.echo.clone();
                let base = &cfg.lattice;
                let d = base.dimension as f64;
                let delta = cfg.params.delta;
                let alpha = s - d / 2.0 - 5.0 * delta;
                let sets = [
                    ("hopping.epsilon", serde_json::json!(e)),
                    ("hopping.s_exponent", serde_json::json!(s)),
                    ("box.radius", serde_json::json!(r)),
                    ("box.interior_radius", serde_json::json!(r * base.interior_radius / base.radius.max(1))),
                    ("output.checkpoint_dir", serde_json::Value::Null),
                ];
                for (k, val) in sets {
                    config::apply_override(&mut v, &format!("{k}={val}")).map_err(Failure::Config)?;
                }
                if s != cfg.hopping.s_exponent {
                    for (k, val) in [("params.s_hopping", s), ("params.alpha", alpha), ("params.alpha1", 2.0 * alpha + delta)] {
                        config::apply_override(&mut v, &format!("{k}={val}")).map_err(Failure::Config)?;
                    }
                }
                if let Some(obj) = v.as_object_mut() {
                    obj.remove("sweep");
                }
                cells.push((e, s, r, config::from_value(v).map_err(Failure::Config)?));
            }
        }
    }
    Ok(cells)
}

fn cmd_sweep(loaded: &Loaded, out_dir: &Path) -> Outcome {
    let cells = sweep_cells(loaded)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<CellSummary, String>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((_, _, _, cell)) = cells.get(i) else { break };
                let dir = out_dir.join(format!("cell_{i:03}"));
                let r = run_and_report(cell, &dir).map_err(|f| match f {
                    Failure::Config(e) => format!("{e:#}"),
                    Failure::Numerical(m) => m,
                });
                results.lock().expect("poisoned")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("poisoned");
    let mut csv = String::from("cell,epsilon,s_exponent,radius,converged,steps,final_residual,min_singular_value,max_interior_residual,min_envelope_margin,status\n");
    let mut failures = Vec::new();
    for (i, ((e, s, r, _), res)) in cells.iter().zip(results).enumerate() {
        match res.expect("every cell ran") {
            Ok(c) => {
                let status = if c.failed.is_empty() { "ok".to_string() } else { c.failed.join(";") };
                if !c.failed.is_empty() {
                    failures.push(format!("cell {i}: {status}"));
                }
                csv.push_str(&format!(
                    "{i},{e:.16e},{s:.16e},{r},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{status}\n",
                    c.converged, c.steps, c.final_residual, c.min_singular_value, c.max_interior_residual, c.min_envelope_margin
                ));
            }
            Err(msg) => {
                failures.push(format!("cell {i}: {msg}"));
                csv.push_str(&format!("{i},{e:.16e},{s:.16e},{r},,,,,,,error: {}\n", msg.replace(',', ";")));
            }
        }
    }
    write_atomic(&out_dir.join("sweep.csv"), csv.as_bytes()).context("writing sweep.csv").map_err(|e| Failure::Numerical(format!("{e:#}")))?;
    println!("{} cells, {} failing", cells.len(), failures.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numerical(failures.join("; ")))
    }
}
