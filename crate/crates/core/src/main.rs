use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use halfspace_ns::besov::{besov_norm, BesovParams};
use halfspace_ns::config::Config;
use halfspace_ns::error::{Error, Result};
use halfspace_ns::field::{Trajectory, VectorField};
use halfspace_ns::harness::{grid_at, run_verification_suite, VerificationReport, CRITERIA};
use halfspace_ns::io::{read_vector, write_arrays, write_vector, CheckpointEntry, CheckpointManifest};
use halfspace_ns::kernels::heat_convolve_vector;
use halfspace_ns::picard::{calibrate_amplitude, fit_constants, iterate_from, PicardConfig};
use halfspace_ns::scenario::generate_initial_data;
use halfspace_ns::stokes::{solve_homogeneous, StokesProblem};

#[derive(Parser)]
#[command(version, about = "Mild solutions of the Stokes and Navier-Stokes equations in a half space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `run.seed`
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `run.level` (grid refinements)
    #[arg(long, global = true)]
    level: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Heat flow of the scenario datum at `heat.t`
    Heat,
    /// Besov norm of the scenario datum, printed as JSON
    Besov,
    /// Stokes flow of the scenario datum over the time grid
    Stokes,
    /// Picard iteration with checkpoints; resumes from an existing manifest
    NsIterate,
    /// Runs the verification suite and writes report.csv and report.json
    Verify,
    /// Summarizes an existing report.json
    Report,
}

enum Outcome {
    Pass,
    CheckFailure,
}

fn load(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::from_path(p)?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(l) = common.level {
        cfg.level = l;
    }
    grid_at(&cfg, 0).map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

/// Scenario datum on the configured grid refined `run.level` times.
fn datum(cfg: &Config) -> Result<VectorField> {
    generate_initial_data(&cfg.scenario, &grid_at(cfg, 0)?)
}

fn heat(cfg: &Config, out: &Path) -> Result<Outcome> {
    let u = heat_convolve_vector(&datum(cfg)?, cfg.heat_t, cfg.heat_reflection)?;
    let path = out.join("heat.bin");
    write_vector(&path, &u)?;
    println!("{}", path.display());
    Ok(Outcome::Pass)
}

fn besov(cfg: &Config) -> Result<Outcome> {
    let params = BesovParams::new(cfg.besov_s, cfg.besov_p, cfg.besov_q).map_err(|e| Error::Config(e.to_string()))?;
    let report = besov_norm(&datum(cfg)?, &params)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Outcome::Pass)
}

fn stokes(cfg: &Config, out: &Path) -> Result<Outcome> {
    let sol = solve_homogeneous(&StokesProblem::new(datum(cfg)?, cfg.times, cfg.rule)?, true)?;
    let times = cfg.times.times();
    for (k, u) in sol.velocity.fields().iter().enumerate() {
        write_vector(&out.join(format!("velocity_{k:03}.bin")), u)?;
    }
    if let Some(p) = &sol.pressure {
        for (k, q) in p.iter().enumerate() {
            write_arrays(&out.join(format!("pressure_{k:03}.bin")), q.grid(), std::slice::from_ref(q.data()))?;
        }
    }
    let summary = serde_json::json!({
        "times": times,
        "trace": sol.trace,
        "divergence": sol.divergence,
    });
    std::fs::write(out.join("stokes.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("max trace {:e}, max divergence {:e}", sol.max_trace(), sol.max_divergence());
    Ok(Outcome::Pass)
}

fn ns_iterate(cfg: &Config, out: &Path) -> Result<Outcome> {
    let pc = PicardConfig::new(cfg.times, cfg.rule);
    let n = cfg.grid.dim();
    let shape = datum(cfg)?;
    let fitted = fit_constants(std::slice::from_ref(&shape), cfg.picard_p0, cfg.picard_p, &pc)?;
    let budget = fitted.budget(n, cfg.picard_p0, cfg.picard_p)?;
    let eps = if cfg.picard_target > 0.0 { calibrate_amplitude(&shape, &budget, cfg.picard_target, &pc)? } else { 1.0 };
    let u0 = shape.scaled(eps);
    let v = solve_homogeneous(&StokesProblem::new(u0.clone(), cfg.times, cfg.rule)?, false)?.velocity;

    let manifest_path = out.join("manifest.json");
    let mut manifest = if manifest_path.exists() {
        let m = CheckpointManifest::load(&manifest_path)?;
        if m.times != cfg.times.times() {
            return Err(Error::Config("existing manifest was written for a different time grid".into()));
        }
        m
    } else {
        CheckpointManifest { times: cfg.times.times(), entries: Vec::new() }
    };
    let (mut m, mut current) = match manifest.entries.last() {
        Some(e) => {
            let fields = e.files.iter().map(|f| read_vector(&out.join(f))).collect::<Result<Vec<_>>>()?;
            log::info!("resuming from iterate {}", e.m);
            (e.m, Trajectory::new(cfg.times, fields)?)
        }
        None => (1, v.clone()),
    };
    let every = cfg.checkpoint_every.max(1);
    let save = |m: usize, traj: &Trajectory, manifest: &mut CheckpointManifest| -> Result<()> {
        let mut files = Vec::new();
        for (k, u) in traj.fields().iter().enumerate() {
            let name = format!("iterate_{m:03}_{k:03}.bin");
            write_vector(&out.join(&name), u)?;
            files.push(name);
        }
        let (b, _) = budget.besov_norm(traj)?;
        manifest.entries.push(CheckpointEntry { m, files, norm_weighted: budget.weighted_norm(traj)?, norm_besov: b });
        manifest.save(&manifest_path)
    };
    if manifest.entries.is_empty() {
        save(1, &current, &mut manifest)?;
    }
    let mut converged = false;
    let mut prev_diff: Option<(f64, f64)> = None;
    println!("eps = {eps:e}, constants {fitted:?}");
    while m < cfg.picard_m_max {
        let step = iterate_from(&u0, &v, current, &budget, 2, cfg.picard_stop_tol, &pc)?;
        if let Some(reason) = &step.aborted {
            println!("aborted at iterate {}: {reason}", m + 1);
            return Ok(Outcome::CheckFailure);
        }
        let diff = step.diffs[0];
        m += 1;
        current = step.current;
        let ratio = prev_diff.map(|p| (diff.0 / p.0, diff.1 / p.1));
        println!("m = {m:>3}  diff = ({:.3e}, {:.3e})  ratio = {ratio:.3?}", diff.0, diff.1);
        prev_diff = Some(diff);
        converged = step.converged;
        if converged || m % every == 0 || m == cfg.picard_m_max {
            save(m, &current, &mut manifest)?;
        }
        if converged {
            break;
        }
    }
    println!("{} after {m} iterates", if converged { "converged" } else { "not converged" });
    Ok(if converged { Outcome::Pass } else { Outcome::CheckFailure })
}

fn print_summary(report: &VerificationReport) {
    for &(id, name, checks) in CRITERIA {
        let rows: Vec<_> = report.records.iter().filter(|r| checks.contains(&r.check.as_str())).collect();
        if rows.is_empty() {
            continue;
        }
        let pass = rows.iter().all(|r| r.pass);
        println!("criterion {id:>2} {name:<24} {}", if pass { "PASS" } else { "FAIL" });
        for r in rows {
            println!("    {:<26} {:<10} {:>12.4e}  {}", r.check, r.level, r.measured, if r.pass { "ok" } else { "FAIL" });
        }
    }
}

fn verify(cfg: &Config, out: &Path) -> Result<Outcome> {
    let mut report = run_verification_suite(cfg);
    report.write(out)?;
    print_summary(&report);
    Ok(if report.passed() { Outcome::Pass } else { Outcome::CheckFailure })
}

fn report(out: &Path) -> Result<Outcome> {
    let path = out.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let report: VerificationReport = serde_json::from_str(&text)?;
    std::fs::write(out.join("report.csv"), report.to_csv())?;
    print_summary(&report);
    Ok(if report.passed() { Outcome::Pass } else { Outcome::CheckFailure })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = load(&cli.common)?;
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads {n}: {e}")))?;
    }
    let out = &cli.common.out;
    std::fs::create_dir_all(out)?;
    match cli.command {
        Command::Heat => heat(&cfg, out),
        Command::Besov => besov(&cfg),
        Command::Stokes => stokes(&cfg, out),
        Command::NsIterate => ns_iterate(&cfg, out),
        Command::Verify => verify(&cfg, out),
        Command::Report => report(out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailure) => ExitCode::from(1),
        Err(e @ (Error::Config(_) | Error::InvalidGrid(_) | Error::InvalidExponent(_) | Error::BandOutOfRange { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
