//! `sps` — cavity-QED single-photon source simulator.
//!
//! Subcommands: `bound` (closed-form report), `simulate` (one solver run
//! with time-series CSV), `sweep` (grid tables), `optimize` (κ_ex or
//! pulse search), `physical` (SI cavity calculator), `verify`
//! (random-draw invariant scan).
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 numerical
//! failure, 3 bound violation found by `verify`. Errors print one
//! machine-parsable line to stderr. `SPS_WORKERS` caps the worker pool.

mod config;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use config::{parse_solver, resolve_optimize, resolve_run, resolve_sweep_axes, ConfigFile, OptimizeMode, RunConfig};
use sps_core::bounds::{self, BoundReport};
use sps_core::model::{DrivePulse, PhysicalCavity, RateSet, StopRule, ToleranceSpec};
use sps_core::optimize::{self, PulseSearchSpace, Solver, SweepSpec};
use sps_core::{adiabaticity, evolve_amplitudes, evolve_master, repump_contribution, run_trajectories, SimError};

#[derive(Parser)]
#[command(name = "sps", version, about = "Cavity-QED single-photon source simulator", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the closed-form bound report for a rate set or a bare C_in.
    Bound(BoundArgs),
    /// Run one solver and emit a summary plus optional time-series CSV.
    Simulate(RunArgs),
    /// Evaluate a parameter grid and emit a CSV table.
    Sweep(RunArgs),
    /// Maximize P_S over kappa_ex or over pulse parameters.
    Optimize(RunArgs),
    /// SI-unit cavity calculator (g, kappa_in, gamma, C_in from geometry).
    Physical(PhysicalArgs),
    /// Random-draw scan of the success ceiling and conservation identities.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BoundArgs {
    /// Internal cooperativity; bypasses the full rate set.
    #[arg(long)]
    c_in: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    r_u: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa_in: f64,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    kappa_ex: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    r_g: f64,
    #[arg(long, default_value_t = 0.0)]
    r_o: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file (key = value sections).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. --set rates.g=12.5 (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    /// Override `[run] solver`.
    #[arg(long)]
    solver: Option<String>,
    /// Override `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `[run] output` path.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PhysicalArgs {
    /// Dipole moment of the g–e transition, C·m.
    #[arg(long)]
    mu: f64,
    /// Transition angular frequency, rad/s (alternative: --wavelength).
    #[arg(long)]
    omega: Option<f64>,
    /// Transition wavelength, m.
    #[arg(long)]
    wavelength: Option<f64>,
    /// Cavity length, m.
    #[arg(long)]
    length: f64,
    /// Effective mode cross-section at the atom, m².
    #[arg(long)]
    area: f64,
    /// One-round-trip internal loss.
    #[arg(long)]
    alpha_loss: f64,
    #[arg(long, default_value_t = 0.0)]
    r_u: f64,
    #[arg(long, default_value_t = 1.0)]
    r_g: f64,
    #[arg(long, default_value_t = 0.0)]
    r_o: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    draws: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

enum CliError {
    Usage(String),
    Numerical(String),
    Violation(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::ToleranceNotMet { .. } | SimError::NotConverged { .. } => {
                CliError::Numerical(e.to_string())
            }
            SimError::BoundViolation { .. } => CliError::Violation(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version are not errors
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion
            {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: usage: {}", first_line(&e.to_string()));
            return ExitCode::from(1);
        }
    };

    init_worker_pool();

    let result = match cli.cmd {
        Cmd::Bound(args) => cmd_bound(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Optimize(args) => cmd_optimize(args),
        Cmd::Physical(args) => cmd_physical(args),
        Cmd::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: config: {}", first_line(&m));
            ExitCode::from(1)
        }
        Err(CliError::Numerical(m)) => {
            eprintln!("error: numerical: {}", first_line(&m));
            ExitCode::from(2)
        }
        Err(CliError::Violation(m)) => {
            eprintln!("error: bound-violation: {}", first_line(&m));
            ExitCode::from(3)
        }
    }
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or(s)
}

/// `SPS_WORKERS` caps the rayon pool; unset leaves the default.
fn init_worker_pool() {
    if let Ok(v) = std::env::var("SPS_WORKERS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(args: &RunArgs) -> Result<(RunConfig, ConfigFile), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    for s in &args.sets {
        cfg.set(s)?;
    }
    let mut run = resolve_run(&cfg)?;
    if let Some(solver) = &args.solver {
        run.solver = parse_solver(solver)?;
    }
    if let Some(seed) = args.seed {
        run.seed = seed;
    }
    if let Some(out) = &args.output {
        run.output = Some(out.display().to_string());
    }
    Ok((run, cfg))
}

fn print_bound_report(b: &BoundReport) {
    println!("C            = {}", output::fmt(b.c));
    println!("C_in         = {}", output::fmt(b.c_in));
    println!("eta_esc      = {}", output::fmt(b.eta_esc));
    println!("ps_upper     = {}", output::fmt(b.ps_upper));
    println!("pf_lower     = {}", output::fmt(b.pf_lower));
    println!("pf_approx    = {}", output::fmt(b.pf_lower_approx));
    println!("kappa_ex_opt = {}", output::fmt(b.kappa_ex_opt));
    println!("prep_upper   = {}", output::fmt(b.prep_upper));
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    match (args.c_in, args.g, args.kappa_ex) {
        (Some(c_in), None, None) => {
            let pf = bounds::pf_lower(c_in, args.r_u)?;
            let kex_opt = bounds::kappa_ex_opt(args.kappa_in, c_in, args.r_u)?;
            println!("C_in                  = {}", output::fmt(c_in));
            println!("r_u                   = {}", output::fmt(args.r_u));
            println!("pf_lower              = {}", output::fmt(pf));
            println!("pf_approx             = {}", output::fmt(bounds::pf_lower_approx(c_in)));
            println!("kappa_ex_opt          = {}", output::fmt(kex_opt));
            println!("kappa_ex_opt/kappa_in = {}", output::fmt(kex_opt / args.kappa_in));
            Ok(())
        }
        (None, Some(g), Some(kappa_ex)) => {
            let rates = RateSet::new(g, args.kappa_in, kappa_ex, args.gamma, args.r_u, args.r_g, args.r_o)
                .validate()?;
            print_bound_report(&bounds::bound_report(&rates));
            Ok(())
        }
        _ => Err(CliError::Usage(
            "bound needs either --c-in alone or both --g and --kappa-ex".into(),
        )),
    }
}

fn cmd_simulate(args: RunArgs) -> Result<(), CliError> {
    let (run, _) = load_config(&args)?;
    let rates = run.rates.validate()?;
    let stop = run.sim_options().stop_for(&run.pulse, &rates);
    let report = bounds::bound_report(&rates);

    match run.solver {
        Solver::Amplitudes => {
            let r = evolve_amplitudes(&rates, &run.pulse, &stop, &run.tol)?;
            println!("solver       = amplitudes");
            println!("P_S (norep)  = {}", output::fmt(r.ps_norep));
            println!("I_g          = {}", output::fmt(r.i_g));
            println!("I_e          = {}", output::fmt(r.i_e));
            println!("I_g_prime    = {}", output::fmt(r.i_g_prime));
            println!("adiabaticity = {}", output::fmt(adiabaticity(&r, &rates)));
            println!("final_norm   = {}", output::fmt(r.final_norm));
            println!("t_end        = {}", output::fmt(r.t_end));
            println!("ps_upper     = {}", output::fmt(report.ps_upper));
            if let Some(path) = &run.output {
                let mut w = BufWriter::new(File::create(path)?);
                output::write_amplitude_csv(&mut w, &r, &run.pulse)?;
                w.flush()?;
            }
        }
        Solver::Master => {
            let m = evolve_master(&rates, &run.pulse, &stop, &run.tol)?;
            println!("solver       = master");
            println!("P_S          = {}", output::fmt(m.ps_total));
            println!("F_ex         = {}", output::fmt(m.f_ex));
            println!("F_in         = {}", output::fmt(m.f_in));
            println!("F_g          = {}", output::fmt(m.f_g));
            println!("F_o          = {}", output::fmt(m.f_o));
            println!("F_u          = {}", output::fmt(m.f_u));
            println!("t_end        = {}", output::fmt(m.t_end));
            println!("ps_upper     = {}", output::fmt(report.ps_upper));
            if let Some(path) = &run.output {
                let mut w = BufWriter::new(File::create(path)?);
                output::write_master_csv(&mut w, &m, &run.pulse)?;
                w.flush()?;
            }
        }
        Solver::MonteCarlo => {
            let s = run_trajectories(&rates, &run.pulse, &stop, &run.tol, run.n_samples, run.seed)?;
            println!("solver       = montecarlo");
            println!("P_S estimate = {}", output::fmt(s.p_success_hat));
            println!("stderr       = {}", output::fmt(s.stderr));
            println!("n_samples    = {}", s.n_samples);
            println!("external     = {}", s.outcome_counts.external);
            println!("internal     = {}", s.outcome_counts.internal);
            println!("spont_g      = {}", s.outcome_counts.spont_g);
            println!("spont_o      = {}", s.outcome_counts.spont_o);
            println!("unterminated = {}", s.outcome_counts.unterminated);
            println!("mean_repumps = {}", output::fmt(s.mean_repumps));
            println!("ps_upper     = {}", output::fmt(report.ps_upper));
            if let Some(path) = &run.output {
                let mut w = BufWriter::new(File::create(path)?);
                output::write_trajectory_csv(&mut w, &s)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn cmd_sweep(args: RunArgs) -> Result<(), CliError> {
    let (run, cfg) = load_config(&args)?;
    let axes = resolve_sweep_axes(&cfg)?;
    let spec = SweepSpec {
        base: run.rates,
        pulse: run.pulse.clone(),
        solver: run.solver,
        opts: run.sim_options(),
        vary: axes.clone(),
    };
    let rows = optimize::sweep(&spec)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    match &run.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            output::write_sweep_csv(&mut w, &axes, &rows)?;
            w.flush()?;
            println!("rows = {} (failed {failed}), wrote {path}", rows.len());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            output::write_sweep_csv(&mut stdout, &axes, &rows)?;
        }
    }
    Ok(())
}

fn cmd_optimize(args: RunArgs) -> Result<(), CliError> {
    let (run, cfg) = load_config(&args)?;
    let opts = run.sim_options();
    match resolve_optimize(&cfg)? {
        OptimizeMode::KappaEx { lo, hi, tol } => {
            let o = optimize::maximize_over_kappa_ex(run.rates, &run.pulse, (lo, hi), tol, &opts)?;
            println!("mode         = kappa_ex");
            println!("kappa_ex     = {}", output::fmt(o.best_params[0]));
            println!("P_S          = {}", output::fmt(o.best_value));
            println!("evaluations  = {}", o.evaluations);
            println!("converged    = {}", o.converged);
            let rates = RateSet { kappa_ex: o.best_params[0], ..run.rates }.validate()?;
            let b = bounds::bound_report(&rates);
            println!("kappa_ex_opt = {} (closed form)", output::fmt(b.kappa_ex_opt));
            if let Some(path) = &run.output {
                let mut w = BufWriter::new(File::create(path)?);
                output::write_trace_csv(&mut w, &["kappa_ex"], &o)?;
                w.flush()?;
            }
        }
        OptimizeMode::Pulse { free, budget, seed } => {
            let rates = run.rates.validate()?;
            let names: Vec<&str> = free.iter().map(|(p, _)| p.name()).collect();
            let space = PulseSearchSpace { base: run.pulse.clone(), free };
            let o = optimize::optimize_pulse(&rates, &space, budget, seed, &opts)?;
            println!("mode         = pulse");
            for (name, v) in names.iter().zip(&o.best_params) {
                println!("{name:<12} = {}", output::fmt(*v));
            }
            println!("P_S          = {}", output::fmt(o.best_value));
            println!("evaluations  = {}", o.evaluations);
            println!("converged    = {}", o.converged);
            println!("ps_upper     = {}", output::fmt(bounds::ps_upper(&rates)));
            if let Some(path) = &run.output {
                let mut w = BufWriter::new(File::create(path)?);
                output::write_trace_csv(&mut w, &names, &o)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn cmd_physical(args: PhysicalArgs) -> Result<(), CliError> {
    let omega = match (args.omega, args.wavelength) {
        (Some(w), None) => w,
        (None, Some(l)) if l > 0.0 => 2.0 * std::f64::consts::PI * bounds::SPEED_OF_LIGHT / l,
        _ => return Err(CliError::Usage("physical needs exactly one of --omega or --wavelength".into())),
    };
    let cavity = PhysicalCavity {
        mu_ge: args.mu,
        omega_ge: omega,
        length: args.length,
        a_eff: args.area,
        alpha_loss: args.alpha_loss,
        r_u: args.r_u,
        r_g: args.r_g,
        r_o: args.r_o,
    };
    let r = bounds::rates_from_physical(&cavity)?;
    let pf = bounds::pf_lower(r.c_in, args.r_u)?;
    println!("g        = {} rad/s", output::fmt(r.g));
    println!("kappa_in = {} rad/s", output::fmt(r.kappa_in));
    println!("gamma    = {} rad/s", output::fmt(r.gamma));
    println!("r_A      = {}", output::fmt(r.r_a));
    println!("C_in     = {}", output::fmt(r.c_in));
    println!("2C_in/(1-r_u) = {}", output::fmt(bounds::repump_boosted_two_cin(r.c_in, args.r_u)));
    println!("pf_lower = {}", output::fmt(pf));
    if r.kappa_in > 0.0 {
        println!(
            "kappa_ex_opt = {} rad/s",
            output::fmt(bounds::kappa_ex_opt(r.kappa_in, r.c_in, args.r_u)?)
        );
    }
    Ok(())
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

fn log_u(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * unit(rng)).exp()
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let rng = &mut ChaCha8Rng::seed_from_u64(args.seed);
    let tol = ToleranceSpec::default();

    let mut ok = 0u32;
    let mut failures: Vec<String> = Vec::new();
    for i in 0..args.draws {
        let g = log_u(rng, 0.1, 10.0);
        let kin = log_u(rng, 0.1, 10.0);
        let kex = log_u(rng, 0.1, 10.0);
        let r_u = 0.9 * unit(rng);
        let r_g = (1.0 - r_u) * (0.2 + 0.8 * unit(rng));
        let r_o = 1.0 - r_u - r_g;
        let rates = RateSet::new(g, kin, kex, 1.0, r_u, r_g, r_o).validate()?;
        let omega = log_u(rng, 0.3, 3.0);
        let duration = log_u(rng, 10.0, 40.0);
        let pulse = if unit(rng) < 0.5 {
            DrivePulse::vstirap_sin(omega, duration)
        } else {
            DrivePulse::sin2_ramp(omega, duration, 0.5 * duration)
        };
        let stop = StopRule {
            t_max: duration + 30.0 / rates.gamma().min(rates.kappa()),
            eps_stop: 1e-10,
        };

        let m = evolve_master(&rates, &pulse, &stop, &tol)?;
        let a = evolve_amplitudes(&rates, &pulse, &stop, &tol)?;
        let _ = repump_contribution(&m, &a)?;

        let mut bad = Vec::new();
        let ceiling = bounds::ps_upper(&rates);
        if m.ps_total > ceiling + 1e-6 {
            bad.push(format!("P_S {} > ceiling {}", m.ps_total, ceiling));
        }
        let tr = m.rho_block[0][0].re + m.rho_block[1][1].re + m.rho_block[2][2].re;
        if (tr + m.p_g0 + m.p_o0 - 1.0).abs() > 1e-8 {
            bad.push("trace not conserved".into());
        }
        let norm_defect =
            (a.final_norm + 2.0 * rates.gamma() * a.i_e + 2.0 * rates.kappa() * a.i_g - 1.0).abs();
        if norm_defect > 1e-8 {
            bad.push(format!("norm defect {norm_defect:.3e}"));
        }
        let (c, _) = bounds::cooperativities(&rates);
        let norep_ceiling = rates.kappa_ex() / rates.kappa() * 2.0 * c / (1.0 + 2.0 * c);
        if a.ps_norep > norep_ceiling + 1e-6 {
            bad.push("ps_norep above ceiling".into());
        }
        if m.series.min_eig.iter().any(|&e| e < -1e-10) {
            bad.push("density block not positive".into());
        }
        if bad.is_empty() {
            ok += 1;
        } else {
            failures.push(format!("draw {i}: {}", bad.join("; ")));
        }
    }
    println!("{ok}/{} within bound", args.draws);
    for f in &failures {
        println!("VIOLATION {f}");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("{} of {} draws violated invariants", failures.len(), args.draws)))
    }
}
