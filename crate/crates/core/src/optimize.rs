//! Numerical maximization of the simulated success probability and grid
//! sweeps for the internal/escape efficiency tradeoff.
//!
//! The output-coupler search is a bracketed golden-section maximization;
//! pulse-shape search is Nelder–Mead (reflection 1, expansion 2,
//! contraction 0.5, shrink 0.5, convergence when the simplex value spread
//! drops below 1e-6) with deterministic seeded restarts. Objective
//! evaluations are cached on parameter fingerprints because both
//! algorithms revisit points.

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::amplitudes::{adiabaticity, evolve_amplitudes};
use crate::bounds;
use crate::error::{Result, SimError};
use crate::master::{evolve_master, repump_contribution};
use crate::model::{DrivePulse, PulseShape, RateSet, StopRule, ToleranceSpec, ValidatedRateSet};
use crate::montecarlo::run_trajectories;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Which solver computes P_S.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Amplitudes,
    Master,
    MonteCarlo,
}

/// Shared solver settings for objective evaluations and sweeps.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub tol: ToleranceSpec,
    /// `None` derives [`StopRule::auto`] per candidate (with `eps_stop`
    /// below), so the window tracks a varying pulse duration.
    pub stop: Option<StopRule>,
    /// Residual threshold used when the stop rule is auto-derived.
    pub eps_stop: f64,
    /// Trajectory count (Monte Carlo solver only).
    pub n_samples: u64,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            tol: ToleranceSpec::default(),
            stop: None,
            eps_stop: StopRule::DEFAULT_EPS_STOP,
            n_samples: 10_000,
            seed: 0,
        }
    }
}

impl SimOptions {
    pub fn stop_for(&self, pulse: &DrivePulse, rates: &ValidatedRateSet) -> StopRule {
        self.stop
            .unwrap_or_else(|| StopRule { eps_stop: self.eps_stop, ..StopRule::auto(pulse, rates) })
    }
}

/// Result of a scalar or simplex optimization.
#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    /// True only when the stopping rule was met (bracket shrunk below
    /// tolerance, or simplex spread below 1e-6); false on exhausted
    /// budgets and non-unimodal brackets.
    pub converged: bool,
    /// Raw (iterate, value) pairs in evaluation order.
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// P_S for one configuration via the chosen solver. Used by the sweep
/// rows; optimization objectives wrap it with caching.
pub fn success_probability(
    rates: &ValidatedRateSet,
    pulse: &DrivePulse,
    solver: Solver,
    opts: &SimOptions,
) -> Result<f64> {
    let stop = opts.stop_for(pulse, rates);
    match solver {
        Solver::Amplitudes => Ok(evolve_amplitudes(rates, pulse, &stop, &opts.tol)?.ps_norep),
        Solver::Master => Ok(evolve_master(rates, pulse, &stop, &opts.tol)?.ps_total),
        Solver::MonteCarlo => {
            Ok(run_trajectories(rates, pulse, &stop, &opts.tol, opts.n_samples, opts.seed)?.p_success_hat)
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9; // (√5 − 1)/2

/// Maximize the master-solver P_S over κ_ex on `[lo, hi]` by
/// golden-section search with absolute tolerance `tol` on κ_ex.
///
/// If a bracket endpoint beats the interior optimum the bracket was not
/// unimodal; the best point found is still returned, with
/// `converged = false`.
pub fn maximize_over_kappa_ex(
    base: RateSet,
    pulse: &DrivePulse,
    bracket: (f64, f64),
    tol: f64,
    opts: &SimOptions,
) -> Result<OptimizationOutcome> {
    let (lo, hi) = bracket;
    if !(0.0 < lo && lo < hi) {
        return Err(SimError::SpecError(format!("bad kappa_ex bracket ({lo}, {hi})")));
    }
    if !(tol > 0.0) {
        return Err(SimError::SpecError("kappa_ex tolerance must be positive".into()));
    }

    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut trace: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut evals = 0usize;
    let mut eval = |kex: f64, cache: &mut HashMap<u64, f64>, trace: &mut Vec<(Vec<f64>, f64)>| -> Result<f64> {
        if let Some(&v) = cache.get(&kex.to_bits()) {
            return Ok(v);
        }
        let rates = RateSet { kappa_ex: kex, ..base }.validate()?;
        evals += 1;
        let v = match success_probability(&rates, pulse, Solver::Master, opts) {
            Ok(v) => v,
            Err(SimError::NotConverged { .. }) | Err(SimError::ToleranceNotMet { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        cache.insert(kex.to_bits(), v);
        trace.push((vec![kex], v));
        Ok(v)
    };

    let f_lo = eval(lo, &mut cache, &mut trace)?;
    let f_hi = eval(hi, &mut cache, &mut trace)?;

    let mut a = lo;
    let mut b = hi;
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = eval(c, &mut cache, &mut trace)?;
    let mut fd = eval(d, &mut cache, &mut trace)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = eval(c, &mut cache, &mut trace)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = eval(d, &mut cache, &mut trace)?;
        }
    }
    let (mut best_x, mut best_f) = if fc > fd { (c, fc) } else { (d, fd) };

    // non-unimodal bracket: an endpoint beats the interior optimum
    let mut converged = true;
    if f_lo > best_f || f_hi > best_f {
        converged = false;
        if f_lo > best_f {
            best_x = lo;
            best_f = f_lo;
        }
        if f_hi > best_f {
            best_x = hi;
            best_f = f_hi;
        }
    }
    Ok(OptimizationOutcome {
        best_params: vec![best_x],
        best_value: best_f,
        evaluations: evals,
        converged,
        trace,
    })
}

/// A pulse parameter exposed to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseParam {
    OmegaMax,
    Duration,
    Ramp,
    Center,
    Width,
    ChirpRate,
}

impl PulseParam {
    pub fn name(&self) -> &'static str {
        match self {
            PulseParam::OmegaMax => "omega_max",
            PulseParam::Duration => "duration",
            PulseParam::Ramp => "ramp",
            PulseParam::Center => "center",
            PulseParam::Width => "width",
            PulseParam::ChirpRate => "chirp",
        }
    }
}

/// A pulse family with 1–6 free box-bounded parameters.
#[derive(Debug, Clone)]
pub struct PulseSearchSpace {
    pub base: DrivePulse,
    pub free: Vec<(PulseParam, (f64, f64))>,
}

impl PulseSearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.free.is_empty() || self.free.len() > 6 {
            return Err(SimError::SpecError(format!(
                "pulse search needs 1–6 free parameters, got {}",
                self.free.len()
            )));
        }
        for (p, (lo, hi)) in &self.free {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SimError::SpecError(format!("bad bounds for {}", p.name())));
            }
            let applicable = match p {
                PulseParam::Ramp => matches!(self.base.shape, PulseShape::Sin2Ramp { .. }),
                PulseParam::Center | PulseParam::Width => {
                    matches!(self.base.shape, PulseShape::Gaussian { .. })
                }
                _ => !matches!(self.base.shape, PulseShape::PiecewiseLinear { .. }) || *p != PulseParam::Duration,
            };
            if !applicable {
                return Err(SimError::SpecError(format!(
                    "parameter {} does not apply to this pulse family",
                    p.name()
                )));
            }
        }
        Ok(())
    }

    /// Instantiate the pulse at a parameter vector (already inside the
    /// box). The ramp is clipped to the duration when both are free.
    pub fn build(&self, x: &[f64]) -> DrivePulse {
        let mut pulse = self.base.clone();
        for ((param, _), &v) in self.free.iter().zip(x) {
            match param {
                PulseParam::OmegaMax => pulse.omega_max = v,
                PulseParam::Duration => pulse.duration = v,
                PulseParam::ChirpRate => pulse.delta_u_chirp = v,
                PulseParam::Ramp => {
                    if let PulseShape::Sin2Ramp { ramp } = &mut pulse.shape {
                        *ramp = v;
                    }
                }
                PulseParam::Center => {
                    if let PulseShape::Gaussian { center, .. } = &mut pulse.shape {
                        *center = v;
                    }
                }
                PulseParam::Width => {
                    if let PulseShape::Gaussian { width, .. } = &mut pulse.shape {
                        *width = v;
                    }
                }
            }
        }
        if let PulseShape::Sin2Ramp { ramp } = &mut pulse.shape {
            *ramp = ramp.min(pulse.duration);
        }
        pulse
    }
}

fn clamp_to_box(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, (lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Maximize the master-solver P_S over a pulse family by Nelder–Mead with
/// seeded random restarts.
///
/// `budget` caps the total number of objective evaluations; when it runs
/// out the best point so far is returned with `converged = false`. Any
/// evaluation exceeding the closed-form ceiling by more than 1e-6 aborts
/// with `BoundViolation` since it can only come from a solver bug.
pub fn optimize_pulse(
    rates: &ValidatedRateSet,
    space: &PulseSearchSpace,
    budget: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<OptimizationOutcome> {
    space.validate()?;
    if budget == 0 {
        return Err(SimError::SpecError("evaluation budget must be at least 1".into()));
    }
    let dim = space.free.len();
    let bounds: Vec<(f64, f64)> = space.free.iter().map(|(_, b)| *b).collect();
    let ceiling = bounds::ps_upper(rates) + 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);

    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut trace: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut evals = 0usize;

    let eval = |x: &[f64],
                cache: &mut HashMap<Vec<u64>, f64>,
                trace: &mut Vec<(Vec<f64>, f64)>,
                evals: &mut usize|
     -> Result<f64> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let pulse = space.build(x);
        pulse.validate()?;
        *evals += 1;
        let v = match success_probability(rates, &pulse, Solver::Master, opts) {
            Ok(v) => v,
            Err(SimError::NotConverged { .. }) | Err(SimError::ToleranceNotMet { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        if v > ceiling {
            return Err(SimError::BoundViolation { p_s: v, bound: ceiling - 1e-6 });
        }
        cache.insert(key, v);
        trace.push((x.to_vec(), v));
        Ok(v)
    };

    // Nelder–Mead coefficients
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA_E: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink
    const SPREAD_TOL: f64 = 1e-6;

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let max_restarts = 4usize;

    'restarts: for _ in 0..max_restarts {
        if evals >= budget {
            break;
        }
        // random start, orthogonal simplex at 25% of each box span
        let x0: Vec<f64> = bounds.iter().map(|(lo, hi)| lo + (hi - lo) * unit()).collect();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        {
            let f0 = eval(&x0, &mut cache, &mut trace, &mut evals)?;
            simplex.push((x0.clone(), f0));
        }
        for i in 0..dim {
            if evals >= budget {
                update_best(&mut best, &simplex, false);
                break 'restarts;
            }
            let (lo, hi) = bounds[i];
            let step = 0.25 * (hi - lo);
            let mut xi = x0.clone();
            xi[i] = if xi[i] + step <= hi { xi[i] + step } else { xi[i] - step };
            let fi = eval(&xi, &mut cache, &mut trace, &mut evals)?;
            simplex.push((xi, fi));
        }

        let mut converged_here = false;
        while evals < budget {
            // maximize: sort descending by value
            simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            let spread = simplex[0].1 - simplex[dim].1;
            if spread.abs() < SPREAD_TOL {
                converged_here = true;
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();

            let mut xr: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + ALPHA * (centroid[j] - worst.0[j]))
                .collect();
            clamp_to_box(&mut xr, &bounds);
            let fr = eval(&xr, &mut cache, &mut trace, &mut evals)?;

            if fr > simplex[0].1 {
                // try expanding
                let mut xe: Vec<f64> = (0..dim)
                    .map(|j| centroid[j] + GAMMA_E * (xr[j] - centroid[j]))
                    .collect();
                clamp_to_box(&mut xe, &bounds);
                let fe = if evals < budget { eval(&xe, &mut cache, &mut trace, &mut evals)? } else { f64::NEG_INFINITY };
                simplex[dim] = if fe > fr { (xe, fe) } else { (xr, fr) };
            } else if fr > simplex[dim - 1].1 {
                simplex[dim] = (xr, fr);
            } else {
                let mut xc: Vec<f64> = (0..dim)
                    .map(|j| centroid[j] + RHO * (worst.0[j] - centroid[j]))
                    .collect();
                clamp_to_box(&mut xc, &bounds);
                let fc = eval(&xc, &mut cache, &mut trace, &mut evals)?;
                if fc > worst.1 {
                    simplex[dim] = (xc, fc);
                } else {
                    // shrink toward the best vertex
                    let best_x = simplex[0].0.clone();
                    for v in simplex.iter_mut().skip(1) {
                        for (vj, bj) in v.0.iter_mut().zip(&best_x) {
                            *vj = bj + SIGMA * (*vj - bj);
                        }
                        if evals >= budget {
                            break;
                        }
                        v.1 = eval(&v.0, &mut cache, &mut trace, &mut evals)?;
                    }
                }
            }
        }
        update_best(&mut best, &simplex, converged_here);
    }

    let (best_params, best_value, converged) =
        best.ok_or_else(|| SimError::SpecError("optimization produced no evaluations".into()))?;
    Ok(OptimizationOutcome { best_params, best_value, evaluations: evals, converged, trace })
}

fn update_best(best: &mut Option<(Vec<f64>, f64, bool)>, simplex: &[(Vec<f64>, f64)], converged: bool) {
    if let Some((x, f)) = simplex
        .iter()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    {
        match best {
            Some((_, bf, _)) if *bf >= *f => {}
            _ => *best = Some((x.clone(), *f, converged)),
        }
    }
}

/// A parameter axis a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    G,
    KappaIn,
    KappaEx,
    Gamma,
    RU,
    DeltaE,
    DeltaU,
    OmegaMax,
    Duration,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::G => "g",
            SweepParam::KappaIn => "kappa_in",
            SweepParam::KappaEx => "kappa_ex",
            SweepParam::Gamma => "gamma",
            SweepParam::RU => "r_u",
            SweepParam::DeltaE => "delta_e",
            SweepParam::DeltaU => "delta_u",
            SweepParam::OmegaMax => "omega_max",
            SweepParam::Duration => "duration",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "g" => SweepParam::G,
            "kappa_in" => SweepParam::KappaIn,
            "kappa_ex" => SweepParam::KappaEx,
            "gamma" => SweepParam::Gamma,
            "r_u" => SweepParam::RU,
            "delta_e" => SweepParam::DeltaE,
            "delta_u" => SweepParam::DeltaU,
            "omega_max" => SweepParam::OmegaMax,
            "duration" => SweepParam::Duration,
            other => return Err(SimError::SpecError(format!("unknown sweep parameter '{other}'"))),
        })
    }
}

/// Grid sweep specification: a baseline configuration plus one or two
/// strictly monotone parameter axes (rows follow grid order, the second
/// axis fastest).
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: RateSet,
    pub pulse: DrivePulse,
    pub solver: Solver,
    pub opts: SimOptions,
    pub vary: Vec<(SweepParam, Vec<f64>)>,
}

/// One evaluated grid point. `error` is set (and the solver columns are
/// `None`) when the row's solve failed; the sweep itself keeps going.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Varied values, axis order.
    pub values: Vec<f64>,
    pub p_s: Option<f64>,
    /// Monte Carlo standard error, when that solver ran.
    pub stderr: Option<f64>,
    pub ps_upper: f64,
    pub pf_lower: f64,
    pub eta_esc: f64,
    pub c: f64,
    pub c_in: f64,
    pub adiabaticity: Option<f64>,
    pub p_rep: Option<f64>,
    pub error: Option<String>,
}

fn apply_param(base: &RateSet, pulse: &DrivePulse, param: SweepParam, v: f64) -> (RateSet, DrivePulse) {
    let mut rates = *base;
    let mut pulse = pulse.clone();
    match param {
        SweepParam::G => rates.g = v,
        SweepParam::KappaIn => rates.kappa_in = v,
        SweepParam::KappaEx => rates.kappa_ex = v,
        SweepParam::Gamma => rates.gamma = v,
        SweepParam::RU => {
            // keep the other two branches in proportion
            let rest = rates.r_g + rates.r_o;
            if rest > 0.0 {
                let scale = (1.0 - v) / rest;
                rates.r_g *= scale;
                rates.r_o *= scale;
            } else {
                rates.r_g = 1.0 - v;
            }
            rates.r_u = v;
        }
        SweepParam::DeltaE => rates.delta_e = v,
        SweepParam::DeltaU => rates.delta_u = v,
        SweepParam::OmegaMax => pulse.omega_max = v,
        SweepParam::Duration => {
            if let PulseShape::Sin2Ramp { ramp } = &mut pulse.shape {
                *ramp = ramp.min(v);
            }
            pulse.duration = v;
        }
    }
    (rates, pulse)
}

fn run_row(spec: &SweepSpec, values: &[f64]) -> SweepRow {
    let mut rates_raw = spec.base;
    let mut pulse = spec.pulse.clone();
    for ((param, _), &v) in spec.vary.iter().zip(values) {
        let (r, p) = apply_param(&rates_raw, &pulse, *param, v);
        rates_raw = r;
        pulse = p;
    }

    let mut row = SweepRow {
        values: values.to_vec(),
        p_s: None,
        stderr: None,
        ps_upper: f64::NAN,
        pf_lower: f64::NAN,
        eta_esc: f64::NAN,
        c: f64::NAN,
        c_in: f64::NAN,
        adiabaticity: None,
        p_rep: None,
        error: None,
    };

    let rates = match rates_raw.validate() {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (c, c_in) = bounds::cooperativities(&rates);
    row.c = c;
    row.c_in = c_in;
    row.eta_esc = rates.kappa_ex() / rates.kappa();
    row.ps_upper = bounds::ps_upper(&rates);
    row.pf_lower = bounds::pf_lower(c_in, rates.r_u()).unwrap_or(f64::NAN);

    let stop = spec.opts.stop_for(&pulse, &rates);
    let result = (|| -> Result<()> {
        match spec.solver {
            Solver::Amplitudes => {
                let a = evolve_amplitudes(&rates, &pulse, &stop, &spec.opts.tol)?;
                row.p_s = Some(a.ps_norep);
                row.adiabaticity = Some(adiabaticity(&a, &rates));
            }
            Solver::Master => {
                let m = evolve_master(&rates, &pulse, &stop, &spec.opts.tol)?;
                let a = evolve_amplitudes(&rates, &pulse, &stop, &spec.opts.tol)?;
                row.p_s = Some(m.ps_total);
                row.adiabaticity = Some(adiabaticity(&a, &rates));
                row.p_rep = Some(repump_contribution(&m, &a)?);
            }
            Solver::MonteCarlo => {
                let s = run_trajectories(&rates, &pulse, &stop, &spec.opts.tol, spec.opts.n_samples, spec.opts.seed)?;
                row.p_s = Some(s.p_success_hat);
                row.stderr = Some(s.stderr);
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
        row.p_s = None;
        row.stderr = None;
        row.adiabaticity = None;
        row.p_rep = None;
    }
    row
}

/// Evaluate a sweep. Rows are independent (evaluated in parallel when the
/// `parallel` feature is on) and returned in grid order; per-row failures
/// are recorded in the row, not propagated.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.vary.is_empty() {
        return Err(SimError::SpecError("sweep has no varying parameter".into()));
    }
    if spec.vary.len() > 2 {
        return Err(SimError::SpecError("sweep supports at most two axes".into()));
    }
    for (p, grid) in &spec.vary {
        if grid.is_empty() {
            return Err(SimError::SpecError(format!("empty grid for '{}'", p.name())));
        }
        let increasing = grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(SimError::SpecError(format!("grid for '{}' is not strictly monotone", p.name())));
        }
    }
    spec.pulse.validate()?;

    let points: Vec<Vec<f64>> = if spec.vary.len() == 1 {
        spec.vary[0].1.iter().map(|&v| vec![v]).collect()
    } else {
        let mut pts = Vec::with_capacity(spec.vary[0].1.len() * spec.vary[1].1.len());
        for &a in &spec.vary[0].1 {
            for &b in &spec.vary[1].1 {
                pts.push(vec![a, b]);
            }
        }
        pts
    };

    #[cfg(feature = "parallel")]
    let rows = points.par_iter().map(|v| run_row(spec, v)).collect();
    #[cfg(not(feature = "parallel"))]
    let rows = points.iter().map(|v| run_row(spec, v)).collect();
    Ok(rows)
}

/// `n` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `n` logarithmically spaced values on `[lo, hi]`, `lo, hi > 0`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (la, lb) = (lo.ln(), hi.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}
