//! Quantum-trajectory (Monte Carlo wave-function) unraveling.
//!
//! Each trajectory evolves the conditioned amplitudes with decaying norm;
//! a jump fires when ⟨ψ|ψ⟩ crosses a uniform variate, with the channel
//! drawn proportional to `{2γr_u|α_e|², 2γr_g|α_e|², 2γr_o|α_e|²,
//! 2κ_ex|α_g|², 2κ_in|α_g|²}`. A repump jump resets to `|u,0⟩` and
//! continues; every other channel terminates the trajectory.
//!
//! Reproducibility: trajectory `i` runs on `ChaCha8` keyed by the run
//! seed with stream index `i`, so the sample set is independent of
//! execution order and worker count, and merged tallies are bit-identical
//! for a fixed `(seed, n_samples)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SimError};
use crate::model::{amplitude_generator, DrivePulse, StopRule, ToleranceSpec, ValidatedRateSet};
use crate::ode::{Dopri5, SegmentOutcome};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// State layout: `[Re α_u, Im α_u, Re α_e, Im α_e, Re α_g, Im α_g]`.
const N: usize = 6;

/// Maximum tolerated fraction of trajectories that hit `t_max` without a
/// terminal decision while still carrying excitation.
pub const MAX_UNCONVERGED_FRACTION: f64 = 1e-3;

/// Terminal tallies per jump channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutcomeCounts {
    /// Cavity photon emitted through the output coupler (success).
    pub external: u64,
    /// Photon lost to internal cavity loss.
    pub internal: u64,
    /// Spontaneous decay into |g⟩.
    pub spont_g: u64,
    /// Spontaneous decay into the spectator ground state |o⟩.
    pub spont_o: u64,
    /// No terminal jump: the atom parked in |u⟩ (or `t_max` was hit).
    pub unterminated: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.external + self.internal + self.spont_g + self.spont_o + self.unterminated
    }
}

/// Aggregated statistics of a trajectory run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub n_samples: u64,
    /// Fraction of external-emission terminations.
    pub p_success_hat: f64,
    /// Binomial standard error `√(p̂(1−p̂)/n)`.
    pub stderr: f64,
    pub outcome_counts: OutcomeCounts,
    /// Subset of `unterminated` that still carried excitation at `t_max`.
    pub n_unconverged: u64,
    /// `repump_histogram[k]` counts trajectories with exactly k repump
    /// jumps.
    pub repump_histogram: Vec<u64>,
    /// Mean number of repump jumps per trajectory.
    pub mean_repumps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Terminal {
    External,
    Internal,
    SpontG,
    SpontO,
    Unterminated { converged: bool },
}

#[derive(Debug, Clone, Default)]
struct Tally {
    counts: OutcomeCounts,
    unconverged: u64,
    repump_hist: Vec<u64>,
    repump_total: u64,
}

impl Tally {
    fn record(&mut self, outcome: Terminal, repumps: u64) {
        match outcome {
            Terminal::External => self.counts.external += 1,
            Terminal::Internal => self.counts.internal += 1,
            Terminal::SpontG => self.counts.spont_g += 1,
            Terminal::SpontO => self.counts.spont_o += 1,
            Terminal::Unterminated { converged } => {
                self.counts.unterminated += 1;
                if !converged {
                    self.unconverged += 1;
                }
            }
        }
        let k = repumps as usize;
        if self.repump_hist.len() <= k {
            self.repump_hist.resize(k + 1, 0);
        }
        self.repump_hist[k] += 1;
        self.repump_total += repumps;
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, other: Tally) -> Tally {
        self.counts.external += other.counts.external;
        self.counts.internal += other.counts.internal;
        self.counts.spont_g += other.counts.spont_g;
        self.counts.spont_o += other.counts.spont_o;
        self.counts.unterminated += other.counts.unterminated;
        self.unconverged += other.unconverged;
        if self.repump_hist.len() < other.repump_hist.len() {
            self.repump_hist.resize(other.repump_hist.len(), 0);
        }
        for (i, c) in other.repump_hist.iter().enumerate() {
            self.repump_hist[i] += c;
        }
        self.repump_total += other.repump_total;
        self
    }
}

fn norm_sq(y: &[f64; N]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

fn residual(y: &[f64; N]) -> f64 {
    y[2] * y[2] + y[3] * y[3] + y[4] * y[4] + y[5] * y[5]
}

/// Uniform in [0, 1) from the top 53 bits.
fn next_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

fn run_one(
    rates: &ValidatedRateSet,
    pulse: &DrivePulse,
    stop: &StopRule,
    segments: &[(f64, f64, bool)],
    ode: &Dopri5,
    seed: u64,
    index: u64,
) -> Result<(Terminal, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);

    let mut y = [0.0; N];
    y[0] = 1.0;
    let mut t = 0.0;
    let mut threshold = next_unit(&mut rng);
    let mut repumps: u64 = 0;
    let eps = stop.eps_stop;
    let stop_pred = move |_t: f64, y: &[f64; N]| residual(y) < eps;

    let mut seg_idx = 0;
    while seg_idx < segments.len() {
        let (a, b, driven) = segments[seg_idx];
        if t >= b {
            seg_idx += 1;
            continue;
        }
        let start = t.max(a);
        let mut f = |t: f64, y: &[f64; N], dy: &mut [f64; N]| {
            let omega = if driven { pulse.omega_in_envelope(t) } else { 0.0 };
            let delta_u = pulse.delta_u(t, rates.delta_u());
            let m = amplitude_generator(rates, omega, delta_u);
            let (au_r, au_i, ae_r, ae_i, ag_r, ag_i) = (y[0], y[1], y[2], y[3], y[4], y[5]);
            for i in 0..3 {
                let re = m[i][0].re * au_r - m[i][0].im * au_i
                    + m[i][1].re * ae_r
                    - m[i][1].im * ae_i
                    + m[i][2].re * ag_r
                    - m[i][2].im * ag_i;
                let im = m[i][0].re * au_i + m[i][0].im * au_r
                    + m[i][1].re * ae_i
                    + m[i][1].im * ae_r
                    + m[i][2].re * ag_i
                    + m[i][2].im * ag_r;
                dy[2 * i] = re;
                dy[2 * i + 1] = im;
            }
        };
        let event = move |_t: f64, y: &[f64; N]| norm_sq(y) - threshold;
        let pred: Option<crate::ode::StopFn<'_, N>> = if driven { None } else { Some(&stop_pred) };
        let end = ode.integrate_segment(&mut f, start, y, b, None, pred, Some(&event))?;
        t = end.t;
        y = end.y;
        match end.outcome {
            SegmentOutcome::Event => {
                let ae2 = y[2] * y[2] + y[3] * y[3];
                let ag2 = y[4] * y[4] + y[5] * y[5];
                let two_gamma = 2.0 * rates.gamma();
                let weights = [
                    two_gamma * rates.r_u() * ae2,
                    two_gamma * rates.r_g() * ae2,
                    two_gamma * rates.r_o() * ae2,
                    2.0 * rates.kappa_ex() * ag2,
                    2.0 * rates.kappa_in() * ag2,
                ];
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    // norm cannot cross without decay flux; treat as stalled
                    return Ok((Terminal::Unterminated { converged: true }, repumps));
                }
                let u = next_unit(&mut rng) * total;
                let mut acc = 0.0;
                let mut channel = 4;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        channel = i;
                        break;
                    }
                }
                match channel {
                    0 => {
                        // repump: restart from |u,0⟩ with a fresh threshold
                        y = [0.0; N];
                        y[0] = 1.0;
                        threshold = next_unit(&mut rng);
                        repumps += 1;
                    }
                    1 => return Ok((Terminal::SpontG, repumps)),
                    2 => return Ok((Terminal::SpontO, repumps)),
                    3 => return Ok((Terminal::External, repumps)),
                    _ => return Ok((Terminal::Internal, repumps)),
                }
            }
            SegmentOutcome::Stopped => {
                return Ok((Terminal::Unterminated { converged: true }, repumps));
            }
            SegmentOutcome::ReachedEnd => {
                seg_idx += 1;
            }
        }
    }
    let converged = residual(&y) < stop.eps_stop;
    Ok((Terminal::Unterminated { converged }, repumps))
}

/// Run `n_samples` independent trajectories.
///
/// Deterministic for fixed `(seed, n_samples)` regardless of worker
/// count. Fails with `NotConverged` if more than
/// [`MAX_UNCONVERGED_FRACTION`] of the trajectories hit `t_max` while
/// still excited.
pub fn run_trajectories(
    rates: &ValidatedRateSet,
    pulse: &DrivePulse,
    stop: &StopRule,
    tol: &ToleranceSpec,
    n_samples: u64,
    seed: u64,
) -> Result<TrajectoryStats> {
    if n_samples == 0 {
        return Err(SimError::SpecError("n_samples must be at least 1".into()));
    }
    pulse.validate()?;
    let ode = Dopri5::new(tol.rtol, tol.atol);
    let segments = pulse.segment_grid(stop.t_max);

    #[cfg(feature = "parallel")]
    let tally = (0..n_samples)
        .into_par_iter()
        .map(|i| run_one(rates, pulse, stop, &segments, &ode, seed, i))
        .try_fold(Tally::default, |mut acc, r| {
            r.map(|(outcome, repumps)| {
                acc.record(outcome, repumps);
                acc
            })
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;

    #[cfg(not(feature = "parallel"))]
    let tally = {
        let mut acc = Tally::default();
        for i in 0..n_samples {
            let (outcome, repumps) = run_one(rates, pulse, stop, &segments, &ode, seed, i)?;
            acc.record(outcome, repumps);
        }
        acc
    };

    let n = n_samples as f64;
    if tally.unconverged as f64 / n >= MAX_UNCONVERGED_FRACTION {
        return Err(SimError::NotConverged {
            t: stop.t_max,
            residual: tally.unconverged as f64 / n,
        });
    }
    let p = tally.counts.external as f64 / n;
    Ok(TrajectoryStats {
        n_samples,
        p_success_hat: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        outcome_counts: tally.counts,
        n_unconverged: tally.unconverged,
        repump_histogram: tally.repump_hist,
        mean_repumps: tally.repump_total as f64 / n,
    })
}
