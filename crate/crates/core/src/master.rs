//! Conditioned-plus-reinjection master equation on the reachable subspace.
//!
//! From `|u,0⟩` only five states are reachable: the single-excitation
//! block `(|u,0⟩, |e,0⟩, |g,1⟩)` and the absorbing states `|g,0⟩`,
//! `|o,0⟩`. Coherences to the absorbing states are never generated (no
//! Hamiltonian coupling, and jumps destroy them), so the state is a 3×3
//! Hermitian block plus two populations. The block evolves under
//! `Mρ + ρM†` with `M = −iℋ/ħ` plus the repumping reinjection
//! `2γr_u ρ_ee` into `ρ_uu`; each jump channel's cumulative probability is
//! carried as a flux quadrature.

use num_complex::Complex64;

use crate::amplitudes::{AmplitudeResult, GRID_POINTS};
use crate::error::{Result, SimError};
use crate::model::{amplitude_generator, run_fingerprint, DrivePulse, StopRule, ToleranceSpec, ValidatedRateSet};
use crate::ode::{DenseSolution, Dopri5, SegmentOutcome};

/// State layout (16 reals): `ρ_uu, ρ_ee, ρ_g1g1`, Re/Im `ρ_ue`, Re/Im
/// `ρ_ug`, Re/Im `ρ_eg`, `p_g0, p_o0`, `F_ex, F_in, F_g, F_o, F_u`.
const N: usize = 16;

const I_PUU: usize = 0;
const I_PEE: usize = 1;
const I_PGG: usize = 2;
const I_PG0: usize = 9;
const I_PO0: usize = 10;
const I_FEX: usize = 11;
const I_FIN: usize = 12;
const I_FG: usize = 13;
const I_FO: usize = 14;
const I_FU: usize = 15;

/// Time series sampled on the uniform reporting grid.
#[derive(Debug, Clone, Default)]
pub struct MasterSeries {
    pub ts: Vec<f64>,
    pub pop_u: Vec<f64>,
    pub pop_e: Vec<f64>,
    pub pop_g1: Vec<f64>,
    pub p_g0: Vec<f64>,
    pub p_o0: Vec<f64>,
    pub f_ex: Vec<f64>,
    pub f_in: Vec<f64>,
    pub f_g: Vec<f64>,
    pub f_o: Vec<f64>,
    pub f_u: Vec<f64>,
    /// Smallest eigenvalue of the 3×3 block at each sample.
    pub min_eig: Vec<f64>,
    /// External photon flux density `2κ_ex ρ_g1,g1`.
    pub emission_flux: Vec<f64>,
}

/// Result of one master-equation run.
#[derive(Debug, Clone)]
pub struct MasterResult {
    pub series: MasterSeries,
    /// Final 3×3 Hermitian block over `(|u,0⟩, |e,0⟩, |g,1⟩)`.
    pub rho_block: [[Complex64; 3]; 3],
    pub p_g0: f64,
    pub p_o0: f64,
    /// Cumulative jump probabilities per channel.
    pub f_ex: f64,
    pub f_in: f64,
    pub f_g: f64,
    pub f_o: f64,
    /// Cumulative repump probability (reinjected, not absorbing).
    pub f_u: f64,
    /// Success probability: `F_ex` at termination.
    pub ps_total: f64,
    pub t_end: f64,
    pub fingerprint: u64,
}

fn unpack_rho(y: &[f64; N]) -> [[Complex64; 3]; 3] {
    let ue = Complex64::new(y[3], y[4]);
    let ug = Complex64::new(y[5], y[6]);
    let eg = Complex64::new(y[7], y[8]);
    [
        [Complex64::new(y[0], 0.0), ue, ug],
        [ue.conj(), Complex64::new(y[1], 0.0), eg],
        [ug.conj(), eg.conj(), Complex64::new(y[2], 0.0)],
    ]
}

fn rhs_into(
    rates: &ValidatedRateSet,
    pulse: &DrivePulse,
    driven: bool,
    t: f64,
    y: &[f64; N],
    dy: &mut [f64; N],
) {
    let omega = if driven { pulse.omega_in_envelope(t) } else { 0.0 };
    let delta_u = pulse.delta_u(t, rates.delta_u());
    let m = amplitude_generator(rates, omega, delta_u);
    let rho = unpack_rho(y);

    // d = M ρ + ρ M†
    let mut d = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..3 {
                acc += m[i][k] * rho[k][j] + rho[i][k] * m[j][k].conj();
            }
            d[i][j] = acc;
        }
    }

    let gamma = rates.gamma();
    let rho_ee = y[I_PEE];
    let rho_gg = y[I_PGG];
    // repump reinjection
    let reinject = 2.0 * gamma * rates.r_u() * rho_ee;

    dy[I_PUU] = d[0][0].re + reinject;
    dy[I_PEE] = d[1][1].re;
    dy[I_PGG] = d[2][2].re;
    dy[3] = d[0][1].re;
    dy[4] = d[0][1].im;
    dy[5] = d[0][2].re;
    dy[6] = d[0][2].im;
    dy[7] = d[1][2].re;
    dy[8] = d[1][2].im;

    let spont_g = 2.0 * gamma * rates.r_g() * rho_ee;
    let spont_o = 2.0 * gamma * rates.r_o() * rho_ee;
    let flux_ex = 2.0 * rates.kappa_ex() * rho_gg;
    let flux_in = 2.0 * rates.kappa_in() * rho_gg;

    dy[I_PG0] = flux_ex + flux_in + spont_g;
    dy[I_PO0] = spont_o;
    dy[I_FEX] = flux_ex;
    dy[I_FIN] = flux_in;
    dy[I_FG] = spont_g;
    dy[I_FO] = spont_o;
    dy[I_FU] = reinject;
}

/// Smallest eigenvalue of a 3×3 Hermitian matrix.
///
/// Cyclic Jacobi on the real symmetric 6×6 embedding
/// `[[Re A, −Im A], [Im A, Re A]]`; accurate near degenerate spectra
/// where the cubic closed form loses ~1e-8, which matters because the
/// positivity floor checked downstream sits at −1e-10.
#[allow(clippy::needless_range_loop)]
pub fn min_eigenvalue_hermitian3(a: &[[Complex64; 3]; 3]) -> f64 {
    let mut m = [[0.0f64; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i][j].re;
            m[i][j + 3] = -a[i][j].im;
            m[i + 3][j] = a[i][j].im;
            m[i + 3][j + 3] = a[i][j].re;
        }
    }
    let mut scale = 0.0f64;
    for row in &m {
        for v in row {
            scale += v * v;
        }
    }
    let scale = scale.sqrt().max(f64::MIN_POSITIVE);

    for _ in 0..30 {
        let mut off = 0.0;
        for i in 0..6 {
            for j in (i + 1)..6 {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..5 {
            for q in (p + 1)..6 {
                let apq = m[p][q];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let tau = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..6 {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..6 {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
            }
        }
    }
    (0..6).map(|i| m[i][i]).fold(f64::INFINITY, f64::min)
}

/// Integrate the master equation from `ρ(0) = |u,0⟩⟨u,0|`.
pub fn evolve_master(
    rates: &ValidatedRateSet,
    pulse: &DrivePulse,
    stop: &StopRule,
    tol: &ToleranceSpec,
) -> Result<MasterResult> {
    pulse.validate()?;
    let ode = Dopri5::new(tol.rtol, tol.atol);
    let mut dense = DenseSolution::default();
    let mut y = [0.0; N];
    y[I_PUU] = 1.0;
    let mut t = 0.0;
    let eps = stop.eps_stop;
    let stop_pred = move |_t: f64, y: &[f64; N]| y[I_PEE] + y[I_PGG] < eps;

    for (a, b, driven) in pulse.segment_grid(stop.t_max) {
        let mut f = |t: f64, y: &[f64; N], dy: &mut [f64; N]| rhs_into(rates, pulse, driven, t, y, dy);
        let pred: Option<crate::ode::StopFn<'_, N>> = if driven { None } else { Some(&stop_pred) };
        let end = ode.integrate_segment(&mut f, a, y, b, Some(&mut dense), pred, None)?;
        t = end.t;
        y = end.y;
        if end.outcome == SegmentOutcome::Stopped {
            break;
        }
    }

    let res = y[I_PEE] + y[I_PGG];
    if res >= stop.eps_stop && t >= stop.t_max {
        return Err(SimError::NotConverged { t, residual: res });
    }

    let two_kex = 2.0 * rates.kappa_ex();
    let n = GRID_POINTS;
    let mut series = MasterSeries::default();
    for i in 0..n {
        let ti = t * i as f64 / (n - 1) as f64;
        let yi = dense.eval(ti);
        series.ts.push(ti);
        series.pop_u.push(yi[I_PUU]);
        series.pop_e.push(yi[I_PEE]);
        series.pop_g1.push(yi[I_PGG]);
        series.p_g0.push(yi[I_PG0]);
        series.p_o0.push(yi[I_PO0]);
        series.f_ex.push(yi[I_FEX]);
        series.f_in.push(yi[I_FIN]);
        series.f_g.push(yi[I_FG]);
        series.f_o.push(yi[I_FO]);
        series.f_u.push(yi[I_FU]);
        series.min_eig.push(min_eigenvalue_hermitian3(&unpack_rho(&yi)));
        series.emission_flux.push(two_kex * yi[I_PGG]);
    }

    Ok(MasterResult {
        series,
        rho_block: unpack_rho(&y),
        p_g0: y[I_PG0],
        p_o0: y[I_PO0],
        f_ex: y[I_FEX],
        f_in: y[I_FIN],
        f_g: y[I_FG],
        f_o: y[I_FO],
        f_u: y[I_FU],
        ps_total: y[I_FEX],
        t_end: t,
        fingerprint: run_fingerprint(rates, pulse, stop),
    })
}

/// Success probability contributed by repumping:
/// `P_rep = ps_total − ps_norep`, clamped at zero when within numerical
/// noise (−1e-9) of it.
///
/// Both results must come from identical `(rates, pulse, stop)` inputs.
pub fn repump_contribution(m: &MasterResult, a: &AmplitudeResult) -> Result<f64> {
    if m.fingerprint != a.fingerprint {
        return Err(SimError::MismatchedInputs(
            "master and amplitude runs used different rates/pulse/stop inputs".into(),
        ));
    }
    let p_rep = m.ps_total - a.ps_norep;
    if (-1e-9..0.0).contains(&p_rep) {
        return Ok(0.0);
    }
    Ok(p_rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitudes::evolve_amplitudes;
    use crate::model::RateSet;

    fn tol() -> ToleranceSpec {
        ToleranceSpec::default()
    }

    #[test]
    fn no_drive_is_stationary() {
        let rates = RateSet::new(2.0, 0.5, 1.5, 1.0, 0.3, 0.7, 0.0).validate().unwrap();
        let pulse = DrivePulse::constant(0.0, 4.0);
        let stop = StopRule::auto(&pulse, &rates);
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        assert!((m.rho_block[0][0].re - 1.0).abs() < 1e-12);
        assert!(m.f_ex.abs() < 1e-14 && m.f_u.abs() < 1e-14);
        assert!(m.p_g0.abs() < 1e-14 && m.p_o0.abs() < 1e-14);
    }

    #[test]
    fn perfect_repumping_lossless_cavity_always_succeeds() {
        // r_u = 1, κ_in = 0: external emission is the only absorbing channel.
        let rates = RateSet::new(2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0).validate().unwrap();
        let pulse = DrivePulse::constant(1.5, 200.0);
        let stop = StopRule { t_max: 400.0, eps_stop: 1e-12 };
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        assert!((m.ps_total - 1.0).abs() < 1e-6, "ps_total = {}", m.ps_total);
    }

    #[test]
    fn trace_and_channel_decomposition_close() {
        let rates = RateSet { delta_e: 0.3, ..RateSet::new(3.0, 0.5, 2.0, 1.0, 0.3, 0.5, 0.2) }
            .validate()
            .unwrap();
        let pulse = DrivePulse::sin2_ramp(2.0, 15.0, 6.0);
        let stop = StopRule::auto(&pulse, &rates);
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        let block_trace: f64 = m.rho_block[0][0].re + m.rho_block[1][1].re + m.rho_block[2][2].re;
        assert!((block_trace + m.p_g0 + m.p_o0 - 1.0).abs() <= 1e-8);
        assert!((m.f_ex + m.f_in + m.f_g - m.p_g0).abs() <= 1e-9);
        assert!((m.f_o - m.p_o0).abs() <= 1e-12);
        assert!((m.f_ex + m.f_in + m.f_g + m.f_o + block_trace - 1.0).abs() <= 1e-8);
        // trace closure on the whole sampled series
        for i in 0..m.series.ts.len() {
            let tr = m.series.pop_u[i] + m.series.pop_e[i] + m.series.pop_g1[i]
                + m.series.p_g0[i]
                + m.series.p_o0[i];
            assert!((tr - 1.0).abs() <= 1e-8, "sample {i}: trace {tr}");
        }
    }

    #[test]
    fn fluxes_are_monotone_and_block_stays_psd() {
        let rates = RateSet::new(4.0, 1.0, 2.0, 1.0, 0.4, 0.4, 0.2).validate().unwrap();
        let pulse = DrivePulse::vstirap_sin(2.0, 25.0);
        let stop = StopRule::auto(&pulse, &rates);
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        let fluxes = [&m.series.f_ex, &m.series.f_in, &m.series.f_g, &m.series.f_o, &m.series.f_u];
        for f in fluxes {
            for w in f.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "flux decreased: {} -> {}", w[0], w[1]);
            }
        }
        for (i, &e) in m.series.min_eig.iter().enumerate() {
            assert!(e >= -1e-10, "sample {i}: min eigenvalue {e}");
        }
    }

    #[test]
    fn without_repumping_master_matches_amplitudes() {
        let rates = RateSet { delta_e: -0.5, delta_u: 0.1, ..RateSet::new(5.0, 0.7, 3.0, 1.0, 0.0, 0.8, 0.2) }
            .validate()
            .unwrap();
        let pulse = DrivePulse::gaussian(1.2, 12.0, 6.0, 2.0);
        let stop = StopRule::auto(&pulse, &rates);
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        let a = evolve_amplitudes(&rates, &pulse, &stop, &tol()).unwrap();
        assert!(
            (m.ps_total - a.ps_norep).abs() <= 1e-8,
            "{} vs {}",
            m.ps_total,
            a.ps_norep
        );
        assert_eq!(repump_contribution(&m, &a).unwrap(), 0.0);
    }

    #[test]
    fn repump_contribution_rejects_mismatched_runs() {
        let rates = RateSet::new(3.0, 0.2, 2.0, 1.0, 0.5, 0.5, 0.0).validate().unwrap();
        let pulse = DrivePulse::constant(1.0, 10.0);
        let other_pulse = DrivePulse::constant(1.1, 10.0);
        let stop = StopRule::auto(&pulse, &rates);
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        let a = evolve_amplitudes(&rates, &other_pulse, &stop, &tol()).unwrap();
        assert!(matches!(repump_contribution(&m, &a), Err(SimError::MismatchedInputs(_))));
    }

    #[test]
    fn bound_compliance_with_repumping() {
        let rates = RateSet::new(3.0, 0.2, 2.0, 1.0, 0.5, 0.5, 0.0).validate().unwrap();
        let pulse = DrivePulse::constant(1.0, 30.0);
        let stop = StopRule::auto(&pulse, &rates);
        let m = evolve_master(&rates, &pulse, &stop, &tol()).unwrap();
        let c = rates.g().powi(2) / (2.0 * rates.kappa() * rates.gamma());
        let bound = rates.kappa_ex() / rates.kappa() * 2.0 * c / (1.0 + 2.0 * c - rates.r_u());
        assert!(m.ps_total <= bound + 1e-6, "{} > {}", m.ps_total, bound);
    }

    #[test]
    fn min_eigenvalue_closed_form_sanity() {
        let a = [
            [Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, -1.0), Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(5.0, 0.0)],
        ];
        // eigenvalues 1, 3, 5
        assert!((min_eigenvalue_hermitian3(&a) - 1.0).abs() < 1e-12);
        let diag = [
            [Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.6, 0.0)],
        ];
        assert!((min_eigenvalue_hermitian3(&diag) - 0.1).abs() < 1e-12);
    }
}
