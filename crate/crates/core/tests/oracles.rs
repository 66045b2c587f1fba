//! Independent numerical oracles for the solvers.
//!
//! Nothing here calls the production integrator: the fixed-step
//! reference transcribes the amplitude equations by hand, and the
//! renewal oracle rebuilds the repumping ledger from restarted no-jump
//! evolutions.

use num_complex::Complex64;
use sps_core::model::{DrivePulse, RateSet, StopRule, ToleranceSpec};
use sps_core::{evolve_amplitudes, evolve_master, repump_contribution, run_trajectories};

/// Classic RK4 on the three amplitude equations with constant drive,
/// carrying I_g as a quadrature. Written directly from
/// dα_u/dt = −iΔ_u α_u − Ω α_e, dα_e/dt = −(γ+iΔ_e)α_e + Ω α_u + g α_g,
/// dα_g/dt = −κ α_g − g α_e.
struct Rk4State {
    alpha: [Complex64; 3],
    i_g: f64,
}

#[allow(clippy::too_many_arguments)]
fn rk4_phase(
    s: &mut Rk4State,
    g: f64,
    kappa: f64,
    gamma: f64,
    delta_e: f64,
    delta_u: f64,
    omega: f64,
    t0: f64,
    t1: f64,
    h_target: f64,
) {
    let i = Complex64::new(0.0, 1.0);
    let deriv = |a: &[Complex64; 3]| -> ([Complex64; 3], f64) {
        let du = -i * delta_u * a[0] - omega * a[1];
        let de = -(gamma + i * delta_e) * a[1] + omega * a[0] + g * a[2];
        let dg = -kappa * a[2] - g * a[1];
        ([du, de, dg], a[2].norm_sqr())
    };
    let span = t1 - t0;
    let n = (span / h_target).ceil() as usize;
    let h = span / n as f64;
    for _ in 0..n {
        let y0 = s.alpha;
        let (k1, q1) = deriv(&y0);
        let y1 = [y0[0] + 0.5 * h * k1[0], y0[1] + 0.5 * h * k1[1], y0[2] + 0.5 * h * k1[2]];
        let (k2, q2) = deriv(&y1);
        let y2 = [y0[0] + 0.5 * h * k2[0], y0[1] + 0.5 * h * k2[1], y0[2] + 0.5 * h * k2[2]];
        let (k3, q3) = deriv(&y2);
        let y3 = [y0[0] + h * k3[0], y0[1] + h * k3[1], y0[2] + h * k3[2]];
        let (k4, q4) = deriv(&y3);
        for c in 0..3 {
            s.alpha[c] = y0[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        s.i_g += h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
    }
}

#[test]
fn ps_norep_matches_fixed_step_rk4_reference() {
    let g = 10.0;
    let kappa_in = 1.0;
    let kappa_ex = 101f64.sqrt();
    let gamma = 1.0;
    let omega = 0.5;
    let duration = 50.0;

    let rates = RateSet::new(g, kappa_in, kappa_ex, gamma, 0.0, 1.0, 0.0).validate().unwrap();
    let pulse = DrivePulse::constant(omega, duration);
    let stop = StopRule { t_max: 80.0, eps_stop: 1e-12 };
    let result = evolve_amplitudes(&rates, &pulse, &stop, &ToleranceSpec::default()).unwrap();

    let kappa = kappa_in + kappa_ex;
    let mut oracle = Rk4State { alpha: [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)], i_g: 0.0 };
    rk4_phase(&mut oracle, g, kappa, gamma, 0.0, 0.0, omega, 0.0, duration, 1e-4);
    rk4_phase(&mut oracle, g, kappa, gamma, 0.0, 0.0, 0.0, duration, result.t_end, 1e-4);
    let ps_oracle = 2.0 * kappa_ex * oracle.i_g;

    let diff = (result.ps_norep - ps_oracle).abs();
    assert!(diff <= 1e-7, "ps_norep {} vs oracle {} (diff {diff:.3e})", result.ps_norep, ps_oracle);
    assert!(result.ps_norep > 0.01, "drive this weak should still emit something");
}

/// Success probability for a restart at time `s` under a constant pulse
/// that ends at `t_off`, via the renewal (Volterra) equation
/// P(s) = q_ex(s) + ∫ f_u(s,t) P(t) dt solved backwards on a grid.
#[test]
fn repump_contribution_matches_renewal_oracle() {
    let gamma = 1.0;
    let g = 3.0;
    let kappa_in = 0.2;
    let kappa_ex = 2.0;
    let r_u = 0.5;
    let omega = 1.0;
    let duration = 30.0;

    let rates = RateSet::new(g, kappa_in, kappa_ex, gamma, r_u, 0.5, 0.0).validate().unwrap();
    let pulse = DrivePulse::constant(omega, duration);
    let stop = StopRule { t_max: 60.0, eps_stop: 1e-12 };
    let tol = ToleranceSpec::default();

    let m = evolve_master(&rates, &pulse, &stop, &tol).unwrap();
    let a = evolve_amplitudes(&rates, &pulse, &stop, &tol).unwrap();
    let p_rep = repump_contribution(&m, &a).unwrap();

    // Restart grid over [0, duration]; P(s) = 0 for s ≥ duration (no
    // drive left, the atom stays parked in |u⟩).
    let n_grid = 601usize;
    let hs = duration / (n_grid - 1) as f64;
    let mut p = vec![0.0f64; n_grid];
    // interpolate P at absolute time t
    let p_at = |p: &[f64], t: f64| -> f64 {
        if t >= duration {
            return 0.0;
        }
        let x = t / hs;
        let j = (x.floor() as usize).min(n_grid - 2);
        let f = x - j as f64;
        p[j] * (1.0 - f) + p[j + 1] * f
    };

    for j in (0..n_grid - 1).rev() {
        let s = j as f64 * hs;
        let remaining = duration - s;
        let tail_pulse = DrivePulse::constant(omega, remaining);
        let tail_stop = StopRule { t_max: remaining + 30.0, eps_stop: 1e-12 };
        let run = evolve_amplitudes(&rates, &tail_pulse, &tail_stop, &tol).unwrap();
        let q_ex = run.ps_norep;
        // ∫ 2γ r_u |α_e(x)|² P(s + x) dx on the run's reporting grid
        let mut conv = 0.0;
        let ts = &run.ts;
        for w in 0..ts.len() - 1 {
            let dx = ts[w + 1] - ts[w];
            let f0 = 2.0 * gamma * r_u * run.alpha_e[w].norm_sqr() * p_at(&p, s + ts[w]);
            let f1 = 2.0 * gamma * r_u * run.alpha_e[w + 1].norm_sqr() * p_at(&p, s + ts[w + 1]);
            conv += 0.5 * dx * (f0 + f1);
        }
        p[j] = q_ex + conv;
    }

    let ps_oracle = p[0];
    let q_ex_full = a.ps_norep;
    let p_rep_oracle = ps_oracle - q_ex_full;

    let diff = (p_rep - p_rep_oracle).abs();
    assert!(
        diff <= 2e-3,
        "P_rep {} vs renewal oracle {} (diff {diff:.3e})",
        p_rep,
        p_rep_oracle
    );
    assert!(p_rep > 0.01, "repumping should contribute visibly at r_u = 0.5");
}

/// Monte Carlo statistical consistency: over 20 disjoint seeds the
/// ±2·stderr interval should cover the master-equation value at least
/// 18 times, and the mean repump count should match F_u.
#[test]
fn trajectory_coverage_and_repump_consistency() {
    let rates = RateSet::new(4.0, 0.6, 2.5, 1.0, 0.35, 0.5, 0.15).validate().unwrap();
    let pulse = DrivePulse::vstirap_sin(1.8, 18.0);
    let stop = StopRule::auto(&pulse, &rates);
    let tol = ToleranceSpec::new(1e-7, 1e-10);

    let m = evolve_master(&rates, &pulse, &stop, &ToleranceSpec::default()).unwrap();

    let n = 20_000u64;
    let mut covered = 0;
    let mut repump_ok = 0;
    for seed in 0..20u64 {
        let s = run_trajectories(&rates, &pulse, &stop, &tol, n, 1000 + seed).unwrap();
        if (s.p_success_hat - m.ps_total).abs() <= 2.0 * s.stderr {
            covered += 1;
        }
        // empirical variance of the per-trajectory repump count
        let mean = s.mean_repumps;
        let mut var = 0.0;
        for (k, &c) in s.repump_histogram.iter().enumerate() {
            var += c as f64 * (k as f64 - mean).powi(2);
        }
        var /= n as f64;
        let se_mean = (var / n as f64).sqrt();
        if (mean - m.f_u).abs() <= 3.0 * se_mean.max(1e-12) {
            repump_ok += 1;
        }
    }
    assert!(covered >= 18, "coverage {covered}/20 below 18/20");
    assert!(repump_ok >= 18, "repump-count agreement {repump_ok}/20 below 18/20");
}
