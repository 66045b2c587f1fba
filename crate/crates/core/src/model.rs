//! Domain types, unit conventions, and the effective non-Hermitian
//! Hamiltonian of the driven Λ-system coupled to a lossy cavity.
//!
//! # Rate convention
//!
//! All rates are *amplitude* decay rates: the population of the excited
//! state |e⟩ decays at `2γ` and the cavity photon number at
//! `2κ = 2(κ_in + κ_ex)`, matching the jump-operator prefactors
//! `2γr_u, 2γr_g, 2γr_o, 2κ_ex, 2κ_in` of the master equation. Half the
//! literature uses the other convention; double-check before comparing
//! numbers.
//!
//! Rates are dimensionless by default (γ = 1 sets the time unit); any
//! consistent angular-frequency unit works since only ratios enter the
//! results.
//!
//! # Basis
//!
//! The single-excitation block is ordered `(|u,0⟩, |e,0⟩, |g,1⟩)`,
//! indices 0, 1, 2 everywhere.

use num_complex::Complex64;

use crate::error::{Result, SimError};

/// Index of |u,0⟩ in the single-excitation block.
pub const IDX_U: usize = 0;
/// Index of |e,0⟩ in the single-excitation block.
pub const IDX_E: usize = 1;
/// Index of |g,1⟩ in the single-excitation block.
pub const IDX_G1: usize = 2;

/// Maximum deviation of `r_u + r_g + r_o` from 1 that validation will
/// silently renormalize.
pub const BRANCHING_SUM_TOL: f64 = 1e-12;

/// All dynamical rates and detunings of the Λ-system/cavity.
///
/// `g`: atom–cavity coupling; `kappa_in`/`kappa_ex`: cavity internal and
/// external loss; `gamma`: amplitude decay rate of |e⟩; `r_u`, `r_g`,
/// `r_o`: branching ratios of the spontaneous decay into |u⟩, |g⟩ and the
/// spectator ground state |o⟩; `delta_e`/`delta_u`: one- and two-photon
/// detunings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    pub g: f64,
    pub kappa_in: f64,
    pub kappa_ex: f64,
    pub gamma: f64,
    pub r_u: f64,
    pub r_g: f64,
    pub r_o: f64,
    pub delta_e: f64,
    pub delta_u: f64,
}

impl RateSet {
    /// Resonant rate set with the given branching ratios.
    pub fn new(g: f64, kappa_in: f64, kappa_ex: f64, gamma: f64, r_u: f64, r_g: f64, r_o: f64) -> Self {
        Self { g, kappa_in, kappa_ex, gamma, r_u, r_g, r_o, delta_e: 0.0, delta_u: 0.0 }
    }

    /// Check all invariants and return the validated set.
    ///
    /// Branching ratios whose sum deviates from 1 by at most
    /// [`BRANCHING_SUM_TOL`] are renormalized; larger deviations are
    /// rejected. Idempotent.
    pub fn validate(self) -> Result<ValidatedRateSet> {
        let bad = |name: &str| Err(SimError::InvalidParameter(name.to_string()));
        if !(self.g > 0.0) || !self.g.is_finite() {
            return bad("g");
        }
        if !(self.kappa_in >= 0.0) || !self.kappa_in.is_finite() {
            return bad("kappa_in");
        }
        if !(self.kappa_ex >= 0.0) || !self.kappa_ex.is_finite() {
            return bad("kappa_ex");
        }
        if self.kappa_in + self.kappa_ex <= 0.0 {
            return bad("kappa");
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma");
        }
        for (name, r) in [("r_u", self.r_u), ("r_g", self.r_g), ("r_o", self.r_o)] {
            if !(0.0..=1.0).contains(&r) {
                return bad(name);
            }
        }
        let sum = self.r_u + self.r_g + self.r_o;
        if (sum - 1.0).abs() > BRANCHING_SUM_TOL {
            return bad("branching");
        }
        if !self.delta_e.is_finite() || !self.delta_u.is_finite() {
            return bad("detuning");
        }
        let mut inner = self;
        inner.r_u /= sum;
        inner.r_g /= sum;
        inner.r_o /= sum;
        Ok(ValidatedRateSet { inner })
    }
}

/// A [`RateSet`] that passed validation. Immutable; cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedRateSet {
    inner: RateSet,
}

impl ValidatedRateSet {
    pub fn g(&self) -> f64 {
        self.inner.g
    }
    pub fn kappa_in(&self) -> f64 {
        self.inner.kappa_in
    }
    pub fn kappa_ex(&self) -> f64 {
        self.inner.kappa_ex
    }
    /// Total cavity loss rate `κ = κ_in + κ_ex`.
    pub fn kappa(&self) -> f64 {
        self.inner.kappa_in + self.inner.kappa_ex
    }
    pub fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    pub fn r_u(&self) -> f64 {
        self.inner.r_u
    }
    pub fn r_g(&self) -> f64 {
        self.inner.r_g
    }
    pub fn r_o(&self) -> f64 {
        self.inner.r_o
    }
    pub fn delta_e(&self) -> f64 {
        self.inner.delta_e
    }
    pub fn delta_u(&self) -> f64 {
        self.inner.delta_u
    }
    /// The raw parameter record.
    pub fn raw(&self) -> RateSet {
        self.inner
    }

    /// Order-stable fingerprint of the numeric content, used to detect
    /// results computed from different inputs.
    pub fn fingerprint(&self) -> u64 {
        let r = &self.inner;
        fingerprint_f64s(&[
            r.g, r.kappa_in, r.kappa_ex, r.gamma, r.r_u, r.r_g, r.r_o, r.delta_e, r.delta_u,
        ])
    }
}

/// FNV-1a over the IEEE bit patterns.
pub(crate) fn fingerprint_f64s(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Fold several fingerprints into one.
pub(crate) fn combine_fingerprints(parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Fingerprint binding a (rates, pulse, stop) input triple; solver results
/// carry it so cross-solver combinations can verify they came from the
/// same inputs.
pub fn run_fingerprint(rates: &ValidatedRateSet, pulse: &DrivePulse, stop: &StopRule) -> u64 {
    combine_fingerprints(&[rates.fingerprint(), pulse.fingerprint(), stop.fingerprint()])
}

/// Effective non-Hermitian Hamiltonian `ℋ/ħ` on the single-excitation
/// block, such that the conditioned state obeys `i dα/dt = (ℋ/ħ) α`.
///
/// Row by row this reproduces the three amplitude equations
///
/// ```text
/// dα_u/dt = −iΔ_u α_u − Ω α_e
/// dα_e/dt = −(γ + iΔ_e) α_e + Ω α_u + g α_g
/// dα_g/dt = −κ α_g − g α_e
/// ```
///
/// The anti-Hermitian part is exactly `−i·diag(0, γ, κ)`; the remainder is
/// the Hermitian drive/coupling Hamiltonian with a real non-negative Ω.
pub fn effective_hamiltonian(rates: &ValidatedRateSet, omega: f64, delta_u: f64) -> [[Complex64; 3]; 3] {
    let g = rates.g();
    let kappa = rates.kappa();
    let gamma = rates.gamma();
    let delta_e = rates.delta_e();
    [
        [
            Complex64::new(delta_u, 0.0),
            Complex64::new(0.0, -omega),
            Complex64::new(0.0, 0.0),
        ],
        [
            Complex64::new(0.0, omega),
            Complex64::new(delta_e, -gamma),
            Complex64::new(0.0, g),
        ],
        [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -g),
            Complex64::new(0.0, -kappa),
        ],
    ]
}

/// `−i ℋ/ħ`, the generator of the conditioned amplitude flow
/// `dα/dt = M α`. This is what the integrators consume.
pub fn amplitude_generator(rates: &ValidatedRateSet, omega: f64, delta_u: f64) -> [[Complex64; 3]; 3] {
    let h = effective_hamiltonian(rates, omega, delta_u);
    let mi = Complex64::new(0.0, -1.0);
    let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = mi * h[i][j];
        }
    }
    m
}

/// Envelope families for the classical drive Ω(t).
#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    /// Ω(t) = Ω_max on [0, duration].
    Constant,
    /// sin² ramp from 0 to Ω_max over `ramp`, then hold until `duration`.
    Sin2Ramp { ramp: f64 },
    /// Truncated Gaussian envelope, Ω(t) = Ω_max·exp(−(t−center)²/(2 width²)).
    Gaussian { center: f64, width: f64 },
    /// Linear interpolation through `(time, Ω)` knots with strictly
    /// increasing times; `duration` equals the last knot time.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// Monotone sin² ramp over the whole duration, Ω(t) = Ω_max·sin²(πt/2T);
    /// the slow-ramp drive used for vacuum-stimulated Raman passage.
    VstirapSin,
}

/// Time-dependent drive: envelope, peak Rabi frequency, duration, and an
/// optional linear two-photon-detuning chirp `Δ_u(t) = Δ_u + chirp·t`.
///
/// Ω(t) is real and non-negative, and vanishes for t < 0 and t ≥ duration.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivePulse {
    pub shape: PulseShape,
    pub omega_max: f64,
    pub duration: f64,
    pub delta_u_chirp: f64,
}

impl DrivePulse {
    pub fn constant(omega_max: f64, duration: f64) -> Self {
        Self { shape: PulseShape::Constant, omega_max, duration, delta_u_chirp: 0.0 }
    }

    pub fn sin2_ramp(omega_max: f64, duration: f64, ramp: f64) -> Self {
        Self { shape: PulseShape::Sin2Ramp { ramp }, omega_max, duration, delta_u_chirp: 0.0 }
    }

    pub fn gaussian(omega_max: f64, duration: f64, center: f64, width: f64) -> Self {
        Self { shape: PulseShape::Gaussian { center, width }, omega_max, duration, delta_u_chirp: 0.0 }
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Self {
        let duration = knots.last().map_or(0.0, |k| k.0);
        let omega_max = knots.iter().fold(0.0f64, |m, k| m.max(k.1));
        Self { shape: PulseShape::PiecewiseLinear { knots }, omega_max, duration, delta_u_chirp: 0.0 }
    }

    /// Slow sin² ramp over the full duration.
    pub fn vstirap_sin(omega_max: f64, duration: f64) -> Self {
        Self { shape: PulseShape::VstirapSin, omega_max, duration, delta_u_chirp: 0.0 }
    }

    pub fn with_chirp(mut self, chirp: f64) -> Self {
        self.delta_u_chirp = chirp;
        self
    }

    /// Check envelope invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str| Err(SimError::InvalidParameter(name.to_string()));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad("pulse.duration");
        }
        if !(self.omega_max >= 0.0) || !self.omega_max.is_finite() {
            return bad("pulse.omega_max");
        }
        if !self.delta_u_chirp.is_finite() {
            return bad("pulse.delta_u_chirp");
        }
        match &self.shape {
            PulseShape::Constant | PulseShape::VstirapSin => {}
            PulseShape::Sin2Ramp { ramp } => {
                if !(*ramp > 0.0) || *ramp > self.duration {
                    return bad("pulse.ramp");
                }
            }
            PulseShape::Gaussian { center, width } => {
                if !center.is_finite() {
                    return bad("pulse.center");
                }
                if !(*width > 0.0) || !width.is_finite() {
                    return bad("pulse.width");
                }
            }
            PulseShape::PiecewiseLinear { knots } => {
                if knots.is_empty() {
                    return bad("pulse.knots");
                }
                if knots[0].0 < 0.0 {
                    return bad("pulse.knots");
                }
                for w in knots.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return bad("pulse.knots");
                    }
                }
                if knots.iter().any(|k| k.1 < 0.0 || !k.1.is_finite()) {
                    return bad("pulse.knots");
                }
            }
        }
        Ok(())
    }

    /// Drive amplitude at time t. Zero outside [0, duration).
    pub fn omega(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.duration {
            return 0.0;
        }
        self.omega_in_envelope(t)
    }

    /// Envelope formula without the [0, duration) gate; used by the
    /// integrators inside closed drive segments so the right-hand side
    /// stays smooth up to segment edges.
    pub(crate) fn omega_in_envelope(&self, t: f64) -> f64 {
        match &self.shape {
            PulseShape::Constant => self.omega_max,
            PulseShape::Sin2Ramp { ramp } => {
                if t < *ramp {
                    let s = (std::f64::consts::FRAC_PI_2 * t / ramp).sin();
                    self.omega_max * s * s
                } else {
                    self.omega_max
                }
            }
            PulseShape::Gaussian { center, width } => {
                let x = (t - center) / width;
                self.omega_max * (-0.5 * x * x).exp()
            }
            PulseShape::PiecewiseLinear { knots } => {
                if t < knots[0].0 {
                    return 0.0;
                }
                for w in knots.windows(2) {
                    if t <= w[1].0 {
                        let f = (t - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + f * (w[1].1 - w[0].1);
                    }
                }
                knots.last().unwrap().1
            }
            PulseShape::VstirapSin => {
                let s = (std::f64::consts::FRAC_PI_2 * t / self.duration).sin();
                self.omega_max * s * s
            }
        }
    }

    /// Two-photon detuning at time t given the static `delta_u` of the
    /// rate set.
    pub fn delta_u(&self, t: f64, base: f64) -> f64 {
        base + self.delta_u_chirp * t
    }

    /// Interior times where the envelope is only C⁰; integration restarts
    /// there. Sorted, strictly inside (0, duration).
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            PulseShape::Sin2Ramp { ramp } if *ramp < self.duration => vec![*ramp],
            PulseShape::PiecewiseLinear { knots } => knots
                .iter()
                .map(|k| k.0)
                .filter(|&t| t > 0.0 && t < self.duration)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Smooth integration segments `(start, end, driven)` covering
    /// `[0, t_max]`: the drive interval split at envelope breakpoints,
    /// then the undriven tail. Empty segments are dropped.
    pub(crate) fn segment_grid(&self, t_max: f64) -> Vec<(f64, f64, bool)> {
        let drive_end = self.duration.min(t_max);
        let mut pts = vec![0.0];
        for b in self.breakpoints() {
            if b > 0.0 && b < drive_end {
                pts.push(b);
            }
        }
        pts.push(drive_end);
        let mut segs: Vec<(f64, f64, bool)> = pts
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1], true))
            .collect();
        if t_max > self.duration {
            segs.push((self.duration, t_max, false));
        }
        segs
    }

    /// Fingerprint of the numeric content (shape tag included).
    pub fn fingerprint(&self) -> u64 {
        let tag = match &self.shape {
            PulseShape::Constant => 1.0,
            PulseShape::Sin2Ramp { .. } => 2.0,
            PulseShape::Gaussian { .. } => 3.0,
            PulseShape::PiecewiseLinear { .. } => 4.0,
            PulseShape::VstirapSin => 5.0,
        };
        let mut vals = vec![tag, self.omega_max, self.duration, self.delta_u_chirp];
        match &self.shape {
            PulseShape::Sin2Ramp { ramp } => vals.push(*ramp),
            PulseShape::Gaussian { center, width } => vals.extend([*center, *width]),
            PulseShape::PiecewiseLinear { knots } => {
                vals.extend(knots.iter().flat_map(|k| [k.0, k.1]))
            }
            _ => {}
        }
        fingerprint_f64s(&vals)
    }
}

/// Integration window and convergence threshold.
///
/// The solvers never stop before the pulse ends; past the pulse they stop
/// at the first accepted step where the residual excitation
/// `|α_e|² + |α_g|²` (or `ρ_ee + ρ_g1,g1`) drops below `eps_stop`, and
/// report `NotConverged` if that never happens before `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub t_max: f64,
    pub eps_stop: f64,
}

impl StopRule {
    pub const DEFAULT_EPS_STOP: f64 = 1e-10;

    /// `t_max = duration + 20/min(γ, κ)`, `eps_stop = 1e-10`: long enough
    /// that boundary terms are negligible against the default tolerances.
    pub fn auto(pulse: &DrivePulse, rates: &ValidatedRateSet) -> Self {
        let slowest = rates.gamma().min(rates.kappa());
        Self { t_max: pulse.duration + 20.0 / slowest, eps_stop: Self::DEFAULT_EPS_STOP }
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint_f64s(&[self.t_max, self.eps_stop])
    }
}

/// Relative/absolute tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12 }
    }
}

impl ToleranceSpec {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }
}

/// Physical one-sided cavity holding a single emitter, SI units.
///
/// `mu_ge`: dipole moment (C·m); `omega_ge`: transition angular frequency
/// (rad/s); `length`: cavity length (m); `a_eff`: effective mode
/// cross-section at the atom (m²); `alpha_loss`: one-round-trip internal
/// loss (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalCavity {
    pub mu_ge: f64,
    pub omega_ge: f64,
    pub length: f64,
    pub a_eff: f64,
    pub alpha_loss: f64,
    pub r_u: f64,
    pub r_g: f64,
    pub r_o: f64,
}

impl PhysicalCavity {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str| Err(SimError::InvalidParameter(name.to_string()));
        for (name, v) in [
            ("mu_ge", self.mu_ge),
            ("omega_ge", self.omega_ge),
            ("length", self.length),
            ("a_eff", self.a_eff),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(name);
            }
        }
        if !(self.alpha_loss >= 0.0) || !self.alpha_loss.is_finite() {
            return bad("alpha_loss");
        }
        // the cavity-coupled decay channel must exist
        if !(self.r_g > 0.0) {
            return bad("r_g");
        }
        let sum = self.r_u + self.r_g + self.r_o;
        if self.r_u < 0.0 || self.r_o < 0.0 || (sum - 1.0).abs() > BRANCHING_SUM_TOL {
            return bad("branching");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates(g: f64, kin: f64, kex: f64, gamma: f64) -> ValidatedRateSet {
        RateSet::new(g, kin, kex, gamma, 0.3, 0.7, 0.0).validate().unwrap()
    }

    #[test]
    fn validate_accepts_good_rates() {
        let r = RateSet::new(1.0, 0.1, 1.0, 1.0, 0.3, 0.7, 0.0).validate().unwrap();
        assert_eq!(r.kappa(), 1.1);
        assert_eq!(r.r_u(), 0.3);
    }

    #[test]
    fn validate_rejects_boundary_violations() {
        let mut r = RateSet::new(0.0, 0.1, 1.0, 1.0, 0.3, 0.7, 0.0);
        assert!(matches!(r.validate(), Err(SimError::InvalidParameter(s)) if s == "g"));
        r.g = 1.0;
        r.gamma = 0.0;
        assert!(matches!(r.validate(), Err(SimError::InvalidParameter(s)) if s == "gamma"));
        r.gamma = 1.0;
        r.kappa_in = 0.0;
        r.kappa_ex = 0.0;
        assert!(matches!(r.validate(), Err(SimError::InvalidParameter(s)) if s == "kappa"));
    }

    #[test]
    fn validate_rejects_bad_branching_sum() {
        let r = RateSet::new(1.0, 0.1, 1.0, 1.0, 0.5, 0.6, 0.0);
        assert!(matches!(r.validate(), Err(SimError::InvalidParameter(s)) if s == "branching"));
    }

    #[test]
    fn validate_renormalizes_tiny_branching_drift() {
        let eps = 5e-13;
        let r = RateSet::new(1.0, 0.1, 1.0, 1.0, 0.3, 0.7 + eps, 0.0).validate().unwrap();
        assert!((r.r_u() + r.r_g() + r.r_o() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validate_is_idempotent() {
        let r = RateSet::new(1.0, 0.1, 1.0, 1.0, 0.3, 0.7 + 4e-13, 0.0).validate().unwrap();
        let r2 = r.raw().validate().unwrap();
        assert_eq!(r.raw(), r2.raw());
    }

    #[test]
    fn hamiltonian_reduces_to_damping_only() {
        // g must stay positive, so probe the Ω = 0, detuning-free structure
        // directly and check the g-coupled entries separately.
        let r = rates(1.0, 0.5, 0.5, 2.0);
        let h = effective_hamiltonian(&r, 0.0, 0.0);
        assert_eq!(h[IDX_U][IDX_U], Complex64::new(0.0, 0.0));
        assert_eq!(h[IDX_E][IDX_E], Complex64::new(0.0, -2.0));
        assert_eq!(h[IDX_G1][IDX_G1], Complex64::new(0.0, -1.0));
        assert_eq!(h[IDX_U][IDX_E], Complex64::new(0.0, 0.0));
        assert_eq!(h[IDX_E][IDX_G1], Complex64::new(0.0, 1.0));
        assert_eq!(h[IDX_G1][IDX_E], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn hamiltonian_plus_damping_is_hermitian() {
        let r = RateSet { delta_e: -0.7, delta_u: 1.3, ..RateSet::new(2.5, 0.3, 1.1, 0.8, 0.2, 0.5, 0.3) }
            .validate()
            .unwrap();
        let h = effective_hamiltonian(&r, 1.7, 0.4);
        let damping = [0.0, r.gamma(), r.kappa()];
        for i in 0..3 {
            for j in 0..3 {
                let mut hij = h[i][j];
                if i == j {
                    hij += Complex64::new(0.0, damping[i]);
                }
                let mut hji = h[j][i];
                if i == j {
                    hji += Complex64::new(0.0, damping[j]);
                }
                let diff = (hij - hji.conj()).norm();
                assert!(diff < 1e-15, "({i},{j}) breaks hermiticity by {diff}");
            }
        }
        // no direct u–g coupling
        assert_eq!(h[IDX_U][IDX_G1], Complex64::new(0.0, 0.0));
        assert_eq!(h[IDX_G1][IDX_U], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn hamiltonian_is_linear_in_omega_and_g() {
        let r1 = rates(1.0, 0.5, 0.5, 1.0);
        let r2 = rates(3.0, 0.5, 0.5, 1.0);
        let h1 = effective_hamiltonian(&r1, 0.8, 0.0);
        let h2 = effective_hamiltonian(&r1, 1.6, 0.0);
        assert_eq!(h2[IDX_E][IDX_U], h1[IDX_E][IDX_U] * 2.0);
        let hg1 = effective_hamiltonian(&r1, 0.8, 0.0);
        let hg2 = effective_hamiltonian(&r2, 0.8, 0.0);
        assert_eq!(hg2[IDX_E][IDX_G1], hg1[IDX_E][IDX_G1] * 3.0);
    }

    #[test]
    fn generator_matches_hand_coded_rhs_on_random_states() {
        // Independent transcription of the three amplitude equations.
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let g = 0.1 + 5.0 * next();
            let kin = 0.05 + next();
            let kex = 0.05 + 3.0 * next();
            let gamma = 0.1 + 2.0 * next();
            let de = 4.0 * next() - 2.0;
            let du = 4.0 * next() - 2.0;
            let omega = 3.0 * next();
            let r = RateSet { delta_e: de, delta_u: du, ..RateSet::new(g, kin, kex, gamma, 0.2, 0.5, 0.3) }
                .validate()
                .unwrap();
            let m = amplitude_generator(&r, omega, du);
            let alpha = [
                Complex64::new(next() - 0.5, next() - 0.5),
                Complex64::new(next() - 0.5, next() - 0.5),
                Complex64::new(next() - 0.5, next() - 0.5),
            ];
            let mut got = [Complex64::new(0.0, 0.0); 3];
            for i in 0..3 {
                for j in 0..3 {
                    got[i] += m[i][j] * alpha[j];
                }
            }
            let i = Complex64::new(0.0, 1.0);
            let kappa = kin + kex;
            let want = [
                -i * du * alpha[0] - omega * alpha[1],
                -(gamma + i * de) * alpha[1] + omega * alpha[0] + g * alpha[2],
                -kappa * alpha[2] - g * alpha[1],
            ];
            for k in 0..3 {
                assert!((got[k] - want[k]).norm() <= 1e-14, "component {k}");
            }
        }
    }

    #[test]
    fn pulse_envelopes_and_gating() {
        let p = DrivePulse::constant(2.0, 5.0);
        assert_eq!(p.omega(-0.1), 0.0);
        assert_eq!(p.omega(2.5), 2.0);
        assert_eq!(p.omega(5.0), 0.0);

        let v = DrivePulse::vstirap_sin(1.0, 10.0);
        assert!(v.omega(0.0).abs() < 1e-300);
        assert!((v.omega(10.0 - 1e-9) - 1.0).abs() < 1e-8);

        let s = DrivePulse::sin2_ramp(1.0, 10.0, 4.0);
        assert!((s.omega(4.0) - 1.0).abs() < 1e-12);
        assert_eq!(s.omega(7.0), 1.0);
        assert_eq!(s.breakpoints(), vec![4.0]);

        let pl = DrivePulse::piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 0.5)]);
        assert_eq!(pl.duration, 3.0);
        assert!((pl.omega(0.5) - 1.0).abs() < 1e-15);
        assert!((pl.omega(2.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn chirp_ramps_the_two_photon_detuning() {
        let p = DrivePulse::constant(1.0, 10.0).with_chirp(0.25);
        assert_eq!(p.delta_u(0.0, -1.0), -1.0);
        assert_eq!(p.delta_u(4.0, -1.0), 0.0);
        assert!(p.validate().is_ok());
        let q = DrivePulse::constant(1.0, 10.0);
        assert_ne!(p.fingerprint(), q.fingerprint());
    }

    #[test]
    fn physical_cavity_validation() {
        let good = PhysicalCavity {
            mu_ge: 1e-29,
            omega_ge: 2e15,
            length: 0.01,
            a_eff: 1e-10,
            alpha_loss: 0.0,
            r_u: 0.3,
            r_g: 0.7,
            r_o: 0.0,
        };
        assert!(good.validate().is_ok());
        assert!(PhysicalCavity { r_g: 0.0, r_o: 0.7, ..good }.validate().is_err());
        assert!(PhysicalCavity { length: 0.0, ..good }.validate().is_err());
        assert!(PhysicalCavity { alpha_loss: -0.1, ..good }.validate().is_err());
        assert!(PhysicalCavity { r_u: 0.4, ..good }.validate().is_err());
    }

    #[test]
    fn pulse_validation_catches_bad_knots() {
        let pl = DrivePulse::piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0), (1.0, 0.5)]);
        assert!(pl.validate().is_err());
        let neg = DrivePulse::piecewise_linear(vec![(0.0, 0.0), (1.0, -2.0)]);
        assert!(neg.validate().is_err());
        let ok = DrivePulse::piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]);
        assert!(ok.validate().is_ok());
    }
}
