//! Closed-form efficiency bounds, cooperativities, the optimal output
//! coupling, and the physical-cavity calculator.
//!
//! Lossless limits (`κ_in = 0`, `α_loss = 0`) are legitimate asymptotic
//! queries: they yield an infinite internal cooperativity and a vanishing
//! failure-probability floor rather than an error.

use crate::error::{Result, SimError};
use crate::model::{PhysicalCavity, RateSet, ValidatedRateSet};

/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Cooperativity `C = g²/(2κγ)` and internal cooperativity
/// `C_in = g²/(2κ_in γ)`; the latter is `+∞` for a lossless cavity.
pub fn cooperativities(rates: &ValidatedRateSet) -> (f64, f64) {
    let g2 = rates.g() * rates.g();
    let c = g2 / (2.0 * rates.kappa() * rates.gamma());
    let c_in = if rates.kappa_in() > 0.0 {
        g2 / (2.0 * rates.kappa_in() * rates.gamma())
    } else {
        f64::INFINITY
    };
    (c, c_in)
}

/// Success-probability ceiling `(κ_ex/κ) · 2C/(1 + 2C − r_u)`: the
/// closed form of the repump geometric series with the slow-variation
/// factor at its maximum of 1.
pub fn ps_upper(rates: &ValidatedRateSet) -> f64 {
    let (c, _) = cooperativities(rates);
    rates.kappa_ex() / rates.kappa() * 2.0 * c / (1.0 + 2.0 * c - rates.r_u())
}

/// Failure-probability floor `2/(1 + √(1 + 2C_in/(1 − r_u)))`, reached at
/// the optimal κ_ex. `r_u = 1` or an infinite `C_in` give 0.
pub fn pf_lower(c_in: f64, r_u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_u) {
        return Err(SimError::DomainError(format!("r_u = {r_u} outside [0, 1]")));
    }
    if c_in < 0.0 {
        return Err(SimError::DomainError(format!("C_in = {c_in} negative")));
    }
    if r_u >= 1.0 || c_in.is_infinite() {
        return Ok(0.0);
    }
    Ok(2.0 / (1.0 + (1.0 + 2.0 * c_in / (1.0 - r_u)).sqrt()))
}

/// Large-`C_in` approximation `√(2/C_in)` of the failure floor.
pub fn pf_lower_approx(c_in: f64) -> f64 {
    (2.0 / c_in).sqrt()
}

/// Optimal output coupling `κ_ex^opt = κ_in √(1 + 2C_in/(1 − r_u))`.
///
/// At this value `1 − ps_upper = pf_lower` exactly.
pub fn kappa_ex_opt(kappa_in: f64, c_in: f64, r_u: f64) -> Result<f64> {
    if !(kappa_in > 0.0) {
        return Err(SimError::DomainError(format!("kappa_in = {kappa_in} not positive")));
    }
    if !(0.0..1.0).contains(&r_u) {
        return Err(SimError::DomainError(format!("r_u = {r_u} outside [0, 1)")));
    }
    if c_in < 0.0 {
        return Err(SimError::DomainError(format!("C_in = {c_in} negative")));
    }
    Ok(kappa_in * (1.0 + 2.0 * c_in / (1.0 - r_u)).sqrt())
}

/// Ceiling on the repumping contribution,
/// `(κ_ex/κ) · [2C/(1+2C)] · r_u/(1 + 2C − r_u)`.
pub fn prep_upper(rates: &ValidatedRateSet) -> f64 {
    let (c, _) = cooperativities(rates);
    let two_c = 2.0 * c;
    rates.kappa_ex() / rates.kappa() * two_c / (1.0 + two_c) * rates.r_u() / (1.0 + two_c - rates.r_u())
}

/// Everything the closed forms say about one rate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub c: f64,
    pub c_in: f64,
    /// Escape efficiency κ_ex/κ.
    pub eta_esc: f64,
    pub ps_upper: f64,
    pub pf_lower: f64,
    pub kappa_ex_opt: f64,
    pub prep_upper: f64,
    pub pf_lower_approx: f64,
}

/// Evaluate all closed forms for a validated rate set.
pub fn bound_report(rates: &ValidatedRateSet) -> BoundReport {
    let (c, c_in) = cooperativities(rates);
    let r_u = rates.r_u();
    // κ_in √(1+2C_in/(1−r_u)) written so the lossless limit stays finite
    let kex_opt = if r_u >= 1.0 {
        f64::INFINITY
    } else {
        let kin = rates.kappa_in();
        (kin * kin + kin * rates.g().powi(2) / (rates.gamma() * (1.0 - r_u))).sqrt()
    };
    BoundReport {
        c,
        c_in,
        eta_esc: rates.kappa_ex() / rates.kappa(),
        ps_upper: ps_upper(rates),
        pf_lower: pf_lower(c_in, r_u).expect("validated rates stay in domain"),
        kappa_ex_opt: kex_opt,
        prep_upper: prep_upper(rates),
        pf_lower_approx: pf_lower_approx(c_in),
    }
}

/// Rate set with `κ_ex` at its optimal value for the given internal
/// parameters.
pub fn optimal_rate_set(
    g: f64,
    kappa_in: f64,
    gamma: f64,
    r_u: f64,
    r_g: f64,
    r_o: f64,
) -> Result<ValidatedRateSet> {
    let c_in = g * g / (2.0 * kappa_in * gamma);
    let kex = kappa_ex_opt(kappa_in, c_in, r_u)?;
    RateSet::new(g, kappa_in, kex, gamma, r_u, r_g, r_o).validate()
}

/// SI rates derived from a physical one-sided cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalRates {
    /// Atom–cavity coupling, rad/s.
    pub g: f64,
    /// Internal cavity loss rate, rad/s.
    pub kappa_in: f64,
    /// Total atomic amplitude decay rate γ = (r_g γ)/r_g, rad/s.
    pub gamma: f64,
    /// Mode-area ratio r_A = A_eff/σ with σ = 3λ²/(2π).
    pub r_a: f64,
    pub c_in: f64,
}

/// Evaluate `g = √(μ²ω/(2ε₀ħA_eff L))`, `κ_in = cα_loss/(2L)`,
/// `r_g γ = μ²ω³/(6πε₀ħc³)` and the resulting internal cooperativity.
pub fn rates_from_physical(p: &PhysicalCavity) -> Result<PhysicalRates> {
    p.validate()?;
    let mu2 = p.mu_ge * p.mu_ge;
    let omega = p.omega_ge;
    let g = (mu2 * omega / (2.0 * EPSILON_0 * HBAR * p.a_eff * p.length)).sqrt();
    let kappa_in = SPEED_OF_LIGHT * p.alpha_loss / (2.0 * p.length);
    let rg_gamma = mu2 * omega.powi(3) / (6.0 * std::f64::consts::PI * EPSILON_0 * HBAR * SPEED_OF_LIGHT.powi(3));
    let gamma = rg_gamma / p.r_g;
    let lambda = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / omega;
    let sigma = 3.0 * lambda * lambda / (2.0 * std::f64::consts::PI);
    let r_a = p.a_eff / sigma;
    let c_in = if kappa_in > 0.0 { g * g / (2.0 * kappa_in * gamma) } else { f64::INFINITY };
    Ok(PhysicalRates { g, kappa_in, gamma, r_a, c_in })
}

/// Internal cooperativity from round-trip quantities alone:
/// `C_in = r_g/(2 α_loss r_A)`. `α_loss = 0` gives the `+∞` sentinel.
pub fn cin_from_roundtrip(alpha_loss: f64, r_a: f64, r_g: f64, r_u: f64) -> Result<f64> {
    if alpha_loss < 0.0 {
        return Err(SimError::DomainError(format!("alpha_loss = {alpha_loss} negative")));
    }
    if !(r_a > 0.0) {
        return Err(SimError::DomainError(format!("r_A = {r_a} not positive")));
    }
    if !(r_g > 0.0 && r_g <= 1.0) {
        return Err(SimError::DomainError(format!("r_g = {r_g} outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&r_u) {
        return Err(SimError::DomainError(format!("r_u = {r_u} outside [0, 1)")));
    }
    if alpha_loss == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(r_g / (2.0 * alpha_loss * r_a))
}

/// The repump-boosted combination `2C_in/(1 − r_u)` that enters the
/// failure floor directly.
pub fn repump_boosted_two_cin(c_in: f64, r_u: f64) -> f64 {
    2.0 * c_in / (1.0 - r_u)
}
