//! Adaptive Dormand–Prince 5(4) integration with dense output and event
//! location.
//!
//! The solvers integrate small fixed-size real systems (the complex
//! amplitudes and density-matrix entries are unpacked into `[f64; N]`),
//! so everything here is monomorphized over the state dimension. Dense
//! output uses the standard fifth-order interpolant of the DOPRI5 pair;
//! events (survival-probability crossings in the trajectory sampler) are
//! located by bisection on that interpolant.

use crate::error::{Result, SimError};

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const ORDER_EXP: f64 = 0.2; // 1/5

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights coincide with the last A row (FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Stop predicate checked at accepted step ends.
pub type StopFn<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> bool;
/// Event function; a positive → negative crossing terminates the segment.
pub type EventFn<'a, const N: usize> = &'a dyn Fn(f64, &[f64; N]) -> f64;

/// One accepted step together with its dense-output coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Evaluate the interpolant at `t ∈ [t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = if self.h == 0.0 { 0.0 } else { (t - self.t0) / self.h };
        self.eval_theta(s)
    }

    #[allow(clippy::needless_range_loop)]
    fn eval_theta(&self, s: f64) -> [f64; N] {
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.cont[0][i]
                + s * (self.cont[1][i]
                    + s1 * (self.cont[2][i] + s * (self.cont[3][i] + s1 * self.cont[4][i])));
        }
        y
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Piecewise-polynomial solution collected over one or more segments.
#[derive(Debug, Clone, Default)]
pub struct DenseSolution<const N: usize> {
    steps: Vec<DenseStep<N>>,
}

impl<const N: usize> DenseSolution<N> {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.t0)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t1())
    }

    /// Evaluate at `t`, clamped to the covered interval.
    pub fn eval(&self, t: f64) -> [f64; N] {
        assert!(!self.steps.is_empty(), "empty dense solution");
        let idx = match self
            .steps
            .binary_search_by(|s| s.t0.partial_cmp(&t).expect("non-finite time"))
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.steps[idx].eval(t.clamp(self.steps[idx].t0, self.steps[idx].t1()))
    }

    fn push(&mut self, step: DenseStep<N>) {
        self.steps.push(step);
    }
}

/// Why a segment integration returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentOutcome {
    /// Integrated through to the requested end time.
    ReachedEnd,
    /// The caller's stop predicate held at an accepted step.
    Stopped,
    /// The event function crossed zero; time located by bisection.
    Event,
}

/// End state of a segment integration.
#[derive(Debug, Clone)]
pub struct SegmentEnd<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub outcome: SegmentOutcome,
}

/// Adaptive DOPRI5 driver. Plain options struct; one call integrates one
/// smooth segment.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, max_steps: 20_000_000 }
    }

    fn error_norm<const N: usize>(&self, err: &[f64; N], y0: &[f64; N], y1: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
            let r = err[i] / sk;
            acc += r * r;
        }
        (acc / N as f64).sqrt()
    }

    /// Hairer's starting-step heuristic.
    fn initial_step<const N: usize, F>(&self, f: &mut F, t0: f64, y0: &[f64; N], f0: &[f64; N], span: f64) -> f64
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]),
    {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y0[i].abs();
            d0 += (y0[i] / sk).powi(2);
            d1 += (f0[i] / sk).powi(2);
        }
        d0 = (d0 / N as f64).sqrt();
        d1 = (d1 / N as f64).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = y0[i] + h0 * f0[i];
        }
        let mut f1 = [0.0; N];
        f(t0 + h0, &y1, &mut f1);
        let mut d2 = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y0[i].abs();
            d2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        d2 = (d2 / N as f64).sqrt() / h0;
        let d_max = d1.max(d2);
        let h1 = if d_max <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d_max).powf(ORDER_EXP) };
        (100.0 * h0).min(h1).min(span)
    }

    /// Integrate `dy/dt = f(t, y)` over `[t0, t1]`.
    ///
    /// `dense`, when given, receives every accepted step. `stop` is
    /// checked at accepted step ends and terminates with
    /// [`SegmentOutcome::Stopped`]. `event` is a sign-crossing function
    /// (positive → negative); the crossing time is refined on the dense
    /// interpolant to 1e-10 relative and terminates with
    /// [`SegmentOutcome::Event`].
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_segment<const N: usize, F>(
        &self,
        f: &mut F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        mut dense: Option<&mut DenseSolution<N>>,
        stop: Option<StopFn<'_, N>>,
        event: Option<EventFn<'_, N>>,
    ) -> Result<SegmentEnd<N>>
    where
        F: FnMut(f64, &[f64; N], &mut [f64; N]),
    {
        debug_assert!(t1 > t0);
        let span = t1 - t0;
        let mut t = t0;
        let mut y = y0;
        let mut k: [[f64; N]; 7] = [[0.0; N]; 7];
        f(t, &y, &mut k[0]);
        let mut h = self.initial_step(f, t, &y, &k[0], span);
        let mut n_steps = 0usize;
        let mut event_prev = event.map(|g| g(t, &y));

        loop {
            if n_steps >= self.max_steps {
                return Err(SimError::ToleranceNotMet { t, h });
            }
            n_steps += 1;

            let h_left = t1 - t;
            let mut last = false;
            if h >= h_left {
                h = h_left;
                last = true;
            }
            if h < 1e-14 * t.abs().max(1.0) && !last {
                return Err(SimError::ToleranceNotMet { t, h });
            }

            // stages 2..=6
            let mut y_stage = [0.0; N];
            for s in 1..6 {
                for i in 0..N {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    y_stage[i] = y[i] + h * acc;
                }
                f(t + C[s] * h, &y_stage, &mut k[s]);
            }
            // stage 7 doubles as the fifth-order solution
            let mut y_new = [0.0; N];
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(6) {
                    acc += A[6][j] * kj[i];
                }
                y_new[i] = y[i] + h * acc;
            }
            f(t + h, &y_new, &mut k[6]);

            let mut err_vec = [0.0; N];
            for i in 0..N {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc += E[j] * kj[i];
                }
                err_vec[i] = h * acc;
            }
            let err = self.error_norm(&err_vec, &y, &y_new);

            if err <= 1.0 {
                // accepted
                let step = Self::dense_step(t, h, &y, &y_new, &k);
                let t_new = if last { t1 } else { t + h };

                if let (Some(g), Some(g_prev)) = (event, event_prev.as_mut()) {
                    let g_new = g(t_new, &y_new);
                    if *g_prev >= 0.0 && g_new < 0.0 {
                        let (te, ye) = locate_crossing(&step, g, t, t_new);
                        if let Some(d) = dense.as_deref_mut() {
                            d.push(step);
                        }
                        return Ok(SegmentEnd { t: te, y: ye, outcome: SegmentOutcome::Event });
                    }
                    *g_prev = g_new;
                }

                if let Some(d) = dense.as_deref_mut() {
                    d.push(step);
                }
                y = y_new;
                t = t_new;
                k[0] = k[6]; // FSAL

                if let Some(p) = stop {
                    if p(t, &y) {
                        return Ok(SegmentEnd { t, y, outcome: SegmentOutcome::Stopped });
                    }
                }
                if last {
                    return Ok(SegmentEnd { t, y, outcome: SegmentOutcome::ReachedEnd });
                }
                let fac = (err.powf(ORDER_EXP) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                h /= fac;
            } else {
                let fac = (err.powf(ORDER_EXP) / SAFE).min(1.0 / FAC_MIN);
                h /= fac;
            }
        }
    }

    fn dense_step<const N: usize>(
        t: f64,
        h: f64,
        y: &[f64; N],
        y_new: &[f64; N],
        k: &[[f64; N]; 7],
    ) -> DenseStep<N> {
        let mut cont = [[0.0; N]; 5];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k[0][i] - ydiff;
            cont[0][i] = y[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * k[6][i] - bspl;
            let mut dsum = 0.0;
            for (j, kj) in k.iter().enumerate() {
                dsum += D[j] * kj[i];
            }
            cont[4][i] = h * dsum;
        }
        DenseStep { t0: t, h, cont }
    }
}

/// Bisect a (positive → negative) crossing of `g` inside one dense step,
/// to 1e-10 relative in time.
fn locate_crossing<const N: usize>(
    step: &DenseStep<N>,
    g: EventFn<'_, N>,
    t_lo: f64,
    t_hi: f64,
) -> (f64, [f64; N]) {
    let mut lo = t_lo;
    let mut hi = t_hi;
    let tol = 1e-10 * hi.abs().max(1.0);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y_mid = step.eval(mid);
        if g(mid, &y_mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi, step.eval(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let ode = Dopri5::new(1e-10, 1e-13);
        let mut f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -2.0 * y[0];
        let end = ode.integrate_segment(&mut f, 0.0, [1.0], 5.0, None, None, None).unwrap();
        assert_eq!(end.outcome, SegmentOutcome::ReachedEnd);
        assert!((end.y[0] - (-10.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_dense_output_accuracy() {
        let ode = Dopri5::new(1e-9, 1e-12);
        let mut f = |_t: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut dense = DenseSolution::default();
        let end = ode
            .integrate_segment(&mut f, 0.0, [1.0, 0.0], 10.0, Some(&mut dense), None, None)
            .unwrap();
        assert!((end.y[0] - 10.0f64.cos()).abs() < 1e-8);
        for i in 0..=100 {
            let t = 0.1 * i as f64;
            let y = dense.eval(t);
            assert!((y[0] - t.cos()).abs() < 1e-7, "t = {t}");
            assert!((y[1] + t.sin()).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn stop_predicate_halts_integration() {
        let ode = Dopri5::new(1e-9, 1e-12);
        let mut f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0];
        let stop = |_t: f64, y: &[f64; 1]| y[0] < 1e-6;
        let end = ode
            .integrate_segment(&mut f, 0.0, [1.0], 1e6, None, Some(&stop), None)
            .unwrap();
        assert_eq!(end.outcome, SegmentOutcome::Stopped);
        assert!(end.y[0] < 1e-6);
        assert!(end.t < 30.0);
    }

    #[test]
    fn event_location_hits_crossing_time() {
        // y = e^{-t}, event at y = 0.37 → t = -ln 0.37
        let ode = Dopri5::new(1e-9, 1e-12);
        let mut f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0];
        let event = |_t: f64, y: &[f64; 1]| y[0] - 0.37;
        let end = ode
            .integrate_segment(&mut f, 0.0, [1.0], 50.0, None, None, Some(&event))
            .unwrap();
        assert_eq!(end.outcome, SegmentOutcome::Event);
        let expected = -(0.37f64.ln());
        assert!((end.t - expected).abs() < 1e-8, "t = {} vs {}", end.t, expected);
        assert!((end.y[0] - 0.37).abs() < 1e-8);
    }

    #[test]
    fn quadrature_component_inherits_accuracy() {
        // y0' = cos t, integrated as an auxiliary quadrature of sin.
        let ode = Dopri5::new(1e-10, 1e-13);
        let mut f = |t: f64, _y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = t.cos();
        let end = ode.integrate_segment(&mut f, 0.0, [0.0], 3.0, None, None, None).unwrap();
        assert!((end.y[0] - 3.0f64.sin()).abs() < 1e-9);
    }
}
