//! Embedded Dormand-Prince 5(4) stepper with PI-free standard step control,
//! plus a fixed-step RK4 helper for local refinement inside an accepted step.
//!
//! The coupled fluid/body integration uses velocity-Verlet (see `kinetics`);
//! this module serves the paths that need tight error control: the frozen
//! scattering computation and the comparison curve.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
}

/// Tolerances and step limits for the adaptive stepper.
#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_initial: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        RkOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_initial: 1e-4,
            h_max: f64::INFINITY,
            h_min: 1e-300,
            max_steps: 50_000_000,
        }
    }
}

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) stepper over a fixed-dimension state.
pub struct Dp45<F, const N: usize> {
    f: F,
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    opts: RkOptions,
    k1: [f64; N],
    steps_taken: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, coeffs: &[f64], ks: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in coeffs.iter().zip(ks.iter()) {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

impl<F, const N: usize> Dp45<F, N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut f: F, t0: f64, y0: [f64; N], opts: RkOptions) -> Self {
        let k1 = f(t0, &y0);
        Dp45 {
            f,
            t: t0,
            y: y0,
            h: opts.h_initial.min(opts.h_max),
            opts,
            k1,
            steps_taken: 0,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Cap the next attempted step (e.g. to land on an output time).
    pub fn limit_next_step(&mut self, h: f64) {
        if h < self.h {
            self.h = h.max(self.opts.h_min);
        }
    }

    /// Attempt one adaptive step. Returns `Ok(true)` if the state advanced,
    /// `Ok(false)` if the step was rejected and the step size reduced.
    pub fn try_advance(&mut self) -> Result<bool, OdeError> {
        self.steps_taken += 1;
        if self.steps_taken > self.opts.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                t: self.t,
                max_steps: self.opts.max_steps,
            });
        }
        let h = self.h;
        if !(h > self.opts.h_min) {
            return Err(OdeError::StepSizeUnderflow { t: self.t, h });
        }
        let t = self.t;
        let y = self.y;
        let k1 = self.k1;
        let k2 = (self.f)(t + C[0] * h, &axpy(&y, h, &A2, &[k1]));
        let k3 = (self.f)(t + C[1] * h, &axpy(&y, h, &A3, &[k1, k2]));
        let k4 = (self.f)(t + C[2] * h, &axpy(&y, h, &A4, &[k1, k2, k3]));
        let k5 = (self.f)(t + C[3] * h, &axpy(&y, h, &A5, &[k1, k2, k3, k4]));
        let k6 = (self.f)(t + C[4] * h, &axpy(&y, h, &A6, &[k1, k2, k3, k4, k5]));
        let ks6 = [k1, k2, k3, k4, k5, k6];
        let y5 = axpy(&y, h, &B5[..6], &ks6);
        let k7 = (self.f)(t + h, &y5);
        let ks = [k1, k2, k3, k4, k5, k6, k7];
        let y4 = axpy(&y, h, &B4, &ks);

        let mut err_sq = 0.0;
        for i in 0..N {
            let scale = self.opts.atol + self.opts.rtol * y[i].abs().max(y5[i].abs());
            let e = (y5[i] - y4[i]) / scale;
            err_sq += e * e;
        }
        let err = (err_sq / N as f64).sqrt();

        if err <= 1.0 {
            self.t = t + h;
            self.y = y5;
            self.k1 = k7; // FSAL
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            self.h = (h * factor).min(self.opts.h_max);
            Ok(true)
        } else {
            self.h = (h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)).max(self.opts.h_min * 0.5);
            Ok(false)
        }
    }
}

/// Integrate to `t_end`, landing on it exactly.
pub fn integrate_to<F, const N: usize>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: RkOptions,
) -> Result<[f64; N], OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut stepper = Dp45::new(f, t0, y0, opts);
    while stepper.t < t_end {
        stepper.limit_next_step(t_end - stepper.t);
        stepper.try_advance()?;
    }
    Ok(stepper.y)
}

/// Classical RK4 with `n` fixed substeps from `t0` to `t1`. Used to refine
/// event times inside an already-accepted adaptive step.
pub fn rk4_fixed<F, const N: usize>(f: &mut F, t0: f64, y0: &[f64; N], t1: f64, n: usize) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut y = *y0;
    let mut t = t0;
    let h = (t1 - t0) / n as f64;
    for _ in 0..n {
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, 0.5 * h, &[1.0], &[k1]));
        let k3 = f(t + 0.5 * h, &axpy(&y, 0.5 * h, &[1.0], &[k2]));
        let k4 = f(t + h, &axpy(&y, h, &[1.0], &[k3]));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay_to_tolerance() {
        let opts = RkOptions {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let y = integrate_to(|_t, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, opts).unwrap();
        assert_relative_eq!(y[0], (-5.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let opts = RkOptions {
            rtol: 1e-11,
            atol: 1e-13,
            ..Default::default()
        };
        let omega = 1.2;
        let y = integrate_to(
            |_t, y: &[f64; 2]| [y[1], -omega * omega * y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            opts,
        )
        .unwrap();
        assert_relative_eq!(y[0], (omega * 10.0).cos(), epsilon = 1e-8);
        assert_relative_eq!(y[1], -omega * (omega * 10.0).sin(), epsilon = 1e-8);
    }

    #[test]
    fn rk4_fixed_fourth_order() {
        let mut f = |_t: f64, y: &[f64; 1]| [y[0]];
        let coarse = rk4_fixed(&mut f, 0.0, &[1.0], 1.0, 8)[0];
        let fine = rk4_fixed(&mut f, 0.0, &[1.0], 1.0, 16)[0];
        let e = 1.0f64.exp();
        let ratio = (coarse - e).abs() / (fine - e).abs();
        assert!(ratio > 12.0 && ratio < 20.0, "ratio = {ratio}");
    }

    #[test]
    fn max_steps_is_enforced() {
        let opts = RkOptions {
            max_steps: 10,
            h_max: 1e-6,
            ..Default::default()
        };
        let err = integrate_to(|_t, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 1.0, opts).unwrap_err();
        assert!(matches!(err, OdeError::MaxStepsExceeded { .. }));
    }
}
