//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 4(5)).
//!
//! The integrator exposes two entry points: `integrate_ode` produces the
//! solution on a caller-supplied output grid, and `OdeStepper` exposes the
//! accepted steps one at a time so that callers (the hybrid simulator) can
//! accumulate integrals along the path and re-enter mid-step. Dense output
//! between accepted steps uses cubic Hermite interpolation on the stored
//! endpoint derivatives.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeControls {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step size; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeControls {
    fn default() -> Self {
        OdeControls { rtol: 1e-8, atol: 1e-10, h_init: None, h_max: None, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError {
    /// Step size control drove the step below the representable floor,
    /// usually a sign of a non-smooth or diverging right-hand side.
    StepSizeUnderflow { t: f64, h: f64 },
    MaxStepsExceeded { t: f64, max_steps: usize },
    NonFiniteState { t: f64 },
    InvalidGrid,
}

impl fmt::Display for OdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeError::StepSizeUnderflow { t, h } => {
                write!(f, "step size underflow at t = {t} (h = {h:e})")
            }
            OdeError::MaxStepsExceeded { t, max_steps } => {
                write!(f, "exceeded {max_steps} steps at t = {t}")
            }
            OdeError::NonFiniteState { t } => write!(f, "non-finite state at t = {t}"),
            OdeError::InvalidGrid => write!(f, "output grid must be finite and non-decreasing"),
        }
    }
}

impl std::error::Error for OdeError {}

/// Solution sampled on the requested output grid.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

// Dormand-Prince 4(5) tableau (DOPRI5).
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order solution weights (same as the last A row: FSAL).
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
// Embedded 4th-order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One accepted step: state and derivative at both endpoints.
#[derive(Debug, Clone)]
pub struct AcceptedStep {
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
}

impl AcceptedStep {
    /// Cubic Hermite interpolation at `t` in `[t0, t1]`.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.y1.clone();
        }
        let s = (t - self.t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (0..self.y0.len())
            .map(|i| {
                h00 * self.y0[i] + h10 * h * self.f0[i] + h01 * self.y1[i] + h11 * h * self.f1[i]
            })
            .collect()
    }
}

/// Adaptive stepper that yields accepted steps until `t_end`.
pub struct OdeStepper<'a, F: FnMut(f64, &[f64], &mut [f64])> {
    rhs: F,
    pub t: f64,
    pub y: Vec<f64>,
    f_cur: Vec<f64>,
    t_end: f64,
    h: f64,
    controls: OdeControls,
    steps_taken: usize,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a, F: FnMut(f64, &[f64], &mut [f64])> OdeStepper<'a, F> {
    pub fn new(mut rhs: F, t0: f64, y0: &[f64], t_end: f64, controls: OdeControls) -> Self {
        let mut f_cur = vec![0.0; y0.len()];
        rhs(t0, y0, &mut f_cur);
        let span = (t_end - t0).max(0.0);
        let h = controls
            .h_init
            .unwrap_or_else(|| {
                // Conservative first guess scaled to tolerance and slope.
                let fmag = f_cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let ymag = y0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let scale = controls.atol + controls.rtol * ymag.max(1.0);
                if fmag > 0.0 { (scale / fmag).powf(0.5).min(span / 10.0) } else { span / 10.0 }
            })
            .max(f64::MIN_POSITIVE);
        let h = match controls.h_max {
            Some(hm) => h.min(hm),
            None => h,
        };
        OdeStepper {
            rhs,
            t: t0,
            y: y0.to_vec(),
            f_cur,
            t_end,
            h: h.max(1e-12),
            controls,
            steps_taken: 0,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn done(&self) -> bool {
        self.t >= self.t_end
    }

    /// Advance by one accepted step (clipped to `t_end`).
    pub fn step(&mut self) -> Result<AcceptedStep, OdeError> {
        let n = self.y.len();
        let mut k = vec![vec![0.0; n]; 7];
        loop {
            if self.steps_taken >= self.controls.max_steps {
                return Err(OdeError::MaxStepsExceeded {
                    t: self.t,
                    max_steps: self.controls.max_steps,
                });
            }
            self.steps_taken += 1;

            let mut h = self.h.min(self.t_end - self.t);
            if let Some(hm) = self.controls.h_max {
                h = h.min(hm);
            }
            if h <= 0.0 {
                h = f64::MIN_POSITIVE;
            }
            let floor = 1e-14 * self.t.abs().max(1.0);
            if h < floor {
                return Err(OdeError::StepSizeUnderflow { t: self.t, h });
            }

            k[0].copy_from_slice(&self.f_cur);
            let mut ytmp = vec![0.0; n];
            for stage in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        acc += A[stage][j] * kj[i];
                    }
                    ytmp[i] = self.y[i] + h * acc;
                }
                let (head, tail) = k.split_at_mut(stage);
                let _ = head;
                (self.rhs)(self.t + C[stage] * h, &ytmp, &mut tail[0]);
            }

            let mut y5 = vec![0.0; n];
            let mut err_norm_sq = 0.0;
            for i in 0..n {
                let mut acc5 = 0.0;
                let mut acc4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    acc5 += B5[j] * kj[i];
                    acc4 += B4[j] * kj[i];
                }
                y5[i] = self.y[i] + h * acc5;
                let e = h * (acc5 - acc4);
                let scale =
                    self.controls.atol + self.controls.rtol * self.y[i].abs().max(y5[i].abs());
                err_norm_sq += (e / scale) * (e / scale);
            }
            let err = (err_norm_sq / n as f64).sqrt();
            if !err.is_finite() || y5.iter().any(|v| !v.is_finite()) {
                self.h = h * 0.25;
                if self.h < floor {
                    return Err(OdeError::NonFiniteState { t: self.t });
                }
                continue;
            }

            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                let t0 = self.t;
                let y0 = std::mem::replace(&mut self.y, y5);
                let f0 = self.f_cur.clone();
                self.t = t0 + h;
                // FSAL: k7 is the derivative at the accepted endpoint.
                self.f_cur.copy_from_slice(&k[6]);
                self.h = h * factor;
                return Ok(AcceptedStep {
                    t0,
                    t1: self.t,
                    y0,
                    y1: self.y.clone(),
                    f0,
                    f1: self.f_cur.clone(),
                });
            }
            self.h = h * factor;
        }
    }
}

/// Integrate from `(t0, y0)` and sample the solution at `grid` times, which
/// must be finite, non-decreasing, and start at or after `t0`.
pub fn integrate_ode<F: FnMut(f64, &[f64], &mut [f64])>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    grid: &[f64],
    controls: OdeControls,
) -> Result<OdeSolution, OdeError> {
    if grid.is_empty() {
        return Ok(OdeSolution { times: vec![], states: vec![] });
    }
    if grid.iter().any(|t| !t.is_finite() || *t < t0) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(OdeError::InvalidGrid);
    }
    let t_end = *grid.last().unwrap();
    let mut stepper = OdeStepper::new(rhs, t0, y0, t_end, controls);
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let mut gi = 0;
    while gi < grid.len() && grid[gi] <= stepper.t {
        times.push(grid[gi]);
        states.push(stepper.y.clone());
        gi += 1;
    }
    while gi < grid.len() {
        if stepper.done() {
            // t_end reached by clipping; remaining grid points equal t_end.
            while gi < grid.len() {
                times.push(grid[gi]);
                states.push(stepper.y.clone());
                gi += 1;
            }
            break;
        }
        let step = stepper.step()?;
        while gi < grid.len() && grid[gi] <= step.t1 {
            times.push(grid[gi]);
            states.push(step.interpolate(grid[gi]));
            gi += 1;
        }
    }
    Ok(OdeSolution { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_high_accuracy() {
        let controls = OdeControls { rtol: 1e-10, atol: 1e-12, ..Default::default() };
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let sol = integrate_ode(
            |_t, y, dy| dy[0] = -y[0],
            0.0,
            &[1.0],
            &grid,
            controls,
        )
        .unwrap();
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!((y[0] - (-t).exp()).abs() < 1e-8, "t = {t}, y = {}", y[0]);
        }
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let controls = OdeControls { rtol: 1e-10, atol: 1e-12, ..Default::default() };
        let grid = vec![2.0 * std::f64::consts::PI];
        let sol = integrate_ode(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &grid,
            controls,
        )
        .unwrap();
        let y = &sol.states[0];
        assert!((y[0] - 1.0).abs() < 1e-7);
        assert!(y[1].abs() < 1e-7);
    }

    #[test]
    fn logistic_against_closed_form() {
        let controls = OdeControls { rtol: 1e-9, atol: 1e-12, ..Default::default() };
        let grid: Vec<f64> = (1..=5).map(|i| i as f64).collect();
        let sol =
            integrate_ode(|_t, y, dy| dy[0] = y[0] * (1.0 - y[0]), 0.0, &[0.1], &grid, controls)
                .unwrap();
        for (t, y) in sol.times.iter().zip(&sol.states) {
            let exact = 0.1 * t.exp() / (1.0 + 0.1 * (t.exp() - 1.0));
            assert!((y[0] - exact).abs() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn stepper_interpolation_consistent() {
        // Cubic Hermite midpoint error is O(h^4), so cap the step size.
        let controls =
            OdeControls { rtol: 1e-9, atol: 1e-12, h_max: Some(0.05), ..Default::default() };
        let mut stepper =
            OdeStepper::new(|t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = t.cos(), 0.0, &[0.0], 3.0, controls);
        while !stepper.done() {
            let step = stepper.step().unwrap();
            let tm = 0.5 * (step.t0 + step.t1);
            let ym = step.interpolate(tm);
            assert!((ym[0] - tm.sin()).abs() < 1e-7);
        }
        assert!((stepper.y[0] - 3.0f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn zero_drift_is_exact() {
        let sol = integrate_ode(
            |_t, _y, dy| dy.fill(0.0),
            0.0,
            &[2.5, -1.0],
            &[10.0],
            OdeControls::default(),
        )
        .unwrap();
        assert_eq!(sol.states[0], vec![2.5, -1.0]);
    }

    #[test]
    fn invalid_grid_rejected() {
        let r = integrate_ode(|_t, _y, dy| dy.fill(0.0), 0.0, &[1.0], &[2.0, 1.0], OdeControls::default());
        assert!(matches!(r, Err(OdeError::InvalidGrid)));
    }

    #[test]
    fn stiff_blowup_reports_underflow_or_nonfinite() {
        // y' = y^2 blows up at t = 1; the integrator must fail cleanly.
        let controls = OdeControls { rtol: 1e-8, atol: 1e-10, max_steps: 200_000, ..Default::default() };
        let r = integrate_ode(|_t, y, dy| dy[0] = y[0] * y[0], 0.0, &[1.0], &[2.0], controls);
        assert!(r.is_err());
    }
}
