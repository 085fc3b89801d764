//! Simulated gyroscope traces and rotation-only homographies.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{NebiError, Result};
use crate::isp::Intrinsics;
use crate::rng::Rng;

/// Ornstein-Uhlenbeck angular-velocity process, per axis:
/// `w[k+1] = w[k] * (1 - theta*dt) + sigma * sqrt(dt) * eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    /// Mean-reversion rate, 1/s.
    pub theta: f64,
    /// Diffusion, rad/s per sqrt(s).
    pub sigma: f64,
    /// Draw the initial velocity from the stationary law
    /// `N(0, sigma^2 / (2 theta))`; otherwise start at rest.
    pub stationary_start: bool,
}

impl Default for OuParams {
    fn default() -> Self {
        OuParams {
            theta: 2.0,
            sigma: 0.16,
            stationary_start: true,
        }
    }
}

impl OuParams {
    pub fn stationary_std(&self) -> f64 {
        if self.theta > 0.0 {
            self.sigma / (2.0 * self.theta).sqrt()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GyroTrace {
    rate_hz: f64,
    times: Vec<f64>,
    omega: Vec<[f64; 3]>,
}

impl GyroTrace {
    /// Uniformly sampled trace starting at t = 0.
    pub fn new(rate_hz: f64, omega: Vec<[f64; 3]>) -> Result<Self> {
        if !(rate_hz > 0.0) || omega.len() < 2 {
            return Err(NebiError::Config("gyro trace needs a positive rate and two samples".into()));
        }
        let times = (0..omega.len()).map(|k| k as f64 / rate_hz).collect();
        Ok(GyroTrace { rate_hz, times, omega })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn omega(&self) -> &[[f64; 3]] {
        &self.omega
    }
    pub fn start(&self) -> f64 {
        self.times[0]
    }
    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    /// Piecewise-linear angular velocity at `t` (clamped to the span).
    pub fn omega_at(&self, t: f64) -> [f64; 3] {
        let u = ((t - self.start()) * self.rate_hz).clamp(0.0, (self.times.len() - 1) as f64);
        let k = (u.floor() as usize).min(self.times.len() - 2);
        let f = u - k as f64;
        let (a, b) = (self.omega[k], self.omega[k + 1]);
        [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * f)
    }
}

pub fn simulate_gyro(duration_s: f64, rate_hz: f64, rng: &mut Rng, params: &OuParams) -> Result<GyroTrace> {
    if !(duration_s > 0.0) {
        return Err(NebiError::Config(format!("gyro duration {duration_s} must be positive")));
    }
    if !(rate_hz >= 200.0) {
        return Err(NebiError::Config(format!("gyro rate {rate_hz} Hz below 200 Hz")));
    }
    let dt = 1.0 / rate_hz;
    let steps = (duration_s * rate_hz - 1e-9).ceil().max(1.0) as usize;
    let decay = 1.0 - params.theta * dt;
    let kick = params.sigma * dt.sqrt();
    let mut w = if params.stationary_start {
        let s = params.stationary_std();
        [rng.gaussian() * s, rng.gaussian() * s, rng.gaussian() * s]
    } else {
        [0.0; 3]
    };
    let mut omega = Vec::with_capacity(steps + 1);
    omega.push(w);
    for _ in 0..steps {
        for wi in &mut w {
            *wi = *wi * decay + kick * rng.gaussian();
        }
        omega.push(w);
    }
    GyroTrace::new(rate_hz, omega)
}

/// Projective 3x3 map normalized so that `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    pub fn new(h: Matrix3<f64>) -> Result<Self> {
        let s = h[(2, 2)];
        if s.abs() < 1e-12 || h.determinant().abs() < 1e-12 {
            return Err(NebiError::SingularHomography);
        }
        Ok(Homography { h: h / s })
    }

    pub fn identity() -> Self {
        Homography { h: Matrix3::identity() }
    }

    /// Pure translation by `(dx, dy)` pixels.
    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography {
            h: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0),
        }
    }

    /// `K R K^-1` for camera rotation `r`.
    pub fn from_rotation(r: &Rotation3<f64>, k: &Intrinsics) -> Result<Self> {
        Self::new(k.matrix() * r.matrix() * k.inverse())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let p = self.h * Vector3::new(x, y, 1.0);
        (p[0] / p[2], p[1] / p[2])
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self.h.try_inverse().ok_or(NebiError::SingularHomography)?;
        Self::new(inv)
    }
}

/// Rotation accumulated from `t0` to each of `m` uniformly spaced times in
/// `[t0, t1]`, integrating the piecewise-linear angular velocity with the
/// midpoint rule between knots and composing exact axis-angle increments.
pub fn integrate_rotations(trace: &GyroTrace, t0: f64, t1: f64, m: usize) -> Result<Vec<Rotation3<f64>>> {
    let tol = 1e-9;
    if m == 0 {
        return Err(NebiError::Config("need at least one homography".into()));
    }
    if t0 < trace.start() - tol || t1 > trace.end() + tol || t1 < t0 {
        return Err(NebiError::IntervalOutsideTrace {
            t0,
            t1,
            start: trace.start(),
            end: trace.end(),
        });
    }
    let taus: Vec<f64> = if m == 1 {
        vec![t0]
    } else {
        (0..m).map(|j| t0 + (t1 - t0) * j as f64 / (m - 1) as f64).collect()
    };
    let rate = trace.rate_hz();
    let mut out = Vec::with_capacity(m);
    let mut r = Rotation3::identity();
    let mut t = t0;
    for &tau in &taus {
        while t < tau {
            // Next knot strictly after t, or tau.
            let next_knot = ((t * rate + 1e-9).floor() + 1.0) / rate;
            let b = next_knot.min(tau);
            let mid = trace.omega_at(0.5 * (t + b));
            let dt = b - t;
            r *= Rotation3::new(Vector3::new(mid[0], mid[1], mid[2]) * dt);
            t = b;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn trace_to_homographies(
    trace: &GyroTrace,
    t0: f64,
    t1: f64,
    m: usize,
    k: &Intrinsics,
) -> Result<Vec<Homography>> {
    integrate_rotations(trace, t0, t1, m)?
        .iter()
        .map(|r| Homography::from_rotation(r, k))
        .collect()
}
