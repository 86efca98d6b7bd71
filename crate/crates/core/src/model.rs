//! Exact expectations of the execution model.
//!
//! The model is
//!
//! ```text
//! dq_t = -v_t dt
//! dS_t = sigma dW_t - f(|q0 - q_t|) v_t dt
//! dX_t = v_t S_t dt - h(t, v_t) v_t dt
//! ```
//!
//! Every stochastic term in `X_T` is a martingale, so all expectations here
//! are deterministic integrals, evaluated segment by segment along the
//! piecewise-linear trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impact::{InstantaneousImpact, PermanentImpact};
use crate::quadrature::DEFAULT_TOLERANCE;
use crate::trajectory::{Schedule, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma: f64,
    pub s0: f64,
    pub x0: f64,
    pub permanent: PermanentImpact,
    pub instantaneous: InstantaneousImpact,
}

impl ModelParams {
    pub fn new(
        sigma: f64,
        s0: f64,
        x0: f64,
        permanent: PermanentImpact,
        instantaneous: InstantaneousImpact,
    ) -> Result<Self> {
        let m = Self {
            sigma,
            s0,
            x0,
            permanent,
            instantaneous,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid("S0", format!("must be > 0, got {}", self.s0)));
        }
        if !self.x0.is_finite() {
            return Err(Error::invalid("X0", "must be finite"));
        }
        Ok(())
    }
}

/// `int_0^T h(t, v_t) v_t dt`, exact on piecewise-constant rates.
pub fn cumulative_cost(h: &InstantaneousImpact, traj: &Trajectory) -> f64 {
    traj.segments().map(|s| h.cost_rate(s.rate()) * s.duration()).sum()
}

/// `int_0^T (q_T - q_t) f(|q0 - q_t|) v_t dt`.
///
/// On a linear segment the substitution `y = q0 - q_t` gives
/// `(q_T - q0) [F(y)] + [G(y)]` between the segment's end values, so `f` is
/// never sampled at the singular point `y = 0`.
pub fn permanent_cash_term(p: &PermanentImpact, traj: &Trajectory) -> Result<f64> {
    let q0 = traj.q0();
    let q_end = traj.q_end();
    let mut total = 0.0;
    let mut err = 0.0;
    for seg in traj.segments() {
        if seg.q_start == seg.q_end {
            continue;
        }
        let ya = q0 - seg.q_start;
        let yb = q0 - seg.q_end;
        let ga = p.potential_quadrature(ya);
        let gb = p.potential_quadrature(yb);
        err += ga.error + gb.error;
        if !(ga.converged && gb.converged) {
            return Err(Error::Quadrature {
                achieved: err,
                tolerance: DEFAULT_TOLERANCE,
            });
        }
        total += (q_end - q0) * (p.cumulative(yb) - p.cumulative(ya)) + (gb.value - ga.value);
    }
    Ok(total)
}

/// `E[X_T]` for an arbitrary trajectory.
pub fn expected_terminal_cash(m: &ModelParams, traj: &Trajectory) -> Result<f64> {
    let q0 = traj.q0();
    let q_end = traj.q_end();
    let permanent = permanent_cash_term(&m.permanent, traj)?;
    Ok(m.x0 + (q0 - q_end) * m.s0 + permanent - cumulative_cost(&m.instantaneous, traj))
}

/// `E[X_T]` for a liquidation under the pure power law:
/// `X0 + q0 S0 - k/(1+alpha) |q0|^(1+alpha) - int h v dt`.
pub fn expected_liquidation_cash_powerlaw(m: &ModelParams, q0: f64, traj: &Trajectory) -> Result<f64> {
    if !m.permanent.is_power_law() {
        return Err(Error::invalid("A", "closed form requires A = 0"));
    }
    if !traj.is_liquidation() {
        return Err(Error::NotLiquidation { q_end: traj.q_end() });
    }
    if q0 != traj.q0() {
        return Err(Error::invalid(
            "q0",
            format!("{q0} does not match the trajectory's initial inventory {}", traj.q0()),
        ));
    }
    let (k, alpha) = (m.permanent.k(), m.permanent.alpha());
    let permanent = k / (1.0 + alpha) * q0.abs().powf(1.0 + alpha);
    Ok(m.x0 + q0 * m.s0 - permanent - cumulative_cost(&m.instantaneous, traj))
}

/// `E[S_T' - S0] = -F(q0)` after liquidating `q0`, for any `T' >= T`.
pub fn expected_permanent_shift(p: &PermanentImpact, q0: f64) -> f64 {
    -p.cumulative(q0)
}

/// Symmetric 2x2 covariance of the two estimation residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance2 {
    pub var1: f64,
    pub cov: f64,
    pub var2: f64,
}

impl Covariance2 {
    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.var1, self.cov], [self.cov, self.var2]]
    }

    pub fn correlation(&self) -> f64 {
        let d = (self.var1 * self.var2).sqrt();
        if d == 0.0 {
            0.0
        } else {
            self.cov / d
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.var1 >= -tol && self.var2 >= -tol && self.var1 * self.var2 - self.cov * self.cov >= -tol
    }
}

fn check_covariance_inputs(traj: &Trajectory, alpha: f64, sigma: f64, delta: f64) -> Result<()> {
    if !traj.is_liquidation() {
        return Err(Error::NotLiquidation { q_end: traj.q_end() });
    }
    if traj.q0() == 0.0 {
        return Err(Error::invalid("q0", "must be non-zero"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma", "must be >= 0"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", "must be >= 0"));
    }
    Ok(())
}

/// Covariance of `(eps1, eps2)` for a liquidation observed at `T' = T + delta`.
///
/// The linear schedule uses its closed form; other trajectories integrate
/// `q_t/q0 - 1/(1+alpha)` exactly over each linear segment.
pub fn error_covariance(traj: &Trajectory, alpha: f64, sigma: f64, delta: f64) -> Result<Covariance2> {
    check_covariance_inputs(traj, alpha, sigma, delta)?;
    match traj.schedule() {
        Schedule::Linear => Ok(linear_schedule_covariance(alpha, sigma, traj.horizon(), delta)),
        Schedule::Knots => error_covariance_by_integral(traj, alpha, sigma, delta),
    }
}

/// General-trajectory route, also valid for the linear schedule.
pub fn error_covariance_by_integral(traj: &Trajectory, alpha: f64, sigma: f64, delta: f64) -> Result<Covariance2> {
    check_covariance_inputs(traj, alpha, sigma, delta)?;
    let c = 1.0 / (1.0 + alpha);
    let q0 = traj.q0();
    let (mut first, mut second) = (0.0, 0.0);
    for seg in traj.segments() {
        let ua = seg.q_start / q0 - c;
        let ub = seg.q_end / q0 - c;
        let dt = seg.duration();
        first += dt * (ua + ub) / 2.0;
        second += dt * (ua * ua + ua * ub + ub * ub) / 3.0;
    }
    let s2 = sigma * sigma;
    Ok(Covariance2 {
        var1: s2 * (traj.horizon() + delta),
        cov: s2 * (delta * c - first),
        var2: s2 * (delta * c * c + second),
    })
}

/// Closed form for `q_t = q0 (1 - t/T)`.
pub fn linear_schedule_covariance(alpha: f64, sigma: f64, horizon: f64, delta: f64) -> Covariance2 {
    let c = 1.0 / (1.0 + alpha);
    let s2 = sigma * sigma;
    Covariance2 {
        var1: s2 * (horizon + delta),
        cov: s2 * (delta * c + horizon * (c - 0.5)),
        var2: s2 * (delta * c * c + horizon / 3.0 * (1.0 + alpha.powi(3)) * c.powi(3)),
    }
}
