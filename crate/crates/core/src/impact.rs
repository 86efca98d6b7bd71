//! Impact functions.
//!
//! Permanent impact acts through the executed quantity: the price moves by
//! `-f(|q0 - q_t|) v_t dt`, with the power-law density
//! `f(q) = k alpha / (q + A)^(1 - alpha)`. Its antiderivatives
//! `F(z) = int_0^z f(|y|) dy` (odd) and `G(z) = int_0^z y f(|y|) dy` (even)
//! carry every closed form in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Quadrature};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermanentImpact {
    k: f64,
    alpha: f64,
    offset: f64,
}

impl PermanentImpact {
    /// `k > 0`, `alpha` in `(0, 1]`, regularization `offset >= 0`.
    pub fn new(k: f64, alpha: f64, offset: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid("k", format!("must be > 0, got {k}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(Error::invalid("A", format!("must be >= 0, got {offset}")));
        }
        Ok(Self { k, alpha, offset })
    }

    /// Pure power law `F(q) = k sgn(q) |q|^alpha`.
    pub fn power_law(k: f64, alpha: f64) -> Result<Self> {
        Self::new(k, alpha, 0.0)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_power_law(&self) -> bool {
        self.offset == 0.0
    }

    /// Density `f(q)` for `q >= 0`.
    pub fn density(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(Error::Domain(format!("density needs q >= 0, got {q}")));
        }
        if q == 0.0 && self.offset == 0.0 && self.alpha < 1.0 {
            return Err(Error::Domain(
                "density is unbounded at q = 0 when A = 0 and alpha < 1; use the cumulative impact".into(),
            ));
        }
        Ok(self.density_unchecked(q))
    }

    fn density_unchecked(&self, q: f64) -> f64 {
        if self.alpha == 1.0 {
            return self.k;
        }
        self.k * self.alpha * (q + self.offset).powf(self.alpha - 1.0)
    }

    /// Cumulative impact `F(z)`, odd in `z`.
    pub fn cumulative(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        let a = z.abs();
        let mag = if self.offset == 0.0 {
            self.k * a.powf(self.alpha)
        } else {
            self.k * ((a + self.offset).powf(self.alpha) - self.offset.powf(self.alpha))
        };
        mag.copysign(z)
    }

    /// Potential `G(z)`, even in `z`, non-negative.
    pub fn potential(&self, z: f64) -> f64 {
        self.potential_quadrature(z).value
    }

    /// `G(z)` with its quadrature error estimate; exact (zero error) when
    /// `A = 0`.
    pub fn potential_quadrature(&self, z: f64) -> Quadrature {
        let a = z.abs();
        if self.offset == 0.0 {
            return Quadrature {
                value: self.k * self.alpha / (1.0 + self.alpha) * a.powf(1.0 + self.alpha),
                error: 0.0,
                converged: true,
            };
        }
        if self.alpha == 1.0 {
            return Quadrature {
                value: 0.5 * self.k * a * a,
                error: 0.0,
                converged: true,
            };
        }
        quadrature::adaptive_simpson(|y| y * self.density_unchecked(y), 0.0, a, quadrature::DEFAULT_TOLERANCE)
    }
}

/// Execution cost `h(t, v) = eta sgn(v) |v|^beta`; `eta = 0` switches the
/// cost off. Time dependence is not modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstantaneousImpact {
    eta: f64,
    beta: f64,
}

impl InstantaneousImpact {
    pub fn new(eta: f64, beta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be >= 0, got {eta}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1], got {beta}")));
        }
        Ok(Self { eta, beta })
    }

    pub fn zero() -> Self {
        Self { eta: 0.0, beta: 1.0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_zero(&self) -> bool {
        self.eta == 0.0
    }

    pub fn cost(&self, _t: f64, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        (self.eta * v.abs().powf(self.beta)).copysign(v)
    }

    /// `h(t, v) v = eta |v|^(1 + beta) >= 0`.
    pub fn cost_rate(&self, v: f64) -> f64 {
        if v == 0.0 || self.eta == 0.0 {
            return 0.0;
        }
        self.eta * v.abs().powf(1.0 + self.beta)
    }
}

/// Rate-dependent permanent impact `k(v) = kv sgn(v) |v|^gamma` of the
/// classical framework; `gamma = 1` is the linear case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityImpact {
    kv: f64,
    gamma: f64,
}

impl VelocityImpact {
    pub fn new(kv: f64, gamma: f64) -> Result<Self> {
        if !(kv > 0.0 && kv.is_finite()) {
            return Err(Error::invalid("kv", format!("must be > 0, got {kv}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be > 0, got {gamma}")));
        }
        Ok(Self { kv, gamma })
    }

    pub fn linear(kv: f64) -> Result<Self> {
        Self::new(kv, 1.0)
    }

    pub fn kv(&self) -> f64 {
        self.kv
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_linear(&self) -> bool {
        self.gamma == 1.0
    }

    pub fn impact(&self, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        self.kv * v.abs().powf(self.gamma).copysign(v)
    }
}
