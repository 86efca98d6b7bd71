//! Two-equation impact estimation from synthetic metaorders.
//!
//! For a liquidation of `q0` over `[0, T]` observed at `T' = T + delta`:
//!
//! ```text
//! y1 = S_T' - S0                                  = -k sgn(q0)|q0|^alpha + eps1
//! y2 = (S_T' + alpha S0)/(1+alpha) - (X_T - X0)/q0 = (1/q0) int h v dt   + eps2
//! ```
//!
//! With the linear schedule and `h(v) = eta sgn(v)|v|^beta`, the second
//! right-hand side is `eta sgn(q0)|q0/T|^beta`. Sells (`q0 > 0`) give
//! positive slippage and positive `y2`. `alpha = 1` reduces `y2` to the
//! midpoint form `(S_T' + S0)/2 - (X_T - X0)/q0`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ModelParams};
use crate::optim;
use crate::simulator::{self, GridConfig};
use crate::trajectory::{Schedule, Trajectory};
use crate::{rng, stats};

/// One executed metaorder, the unit of estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaorderRecord {
    pub id: u64,
    /// Signed size; positive sells.
    pub q0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub delta: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    #[serde(rename = "S_Tprime")]
    pub s_tprime: f64,
    /// `X_T - X0`.
    pub cash_change: f64,
    pub sigma: f64,
    pub schedule: Schedule,
}

impl MetaorderRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be > 0 (record {})", self.id)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::invalid("delta", format!("must be >= 0 (record {})", self.id)));
        }
        if self.q0 == 0.0 || !self.q0.is_finite() {
            return Err(Error::invalid("q0", format!("must be non-zero (record {})", self.id)));
        }
        if !(self.s0 > 0.0) {
            return Err(Error::invalid("S0", format!("must be > 0 (record {})", self.id)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("sigma", format!("must be >= 0 (record {})", self.id)));
        }
        Ok(())
    }

    /// `q0 S0 - (X_T - X0)`: positive for a sell that received less than
    /// the pre-trade mark.
    pub fn slippage(&self) -> f64 {
        self.q0 * self.s0 - self.cash_change
    }
}

/// `S_T' - S0`.
pub fn observable_y1(r: &MetaorderRecord) -> f64 {
    r.s_tprime - r.s0
}

/// `(S_T' + alpha S0)/(1 + alpha) - (X_T - X0)/q0`.
pub fn observable_y2(r: &MetaorderRecord, alpha: f64) -> Result<f64> {
    if r.q0 == 0.0 {
        return Err(Error::invalid("q0", "must be non-zero"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    Ok((r.s_tprime + alpha * r.s0) / (1.0 + alpha) - r.cash_change / r.q0)
}

/// Percentage form of the decomposition: slippage and price return as
/// fractions of the pre-trade notional `q0 S0` and price `S0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub slippage: f64,
    pub price_return: f64,
    /// `slippage + price_return / (1 + alpha)`, an estimate of cumulated
    /// instantaneous impact over `q0 S0`.
    pub instantaneous_impact: f64,
}

/// Display-only rewrite of `y2 / S0`.
pub fn percentage_decomposition(r: &MetaorderRecord, alpha: f64) -> Result<Decomposition> {
    let y2 = observable_y2(r, alpha)?;
    let slippage = r.slippage() / (r.q0 * r.s0);
    let price_return = (r.s_tprime - r.s0) / r.s0;
    debug_assert!((slippage + price_return / (1.0 + alpha) - y2 / r.s0).abs() < 1e-9 * (1.0 + y2.abs()));
    Ok(Decomposition {
        slippage,
        price_return,
        instantaneous_impact: slippage + price_return / (1.0 + alpha),
    })
}

/// Sampling design for synthetic metaorders. Sizes are log-uniform in
/// magnitude with alternating sign (even ids sell, odd ids buy); horizons
/// and lags are uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetDesign {
    pub n_orders: usize,
    pub q0_range: (f64, f64),
    pub horizon_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub n_steps: usize,
}

impl DatasetDesign {
    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, (lo, hi): (f64, f64), strict: bool| {
            let ok_lo = if strict { lo > 0.0 } else { lo >= 0.0 };
            if !(ok_lo && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid(name, format!("bad range [{lo}, {hi}]")));
            }
            Ok(())
        };
        if self.n_orders == 0 {
            return Err(Error::invalid("n_orders", "must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be >= 1"));
        }
        check("q0", self.q0_range, true)?;
        check("T", self.horizon_range, true)?;
        check("delta", self.delta_range, false)
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Simulates `n_orders` linear-schedule liquidations. Record `i` draws its
/// design from stream `split(split(base, i), 0)` and its path from seed
/// `split(split(base, i), 1)`.
pub fn generate_dataset(truth: &ModelParams, design: &DatasetDesign, base_seed: u64) -> Result<Vec<MetaorderRecord>> {
    truth.validate()?;
    design.validate()?;
    (0..design.n_orders as u64)
        .into_par_iter()
        .map(|i| {
            let seed = rng::split(base_seed, i);
            let mut draw = rng::stream(rng::split(seed, 0));
            let (lo, hi) = design.q0_range;
            let mag = uniform(&mut draw, (lo.ln(), hi.ln())).exp();
            let q0 = if i % 2 == 0 { mag } else { -mag };
            let horizon = uniform(&mut draw, design.horizon_range);
            let delta = uniform(&mut draw, design.delta_range);
            let traj = Trajectory::linear(q0, horizon)?;
            let grid = GridConfig::new(design.n_steps, delta)?;
            let out = simulator::simulate_outcome(truth, &traj, &grid, rng::split(seed, 1))?;
            Ok(MetaorderRecord {
                id: i,
                q0,
                horizon,
                delta,
                s0: truth.s0,
                s_tprime: out.price_terminal,
                cash_change: out.cash_terminal - truth.x0,
                sigma: truth.sigma,
                schedule: Schedule::Linear,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    /// `k` for the permanent fit, `eta` for the instantaneous one.
    pub scale: f64,
    /// `alpha` or `beta`.
    pub exponent: f64,
    pub scale_stderr: f64,
    pub exponent_stderr: f64,
    /// Weighted residual sum of squares at the optimum.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n: usize,
}

/// Search interval for fitted exponents.
pub const EXPONENT_RANGE: (f64, f64) = (1e-3, 1.0);
const SCAN_POINTS: usize = 200;
const LINE_TOLERANCE: f64 = 1e-10;
const LINE_MAX_ITER: usize = 200;

/// Weighted fit of `y_i = c sgn_i z_i^theta` with `c` profiled out in closed
/// form and `theta` found by scanned golden section.
struct ProfiledPowerFit<'a> {
    y: &'a [f64],
    /// `+-1`, the sign multiplying the regressor.
    sign: &'a [f64],
    /// `z_i > 0`.
    z: &'a [f64],
    w: &'a [f64],
}

impl ProfiledPowerFit<'_> {
    fn profile(&self, theta: f64) -> (f64, f64) {
        let x = |i: usize| self.sign[i] * self.z[i].powf(theta);
        let n = self.y.len();
        let sxy = stats::sum((0..n).map(|i| self.w[i] * x(i) * self.y[i]));
        let sxx = stats::sum((0..n).map(|i| self.w[i] * x(i) * x(i)));
        let c = sxy / sxx;
        let rss = stats::sum((0..n).map(|i| self.w[i] * (self.y[i] - c * x(i)).powi(2)));
        (c, rss)
    }

    fn solve(&self) -> Result<FitResult> {
        let n = self.y.len();
        let distinct = self.z.iter().any(|&z| (z - self.z[0]).abs() > 1e-12 * self.z[0].abs());
        if n < 3 || !distinct {
            return Err(Error::NotIdentifiable(format!(
                "need >= 3 records spanning >= 2 distinct sizes, got {n} record(s){}",
                if distinct { "" } else { " at a single size" }
            )));
        }
        let (lo, hi) = EXPONENT_RANGE;
        let line = optim::scan_then_golden(
            |t| self.profile(t).1,
            lo,
            hi,
            SCAN_POINTS,
            LINE_TOLERANCE,
            LINE_MAX_ITER,
        );
        if !line.converged || !line.value.is_finite() {
            return Err(Error::NotConverged {
                iterations: line.iterations,
            });
        }
        let theta = line.x;
        let (c, rss) = self.profile(theta);

        // Gauss-Newton covariance s^2 (J' W J)^-1 with J = [x, c x ln z]
        let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let x = self.sign[i] * self.z[i].powf(theta);
            let jc = x;
            let jt = c * x * self.z[i].ln();
            a11 += self.w[i] * jc * jc;
            a12 += self.w[i] * jc * jt;
            a22 += self.w[i] * jt * jt;
        }
        let det = a11 * a22 - a12 * a12;
        let s2 = rss / (n - 2) as f64;
        let (var_c, var_t) = if det > 0.0 {
            (s2 * a22 / det, s2 * a11 / det)
        } else if s2 == 0.0 {
            (0.0, 0.0)
        } else {
            return Err(Error::NotIdentifiable("singular Gauss-Newton matrix".into()));
        };
        Ok(FitResult {
            scale: c,
            exponent: theta,
            scale_stderr: var_c.max(0.0).sqrt(),
            exponent_stderr: var_t.max(0.0).sqrt(),
            objective: rss,
            iterations: line.iterations,
            converged: true,
            n,
        })
    }
}

/// Volatility used for weighting: the record's own, unless some record is
/// noiseless, in which case all records are weighted as if `sigma = 1`.
fn weighting_sigmas(records: &[MetaorderRecord]) -> Vec<f64> {
    if records.iter().all(|r| r.sigma > 0.0) {
        records.iter().map(|r| r.sigma).collect()
    } else {
        vec![1.0; records.len()]
    }
}

fn validate_all(records: &[MetaorderRecord]) -> Result<()> {
    for r in records {
        r.validate()?;
        if r.schedule != Schedule::Linear {
            return Err(Error::invalid(
                "schedule",
                format!(
                    "record {} uses `{}`; only the linear schedule is supported",
                    r.id,
                    r.schedule.as_str()
                ),
            ));
        }
    }
    Ok(())
}

/// `Var(eps1)` and `Var(eps2)` of each record under `alpha`.
pub fn record_variances(records: &[MetaorderRecord], alpha: f64) -> Vec<model::Covariance2> {
    let sig = weighting_sigmas(records);
    records
        .iter()
        .zip(sig)
        .map(|(r, s)| model::linear_schedule_covariance(alpha, s, r.horizon, r.delta))
        .collect()
}

/// Weighted least squares of `y1` on `-sgn(q0)|q0|^alpha` with weights
/// `1 / (sigma^2 (T + delta))`.
pub fn fit_permanent(records: &[MetaorderRecord]) -> Result<FitResult> {
    validate_all(records)?;
    let y: Vec<f64> = records.iter().map(observable_y1).collect();
    let sign: Vec<f64> = records.iter().map(|r| -r.q0.signum()).collect();
    let z: Vec<f64> = records.iter().map(|r| r.q0.abs()).collect();
    let w: Vec<f64> = records
        .iter()
        .zip(weighting_sigmas(records))
        .map(|(r, s)| 1.0 / (s * s * (r.horizon + r.delta)))
        .collect();
    ProfiledPowerFit {
        y: &y,
        sign: &sign,
        z: &z,
        w: &w,
    }
    .solve()
}

/// GLS of `y2(alpha)` on `sgn(q0)|q0/T|^beta` weighted by `1 / Var(eps2)`.
pub fn fit_instantaneous(records: &[MetaorderRecord], alpha: f64) -> Result<FitResult> {
    validate_all(records)?;
    let y = records
        .iter()
        .map(|r| observable_y2(r, alpha))
        .collect::<Result<Vec<f64>>>()?;
    let sign: Vec<f64> = records.iter().map(|r| r.q0.signum()).collect();
    let z: Vec<f64> = records.iter().map(|r| (r.q0 / r.horizon).abs()).collect();
    let w: Vec<f64> = record_variances(records, alpha).iter().map(|c| 1.0 / c.var2).collect();
    ProfiledPowerFit {
        y: &y,
        sign: &sign,
        z: &z,
        w: &w,
    }
    .solve()
}

/// Both stages: permanent first, then instantaneous given `alpha_hat`
/// (or a forced `alpha`).
pub fn fit_two_stage(records: &[MetaorderRecord], forced_alpha: Option<f64>) -> Result<(FitResult, FitResult, f64)> {
    let perm = fit_permanent(records)?;
    let alpha = forced_alpha.unwrap_or(perm.exponent);
    let inst = fit_instantaneous(records, alpha)?;
    Ok((perm, inst, alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub ids: Vec<u64>,
    /// `eps1_hat / sqrt(Var eps1)`.
    pub z1: Vec<f64>,
    /// `eps2_hat / sqrt(Var eps2)`.
    pub z2: Vec<f64>,
    pub var_z1: f64,
    pub var_z2: f64,
    pub empirical_correlation: f64,
    /// Average of the per-record closed-form correlations.
    pub theoretical_correlation: f64,
    /// Correlation of `z2` with `sgn(q0)|q0|^alpha_hat`.
    pub misspecification_correlation: f64,
    /// `3 / sqrt(n)`: the band for `misspecification_correlation` under a
    /// correct model.
    pub band: f64,
}

impl ResidualReport {
    pub fn misspecified(&self) -> bool {
        self.misspecification_correlation.abs() > self.band
    }

    /// Per-record residuals as `id,z1,z2`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["id", "z1", "z2"]).map_err(csv_err)?;
        for i in 0..self.ids.len() {
            w.write_record([self.ids[i].to_string(), self.z1[i].to_string(), self.z2[i].to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Summary as `statistic,value`.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["statistic", "value"]).map_err(csv_err)?;
        for (k, v) in [
            ("n", self.ids.len() as f64),
            ("var_z1", self.var_z1),
            ("var_z2", self.var_z2),
            ("empirical_correlation", self.empirical_correlation),
            ("theoretical_correlation", self.theoretical_correlation),
            ("misspecification_correlation", self.misspecification_correlation),
            ("band", self.band),
        ] {
            w.write_record([k.to_string(), v.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Standardized residuals of both equations. `alpha_y2` is the exponent
/// that was used to build `y2` for the instantaneous fit.
pub fn residual_diagnostics(
    records: &[MetaorderRecord],
    permanent: &FitResult,
    instantaneous: &FitResult,
    alpha_y2: f64,
) -> Result<ResidualReport> {
    if !(permanent.converged && instantaneous.converged) {
        return Err(Error::NotConverged {
            iterations: permanent.iterations.max(instantaneous.iterations),
        });
    }
    validate_all(records)?;
    let (k, alpha) = (permanent.scale, permanent.exponent);
    let (eta, beta) = (instantaneous.scale, instantaneous.exponent);
    let vars = record_variances(records, alpha_y2);
    let standardize = |e: f64, v: f64| if v > 0.0 { e / v.sqrt() } else { e };
    let mut z1 = Vec::with_capacity(records.len());
    let mut z2 = Vec::with_capacity(records.len());
    let mut regressor = Vec::with_capacity(records.len());
    for (r, c) in records.iter().zip(&vars) {
        let signed_size = r.q0.signum() * r.q0.abs().powf(alpha);
        let e1 = observable_y1(r) + k * signed_size;
        let e2 = observable_y2(r, alpha_y2)? - eta * r.q0.signum() * (r.q0 / r.horizon).abs().powf(beta);
        z1.push(standardize(e1, c.var1));
        z2.push(standardize(e2, c.var2));
        regressor.push(signed_size);
    }
    let n = records.len();
    Ok(ResidualReport {
        ids: records.iter().map(|r| r.id).collect(),
        var_z1: stats::variance(&z1),
        var_z2: stats::variance(&z2),
        empirical_correlation: stats::correlation(&z1, &z2),
        theoretical_correlation: stats::mean(&vars.iter().map(|c| c.correlation()).collect::<Vec<_>>()),
        misspecification_correlation: stats::correlation(&z2, &regressor),
        band: 3.0 / (n as f64).sqrt(),
        z1,
        z2,
    })
}

/// Estimates as `parameter,estimate,stderr` rows.
pub fn write_fit_csv<W: Write>(out: W, fits: &[(&str, &FitResult)]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "stage",
        "parameter",
        "estimate",
        "stderr",
        "objective",
        "iterations",
        "converged",
        "n",
    ])
    .map_err(csv_err)?;
    for (stage, f) in fits {
        let (scale_name, exp_name) = if stage.starts_with("permanent") {
            ("k", "alpha")
        } else {
            ("eta", "beta")
        };
        for (p, est, se) in [
            (scale_name, f.scale, f.scale_stderr),
            (exp_name, f.exponent, f.exponent_stderr),
        ] {
            w.write_record([
                stage.to_string(),
                p.to_string(),
                est.to_string(),
                se.to_string(),
                f.objective.to_string(),
                f.iterations.to_string(),
                f.converged.to_string(),
                f.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
