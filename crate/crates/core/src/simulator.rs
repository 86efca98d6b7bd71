//! Path simulation of `(q_t, S_t, X_t)` and Monte Carlo ensembles.
//!
//! The permanent drift of `S` telescopes: along any path
//! `int_0^t f(|q0 - q_s|) v_s ds = F(q0 - q_t)`, so prices are sampled as
//! `S_t = S0 - F(q0 - q_t) + sigma W_t`, exact in distribution on the grid.
//! Cash accumulates `v S dt = -S dq` by the trapezoid rule on each step
//! and subtracts the exact execution cost of the step; that trapezoid is
//! the only discretization error.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Covariance2, ModelParams};
use crate::trajectory::Trajectory;
use crate::{model, rng, stats};

/// Uniform execution grid of `n_steps` on `[0, T]` (so `T` is a grid
/// point), followed by `ceil(delta / dt)` equal steps covering the
/// observation lag `(T, T + delta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_steps: usize,
    pub delta: f64,
}

impl GridConfig {
    pub fn new(n_steps: usize, delta: f64) -> Result<Self> {
        let g = Self { n_steps, delta };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be >= 1"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta", format!("must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }

    /// Grid times for horizon `T`; `times[n_steps] == T` exactly.
    pub fn times(&self, horizon: f64) -> Vec<f64> {
        let n = self.n_steps;
        let dt = horizon / n as f64;
        let mut times: Vec<f64> = (0..n).map(|i| horizon * i as f64 / n as f64).collect();
        times.push(horizon);
        if self.delta > 0.0 {
            let n_post = ((self.delta / dt) - 1e-9).ceil().max(1.0) as usize;
            for j in 1..n_post {
                times.push(horizon + self.delta * j as f64 / n_post as f64);
            }
            times.push(horizon + self.delta);
        }
        times
    }
}

/// Terminal observables of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    /// `S_{T'}`.
    pub price_terminal: f64,
    /// `X_T` (equal to `X_{T'}`, nothing trades after `T`).
    pub cash_terminal: f64,
    /// Realized `int_0^T h(t, v_t) v_t dt`.
    pub cost: f64,
    /// Left-point sum of `sigma (q_T - q_t) dW_t` over `[0, T]`.
    pub martingale: f64,
    /// `W_{T'}`.
    pub brownian_terminal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub outcome: PathOutcome,
    pub seed: u64,
}

impl SimulatedPath {
    /// Writes `t,q,S,X` with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "q", "S", "X"]).map_err(csv_err)?;
        for i in 0..self.times.len() {
            w.write_record([
                self.times[i].to_string(),
                self.q[i].to_string(),
                self.s[i].to_string(),
                self.x[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn step_cost(m: &ModelParams, traj: &Trajectory, a: f64, b: f64) -> f64 {
    let h = &m.instantaneous;
    if h.is_zero() || a >= traj.horizon() {
        return 0.0;
    }
    let b = b.min(traj.horizon());
    let mut total = 0.0;
    let mut left = a;
    for t in traj.interior_knot_times(a, b).chain(std::iter::once(b)) {
        let v = traj.rate_at(0.5 * (left + t));
        total += h.cost_rate(v) * (t - left);
        left = t;
    }
    total
}

fn run_path<R, V>(m: &ModelParams, traj: &Trajectory, times: &[f64], rng: &mut R, mut visit: V) -> PathOutcome
where
    R: rand::Rng,
    V: FnMut(f64, f64, f64, f64),
{
    let p = &m.permanent;
    let q0 = traj.q0();
    let q_end = traj.q_end();
    let sigma = m.sigma;

    let mut q = q0;
    let mut s = m.s0;
    let mut x = m.x0;
    let mut w = 0.0;
    let mut martingale = 0.0;
    let mut cost = 0.0;
    visit(times[0], q, s, x);
    for win in times.windows(2) {
        let (ta, tb) = (win[0], win[1]);
        let dt = tb - ta;
        let z: f64 = StandardNormal.sample(rng);
        let dw = dt.sqrt() * z;
        let q_next = traj.q_at(tb);
        let s_next = m.s0 - p.cumulative(q0 - q_next) + sigma * (w + dw);
        let c = step_cost(m, traj, ta, tb);
        x += -(q_next - q) * 0.5 * (s + s_next) - c;
        if ta < traj.horizon() {
            martingale += sigma * (q_end - q) * dw;
        }
        cost += c;
        w += dw;
        q = q_next;
        s = s_next;
        visit(tb, q, s, x);
    }
    PathOutcome {
        price_terminal: s,
        cash_terminal: x,
        cost,
        martingale,
        brownian_terminal: w,
    }
}

fn check(m: &ModelParams, g: &GridConfig) -> Result<()> {
    m.validate()?;
    g.validate()
}

/// Simulates one path, keeping every grid point.
pub fn simulate_path(m: &ModelParams, traj: &Trajectory, g: &GridConfig, seed: u64) -> Result<SimulatedPath> {
    check(m, g)?;
    let times = g.times(traj.horizon());
    let cap = times.len();
    let (mut qs, mut ss, mut xs) = (
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
    );
    let outcome = run_path(m, traj, &times, &mut rng::stream(seed), |_, q, s, x| {
        qs.push(q);
        ss.push(s);
        xs.push(x);
    });
    Ok(SimulatedPath {
        times,
        q: qs,
        s: ss,
        x: xs,
        outcome,
        seed,
    })
}

/// Simulates one path and keeps only its terminal observables.
pub fn simulate_outcome(m: &ModelParams, traj: &Trajectory, g: &GridConfig, seed: u64) -> Result<PathOutcome> {
    check(m, g)?;
    let times = g.times(traj.horizon());
    Ok(run_path(m, traj, &times, &mut rng::stream(seed), |_, _, _, _| {}))
}

fn outcomes(
    m: &ModelParams,
    traj: &Trajectory,
    g: &GridConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<Vec<PathOutcome>> {
    check(m, g)?;
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "must be >= 2"));
    }
    let times = g.times(traj.horizon());
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            run_path(
                m,
                traj,
                &times,
                &mut rng::stream(rng::split(base_seed, i)),
                |_, _, _, _| {},
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    /// `X_T - X0`.
    CashChange,
    /// `S_{T'} - S0`.
    PriceShift,
    /// Realized `int h v dt`.
    Cost,
    /// `sigma int (q_T - q_t) dW_t`.
    Martingale,
}

impl Observable {
    pub const ALL: [Observable; 4] = [
        Observable::CashChange,
        Observable::PriceShift,
        Observable::Cost,
        Observable::Martingale,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Observable::CashChange => "cash_change",
            Observable::PriceShift => "price_shift",
            Observable::Cost => "cost",
            Observable::Martingale => "martingale",
        }
    }

    fn extract(&self, m: &ModelParams, o: &PathOutcome) -> f64 {
        match self {
            Observable::CashChange => o.cash_terminal - m.x0,
            Observable::PriceShift => o.price_terminal - m.s0,
            Observable::Cost => o.cost,
            Observable::Martingale => o.martingale,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSummary {
    pub observable: Observable,
    pub mean: f64,
    pub std_dev: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub summaries: Vec<ObservableSummary>,
    /// Sample covariance between requested observables, in request order.
    pub covariance: Vec<Vec<f64>>,
    /// Per-path values, in request order.
    pub samples: Vec<Vec<f64>>,
}

impl EnsembleStats {
    pub fn get(&self, obs: Observable) -> Option<&ObservableSummary> {
        self.summaries.iter().find(|s| s.observable == obs)
    }

    pub fn samples(&self, obs: Observable) -> Option<&[f64]> {
        self.summaries
            .iter()
            .position(|s| s.observable == obs)
            .map(|i| self.samples[i].as_slice())
    }

    /// Writes `observable,mean,stderr,n`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["observable", "mean", "stderr", "n"]).map_err(csv_err)?;
        for s in &self.summaries {
            w.write_record([
                s.observable.name().to_string(),
                s.mean.to_string(),
                s.stderr.to_string(),
                self.n_paths.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `n_paths` independent paths (path `i` seeded by
/// `rng::split(base_seed, i)`) and summarizes the requested observables.
/// Results do not depend on the rayon thread count.
pub fn run_ensemble(
    m: &ModelParams,
    traj: &Trajectory,
    g: &GridConfig,
    n_paths: usize,
    base_seed: u64,
    observables: &[Observable],
) -> Result<EnsembleStats> {
    let outs = outcomes(m, traj, g, n_paths, base_seed)?;
    let samples: Vec<Vec<f64>> = observables
        .iter()
        .map(|obs| outs.iter().map(|o| obs.extract(m, o)).collect())
        .collect();
    let summaries = observables
        .iter()
        .zip(&samples)
        .map(|(&observable, v)| {
            let var = stats::variance(v).max(0.0);
            ObservableSummary {
                observable,
                mean: stats::mean(v),
                std_dev: var.sqrt(),
                stderr: (var / n_paths as f64).sqrt(),
            }
        })
        .collect();
    let covariance = samples
        .iter()
        .map(|a| samples.iter().map(|b| stats::covariance(a, b)).collect())
        .collect();
    Ok(EnsembleStats {
        n_paths,
        summaries,
        covariance,
        samples,
    })
}

/// Empirical versus closed-form covariance of the estimation residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub n_paths: usize,
    pub empirical: Covariance2,
    pub theoretical: Covariance2,
    pub mean_eps1: f64,
    pub mean_eps2: f64,
    /// Per-path `(eps1, eps2)`.
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
}

impl CovarianceReport {
    /// `(name, empirical, theoretical)` for `var1`, `cov`, `var2`.
    pub fn entries(&self) -> [(&'static str, f64, f64); 3] {
        [
            ("var_eps1", self.empirical.var1, self.theoretical.var1),
            ("cov_eps1_eps2", self.empirical.cov, self.theoretical.cov),
            ("var_eps2", self.empirical.var2, self.theoretical.var2),
        ]
    }

    /// Writes `entry,empirical,theoretical,abs_error,rel_error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["entry", "empirical", "theoretical", "abs_error", "rel_error", "n"])
            .map_err(csv_err)?;
        for (name, e, t) in self.entries() {
            let abs = (e - t).abs();
            let rel = if t == 0.0 { f64::NAN } else { abs / t.abs() };
            w.write_record([
                name.to_string(),
                e.to_string(),
                t.to_string(),
                abs.to_string(),
                rel.to_string(),
                self.n_paths.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates a power-law liquidation and compares the empirical covariance
/// of `eps1 = (S_T' - S0) + k sgn(q0)|q0|^alpha` and
/// `eps2 = (S_T' + alpha S0)/(1+alpha) - (X_T - X0)/q0 - (1/q0) int h v dt`
/// with the closed form.
pub fn verify_covariance(
    m: &ModelParams,
    traj: &Trajectory,
    g: &GridConfig,
    n_paths: usize,
    base_seed: u64,
) -> Result<CovarianceReport> {
    if !m.permanent.is_power_law() {
        return Err(Error::invalid("A", "covariance check requires A = 0"));
    }
    let (k, alpha) = (m.permanent.k(), m.permanent.alpha());
    let theoretical = model::error_covariance(traj, alpha, m.sigma, g.delta)?;
    let q0 = traj.q0();
    let outs = outcomes(m, traj, g, n_paths, base_seed)?;
    let permanent = k * q0.abs().powf(alpha).copysign(q0);
    let eps1: Vec<f64> = outs.iter().map(|o| o.price_terminal - m.s0 + permanent).collect();
    let eps2: Vec<f64> = outs
        .iter()
        .map(|o| (o.price_terminal + alpha * m.s0) / (1.0 + alpha) - (o.cash_terminal - m.x0) / q0 - o.cost / q0)
        .collect();
    let empirical = Covariance2 {
        var1: stats::variance(&eps1),
        cov: stats::covariance(&eps1, &eps2),
        var2: stats::variance(&eps2),
    };
    Ok(CovarianceReport {
        n_paths,
        empirical,
        theoretical,
        mean_eps1: stats::mean(&eps1),
        mean_eps2: stats::mean(&eps2),
        eps1,
        eps2,
    })
}
