//! Round-trip expected PnL and the search for dynamic arbitrage.
//!
//! A round trip starts and ends with the same inventory (taken as 0, which
//! loses no generality), so its expected PnL is `E[X_T] - X0`. With the
//! martingale term gone this is a deterministic functional of the trading
//! rates, evaluated block by block in closed form.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::impact::{InstantaneousImpact, PermanentImpact, VelocityImpact};
use crate::optim::NelderMead;
use crate::trajectory::Trajectory;
use crate::{model, rng};

const CLOSURE_TOLERANCE: f64 = 1e-12;

/// Trade at constant `rate` (shares per unit time, positive sells) for
/// `duration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub duration: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripStrategy {
    blocks: Vec<Block>,
}

impl RoundTripStrategy {
    /// Blocks must net to zero shares, `sum rate_i duration_i = 0`.
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("blocks", "need at least one block"));
        }
        for b in &blocks {
            if !(b.duration > 0.0 && b.duration.is_finite()) {
                return Err(Error::invalid("duration", format!("must be > 0, got {}", b.duration)));
            }
            if !b.rate.is_finite() {
                return Err(Error::invalid("rate", "must be finite"));
            }
        }
        let net: f64 = blocks.iter().map(|b| b.rate * b.duration).sum();
        let gross: f64 = blocks.iter().map(|b| (b.rate * b.duration).abs()).sum();
        if net.abs() > CLOSURE_TOLERANCE * gross.max(1.0) {
            return Err(Error::invalid(
                "blocks",
                format!("strategy does not return to its initial inventory (net {net})"),
            ));
        }
        Ok(Self { blocks })
    }

    /// Builds a closed strategy from the first `n - 1` rates and all `n`
    /// durations; the last rate is whatever closes the round trip.
    pub fn closing_last(rates: &[f64], durations: &[f64]) -> Result<Self> {
        if durations.len() != rates.len() + 1 {
            return Err(Error::invalid("blocks", "need one more duration than free rates"));
        }
        let n = durations.len();
        let net: f64 = rates.iter().zip(durations).map(|(r, d)| r * d).sum();
        let mut blocks: Vec<Block> = rates
            .iter()
            .zip(durations)
            .map(|(&rate, &duration)| Block { duration, rate })
            .collect();
        blocks.push(Block {
            duration: durations[n - 1],
            rate: -net / durations[n - 1],
        });
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn horizon(&self) -> f64 {
        self.blocks.iter().map(|b| b.duration).sum()
    }

    /// Inventory path starting from `q0`; the last knot is pinned to `q0`.
    pub fn to_trajectory(&self, q0: f64) -> Result<Trajectory> {
        let mut knots = Vec::with_capacity(self.blocks.len() + 1);
        let (mut t, mut q) = (0.0, q0);
        knots.push((t, q));
        for b in &self.blocks {
            t += b.duration;
            q -= b.rate * b.duration;
            knots.push((t, q));
        }
        knots.last_mut().unwrap().1 = q0;
        Trajectory::from_knots(knots)
    }

    pub fn cost(&self, h: &InstantaneousImpact) -> f64 {
        self.blocks.iter().map(|b| h.cost_rate(b.rate) * b.duration).sum()
    }

    /// `(q_start, q_end)` of every block, starting from zero inventory.
    fn inventories(&self) -> impl Iterator<Item = (Block, f64, f64)> + '_ {
        let mut q = 0.0;
        self.blocks.iter().map(move |&b| {
            let qa = q;
            q -= b.rate * b.duration;
            (b, qa, q)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PermanentRegime {
    /// Rate-dependent drift `-k(v_t) dt`.
    AlmgrenChriss(VelocityImpact),
    /// Cumulative-volume drift `-f(|q0 - q_t|) v_t dt`.
    CumulativeVolume(PermanentImpact),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactRegime {
    pub permanent: PermanentRegime,
    pub instantaneous: InstantaneousImpact,
}

impl ImpactRegime {
    pub fn name(&self) -> &'static str {
        match self.permanent {
            PermanentRegime::AlmgrenChriss(_) => "almgren-chriss",
            PermanentRegime::CumulativeVolume(_) => "cumulative-volume",
        }
    }
}

/// `E[X_T] - X0` of a round trip.
pub fn expected_round_trip_pnl(regime: &ImpactRegime, s: &RoundTripStrategy) -> Result<f64> {
    let permanent = match regime.permanent {
        // int (q_T - q_t) k(v) dt with q_T = 0 and q linear on the block
        PermanentRegime::AlmgrenChriss(kv) => s
            .inventories()
            .map(|(b, qa, qb)| -kv.impact(b.rate) * b.duration * 0.5 * (qa + qb))
            .sum(),
        PermanentRegime::CumulativeVolume(p) => model::permanent_cash_term(&p, &s.to_trajectory(0.0)?)?,
    };
    Ok(permanent - s.cost(&regime.instantaneous))
}

/// Box for the search. Rate bounds apply to `|rate|` of every block,
/// including the one that closes the round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub rate: (f64, f64),
    pub duration: (f64, f64),
}

impl SearchBounds {
    fn validate(&self) -> Result<()> {
        let (rlo, rhi) = self.rate;
        let (dlo, dhi) = self.duration;
        if !(rlo >= 0.0 && rhi > 0.0 && rlo <= rhi && rhi.is_finite()) {
            return Err(Error::InfeasibleBounds(format!(
                "rate magnitude bounds [{rlo}, {rhi}] must satisfy 0 <= min <= max < inf"
            )));
        }
        if !(dlo > 0.0 && dlo <= dhi && dhi.is_finite()) {
            return Err(Error::InfeasibleBounds(format!(
                "duration bounds [{dlo}, {dhi}] must satisfy 0 < min <= max < inf"
            )));
        }
        Ok(())
    }

    fn clamp_rate(&self, r: f64) -> f64 {
        let (lo, hi) = self.rate;
        let r = r.clamp(-hi, hi);
        if r.abs() < lo {
            lo.copysign(r)
        } else {
            r
        }
    }

    /// Amount by which the closing rate leaves its band (0 when feasible).
    fn violation(&self, strategy: &RoundTripStrategy) -> f64 {
        let (lo, hi) = self.rate;
        let r = strategy.blocks().last().unwrap().rate.abs();
        (lo - r).max(0.0) + (r - hi).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub n_blocks: usize,
    pub bounds: SearchBounds,
    /// Total objective evaluations shared evenly by the starts.
    pub max_evals: usize,
    pub n_starts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartResult {
    pub start_id: usize,
    /// Best feasible PnL seen from this start (`-inf` if none).
    pub pnl: f64,
    pub strategy: Option<RoundTripStrategy>,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub regime: &'static str,
    pub best: RoundTripStrategy,
    pub best_pnl: f64,
    pub best_start: usize,
    pub starts: Vec<StartResult>,
    pub evals: usize,
}

impl SearchResult {
    /// Writes `start_id,pnl,evals,duration_1,rate_1,...` with one row per start.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.best.blocks().len();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .flexible(true)
            .from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec!["start_id".to_string(), "pnl".into(), "evals".into()];
        for i in 1..=n {
            header.push(format!("duration_{i}"));
            header.push(format!("rate_{i}"));
        }
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.starts {
            let mut row = vec![s.start_id.to_string(), s.pnl.to_string(), s.evals.to_string()];
            if let Some(st) = &s.strategy {
                for b in st.blocks() {
                    row.push(b.duration.to_string());
                    row.push(b.rate.to_string());
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let blocks: Vec<String> = self
            .best
            .blocks()
            .iter()
            .map(|b| format!("(duration={}, rate={})", b.duration, b.rate))
            .collect();
        format!(
            "regime={} best_pnl={} start_id={} evals={} blocks=[{}]",
            self.regime,
            self.best_pnl,
            self.best_start,
            self.evals,
            blocks.join(", ")
        )
    }
}

fn decode(x: &[f64], n: usize, bounds: &SearchBounds) -> Result<RoundTripStrategy> {
    let rates: Vec<f64> = x[..n - 1].iter().map(|&r| bounds.clamp_rate(r)).collect();
    let durations: Vec<f64> = x[n - 1..]
        .iter()
        .map(|&d| d.clamp(bounds.duration.0, bounds.duration.1))
        .collect();
    RoundTripStrategy::closing_last(&rates, &durations)
}

/// A start with every block in bounds when one can be found by rejection.
fn initial_point<R: Rng>(n: usize, bounds: &SearchBounds, rng: &mut R) -> Vec<f64> {
    let (rlo, rhi) = bounds.rate;
    let (dlo, dhi) = bounds.duration;
    let sample = |rng: &mut R| {
        let rates: Vec<f64> = (0..n - 1)
            .map(|_| {
                let mag = rng.random_range(rlo..=rhi);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let mut durations: Vec<f64> = (0..n).map(|_| rng.random_range(dlo..=dhi)).collect();
        let net: f64 = rates.iter().zip(&durations).map(|(r, d)| r * d).sum();
        let closing = rng.random_range(rlo..=rhi);
        if closing > 0.0 {
            durations[n - 1] = net.abs() / closing;
        }
        let ok = durations[n - 1] >= dlo && durations[n - 1] <= dhi;
        (rates, durations, ok)
    };
    let mut last = sample(rng);
    for _ in 0..1000 {
        if last.2 {
            break;
        }
        last = sample(rng);
    }
    let (rates, mut durations, _) = last;
    for d in durations.iter_mut() {
        *d = d.clamp(dlo, dhi);
    }
    rates.into_iter().chain(durations).collect()
}

/// Maximizes expected round-trip PnL over closed piecewise-constant
/// strategies by multi-start Nelder-Mead.
///
/// Parameters are the first `n - 1` signed rates and all `n` durations;
/// the closing rate comes from the inventory constraint, and points where
/// it leaves the rate band are walled off. Start `j` is drawn from the
/// stream `rng::split(seed, j)`, so results are reproducible and do not
/// depend on the thread count.
pub fn search_arbitrage(regime: &ImpactRegime, cfg: &SearchConfig) -> Result<SearchResult> {
    if cfg.n_blocks < 2 {
        return Err(Error::invalid("n_blocks", "must be >= 2"));
    }
    if cfg.n_starts == 0 {
        return Err(Error::invalid("n_starts", "must be >= 1"));
    }
    let bounds = cfg.bounds;
    bounds.validate()?;
    let n = cfg.n_blocks;
    let dim = 2 * n - 1;
    let per_start = cfg.max_evals / cfg.n_starts;
    if per_start < dim + 1 {
        return Err(Error::invalid(
            "max_evals",
            format!(
                "budget {} leaves fewer than {} evaluations per start",
                cfg.max_evals,
                dim + 1
            ),
        ));
    }
    let mut step = vec![0.1 * (bounds.rate.1 - bounds.rate.0).max(bounds.rate.1 * 0.1); n - 1];
    step.extend(std::iter::repeat_n(
        0.1 * (bounds.duration.1 - bounds.duration.0).max(bounds.duration.1 * 0.1),
        n,
    ));
    let nm = NelderMead {
        max_evals: per_start,
        step,
        ftol: 1e-13,
    };

    let starts: Vec<StartResult> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng::stream(rng::split(cfg.seed, j as u64));
            let x0 = initial_point(n, &bounds, &mut rng);
            let mut best: Option<(f64, RoundTripStrategy)> = None;
            let m = nm.minimize(
                |x| {
                    let Ok(s) = decode(x, n, &bounds) else {
                        return f64::INFINITY;
                    };
                    let viol = bounds.violation(&s);
                    if viol > 0.0 {
                        return 1e12 + viol;
                    }
                    match expected_round_trip_pnl(regime, &s) {
                        Ok(pnl) => {
                            if best.as_ref().is_none_or(|(b, _)| pnl > *b) {
                                best = Some((pnl, s));
                            }
                            -pnl
                        }
                        Err(_) => f64::INFINITY,
                    }
                },
                &x0,
            );
            let (pnl, strategy) = match best {
                Some((p, s)) => (p, Some(s)),
                None => (f64::NEG_INFINITY, None),
            };
            StartResult {
                start_id: j,
                pnl,
                strategy,
                evals: m.evals,
            }
        })
        .collect();

    let evals = starts.iter().map(|s| s.evals).sum();
    let best = starts
        .iter()
        .filter(|s| s.strategy.is_some())
        .max_by(|a, b| a.pnl.total_cmp(&b.pnl).then(b.start_id.cmp(&a.start_id)))
        .ok_or_else(|| Error::InfeasibleBounds("no start reached a strategy inside the bounds".into()))?;
    Ok(SearchResult {
        regime: regime.name(),
        best: best.strategy.clone().unwrap(),
        best_pnl: best.pnl,
        best_start: best.start_id,
        evals,
        starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;
    use proptest::prelude::*;

    fn ac(kv: f64, gamma: f64) -> ImpactRegime {
        ImpactRegime {
            permanent: PermanentRegime::AlmgrenChriss(VelocityImpact::new(kv, gamma).unwrap()),
            instantaneous: InstantaneousImpact::zero(),
        }
    }

    fn two_block(buy: f64, t_buy: f64, sell: f64) -> RoundTripStrategy {
        RoundTripStrategy::new(vec![
            Block {
                duration: t_buy,
                rate: -buy,
            },
            Block {
                duration: buy * t_buy / sell,
                rate: sell,
            },
        ])
        .unwrap()
    }

    /// Oracle for the rate-dependent regime: quadrature of `(q_T - q_t) k(v_t)`.
    fn ac_oracle(kv: &VelocityImpact, s: &RoundTripStrategy) -> f64 {
        let tr = s.to_trajectory(0.0).unwrap();
        tr.segments()
            .map(|seg| {
                let k = kv.impact(seg.rate());
                adaptive_simpson(|t| -seg.q_at(t) * k, seg.t_start, seg.t_end, 1e-13).value
            })
            .sum()
    }

    /// Closed form of buying `Q` at rate `a` then selling at rate `b`
    /// under `k(v) = sgn(v)|v|^gamma`: `Q^2 (a^(gamma-1) - b^(gamma-1)) / 2`.
    fn two_block_value(q: f64, a: f64, b: f64, gamma: f64) -> f64 {
        q * q * (a.powf(gamma - 1.0) - b.powf(gamma - 1.0)) / 2.0
    }

    #[test]
    fn concave_two_block_example() {
        let s = two_block(1.0, 1.0, 4.0);
        let pnl = expected_round_trip_pnl(&ac(1.0, 0.5), &s).unwrap();
        assert!((pnl - 0.25).abs() < 1e-14, "{pnl}");
        assert!((two_block_value(1.0, 1.0, 4.0, 0.5) - 0.25).abs() < 1e-15);
        assert!((ac_oracle(&VelocityImpact::new(1.0, 0.5).unwrap(), &s) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn linear_two_block_is_flat() {
        let pnl = expected_round_trip_pnl(&ac(1.0, 1.0), &two_block(1.0, 1.0, 4.0)).unwrap();
        assert!(pnl.abs() < 1e-15);
    }

    #[test]
    fn cumulative_regime_without_cost_is_flat() {
        let r = ImpactRegime {
            permanent: PermanentRegime::CumulativeVolume(PermanentImpact::power_law(1.0, 0.5).unwrap()),
            instantaneous: InstantaneousImpact::zero(),
        };
        let pnl = expected_round_trip_pnl(&r, &two_block(1.0, 1.0, 4.0)).unwrap();
        assert!(pnl.abs() < 1e-14);
    }

    #[test]
    fn closure_is_enforced() {
        assert!(RoundTripStrategy::new(vec![Block {
            duration: 1.0,
            rate: 1.0
        }])
        .is_err());
        assert!(RoundTripStrategy::new(vec![]).is_err());
        assert!(RoundTripStrategy::new(vec![Block {
            duration: 0.0,
            rate: 0.0
        }])
        .is_err());
        let s = RoundTripStrategy::closing_last(&[2.0, -1.0], &[0.5, 1.5, 0.25]).unwrap();
        assert_eq!(s.blocks()[2].rate, 2.0);
        assert!(s.to_trajectory(3.0).unwrap().is_round_trip());
    }

    #[test]
    fn search_rejects_bad_config() {
        let cfg = SearchConfig {
            n_blocks: 2,
            bounds: SearchBounds {
                rate: (2.0, 1.0),
                duration: (0.05, 2.0),
            },
            max_evals: 100,
            n_starts: 2,
            seed: 0,
        };
        assert!(matches!(
            search_arbitrage(&ac(1.0, 0.5), &cfg),
            Err(Error::InfeasibleBounds(_))
        ));
        let cfg = SearchConfig {
            bounds: SearchBounds {
                rate: (0.1, 10.0),
                duration: (0.0, 2.0),
            },
            ..cfg
        };
        assert!(matches!(
            search_arbitrage(&ac(1.0, 0.5), &cfg),
            Err(Error::InfeasibleBounds(_))
        ));
        let cfg = SearchConfig { n_blocks: 1, ..cfg };
        assert!(search_arbitrage(&ac(1.0, 0.5), &cfg).is_err());
    }

    #[test]
    fn search_is_reproducible() {
        let cfg = SearchConfig {
            n_blocks: 3,
            bounds: SearchBounds {
                rate: (0.1, 10.0),
                duration: (0.05, 2.0),
            },
            max_evals: 600,
            n_starts: 6,
            seed: 42,
        };
        let a = search_arbitrage(&ac(1.0, 0.5), &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| search_arbitrage(&ac(1.0, 0.5), &cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.evals <= 600);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("start_id,pnl,evals,duration_1,rate_1,duration_2,rate_2,duration_3,rate_3\n"));
        assert_eq!(text.lines().count(), 7);
    }

    fn strategies() -> impl Strategy<Value = RoundTripStrategy> {
        (
            proptest::collection::vec((-5.0f64..5.0, 0.05f64..2.0), 1..6),
            0.05f64..2.0,
        )
            .prop_map(|(free, last)| {
                let rates: Vec<f64> = free.iter().map(|p| p.0).collect();
                let mut durations: Vec<f64> = free.iter().map(|p| p.1).collect();
                durations.push(last);
                RoundTripStrategy::closing_last(&rates, &durations).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn linear_velocity_impact_never_profits(s in strategies(), kappa in 0.01f64..5.0, eta in 0.0f64..0.5) {
            let r = ImpactRegime {
                permanent: PermanentRegime::AlmgrenChriss(VelocityImpact::linear(kappa).unwrap()),
                instantaneous: InstantaneousImpact::new(eta, 0.6).unwrap(),
            };
            let pnl = expected_round_trip_pnl(&r, &s).unwrap();
            let cost = s.cost(&r.instantaneous);
            // kappa/2 (q0 - q_T)^2 telescopes to zero on a round trip
            let scale: f64 = s.blocks().iter().map(|b| (b.rate * b.duration).abs()).sum::<f64>().powi(2) * kappa;
            prop_assert!((pnl + cost).abs() <= 1e-12 * (1.0 + scale), "pnl={} cost={}", pnl, cost);
            prop_assert!(pnl <= 1e-12 * (1.0 + scale));
        }
    }

    proptest! {
        #[test]
        fn cumulative_pnl_ignores_permanent_parameters(
            s in strategies(),
            k1 in 0.1f64..3.0, a1 in 0.1f64..=1.0, off1 in prop_oneof![Just(0.0), 0.01f64..2.0],
            k2 in 0.1f64..3.0, a2 in 0.1f64..=1.0, off2 in prop_oneof![Just(0.0), 0.01f64..2.0],
        ) {
            let h = InstantaneousImpact::new(0.1, 0.7).unwrap();
            let mk = |k, a, off| ImpactRegime {
                permanent: PermanentRegime::CumulativeVolume(PermanentImpact::new(k, a, off).unwrap()),
                instantaneous: h,
            };
            let p1 = expected_round_trip_pnl(&mk(k1, a1, off1), &s).unwrap();
            let p2 = expected_round_trip_pnl(&mk(k2, a2, off2), &s).unwrap();
            let cost = s.cost(&h);
            prop_assert!((p1 + cost).abs() < 1e-10);
            prop_assert!((p1 - p2).abs() < 1e-10);
        }

        #[test]
        fn sign_reversal_and_time_shift_symmetry(s in strategies(), gamma in 0.2f64..2.0) {
            let r = ImpactRegime {
                permanent: PermanentRegime::AlmgrenChriss(VelocityImpact::new(1.0, gamma).unwrap()),
                instantaneous: InstantaneousImpact::new(0.05, 0.5).unwrap(),
            };
            let flipped = RoundTripStrategy::new(
                s.blocks().iter().map(|b| Block { duration: b.duration, rate: -b.rate }).collect(),
            ).unwrap();
            let p = expected_round_trip_pnl(&r, &s).unwrap();
            let q = expected_round_trip_pnl(&r, &flipped).unwrap();
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            // the functional has no clock: an idle lead-in block changes nothing
            let mut shifted = vec![Block { duration: 0.7, rate: 0.0 }];
            shifted.extend_from_slice(s.blocks());
            let shifted = RoundTripStrategy::new(shifted).unwrap();
            let z = expected_round_trip_pnl(&r, &shifted).unwrap();
            prop_assert!((p - z).abs() <= 1e-10 * (1.0 + p.abs()));
        }

        #[test]
        fn velocity_regime_matches_quadrature(s in strategies(), gamma in 0.2f64..2.0) {
            let kv = VelocityImpact::new(1.3, gamma).unwrap();
            let r = ImpactRegime { permanent: PermanentRegime::AlmgrenChriss(kv), instantaneous: InstantaneousImpact::zero() };
            let p = expected_round_trip_pnl(&r, &s).unwrap();
            let o = ac_oracle(&kv, &s);
            prop_assert!((p - o).abs() <= 1e-9 * (1.0 + o.abs()));
        }
    }
}
