//! Deterministic inventory paths `q: [0, T] -> R`.
//!
//! Paths are piecewise linear in time, so the trading rate `v = -q'` is
//! piecewise constant. A positive rate sells shares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for the round-trip and liquidation flags, relative to the
/// largest inventory on the path.
const CLOSURE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Constant-participation liquidation `q_t = q0 (1 - t/T)`.
    Linear,
    /// User-supplied knots.
    Knots,
}

impl Schedule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Schedule::Linear => "linear",
            Schedule::Knots => "knots",
        }
    }
}

/// One linear piece of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub q_start: f64,
    pub q_end: f64,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Trading rate `v = -dq/dt` on the segment.
    pub fn rate(&self) -> f64 {
        -(self.q_end - self.q_start) / self.duration()
    }

    /// Inventory at time `t`, clamped to the segment.
    pub fn q_at(&self, t: f64) -> f64 {
        if t <= self.t_start {
            return self.q_start;
        }
        if t >= self.t_end {
            return self.q_end;
        }
        let w = (t - self.t_start) / self.duration();
        self.q_start + w * (self.q_end - self.q_start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    knots: Vec<(f64, f64)>,
    schedule: Schedule,
}

impl Trajectory {
    /// The linear liquidation schedule `q_t = q0 (1 - t/T)`.
    pub fn linear(q0: f64, horizon: f64) -> Result<Self> {
        if !q0.is_finite() {
            return Err(Error::invalid("q0", "must be finite"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("T", format!("must be > 0, got {horizon}")));
        }
        Ok(Self {
            knots: vec![(0.0, q0), (horizon, 0.0)],
            schedule: Schedule::Linear,
        })
    }

    /// Piecewise-linear path through `(t, q)` knots. The first knot must sit
    /// at `t = 0` and times must be strictly increasing.
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("knots", "need at least two knots"));
        }
        if knots[0].0 != 0.0 {
            return Err(Error::invalid("knots", "first knot must be at t = 0"));
        }
        for &(t, q) in &knots {
            if !t.is_finite() || !q.is_finite() {
                return Err(Error::invalid("knots", "knots must be finite"));
            }
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::invalid(
                    "knots",
                    format!("times must be strictly increasing ({} then {})", w[0].0, w[1].0),
                ));
            }
        }
        Ok(Self {
            knots,
            schedule: Schedule::Knots,
        })
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn horizon(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    pub fn q0(&self) -> f64 {
        self.knots[0].1
    }

    pub fn q_end(&self) -> f64 {
        self.knots[self.knots.len() - 1].1
    }

    fn scale(&self) -> f64 {
        self.knots.iter().map(|&(_, q)| q.abs()).fold(1.0, f64::max)
    }

    pub fn is_round_trip(&self) -> bool {
        (self.q0() - self.q_end()).abs() <= CLOSURE_TOLERANCE * self.scale()
    }

    pub fn is_liquidation(&self) -> bool {
        self.q_end().abs() <= CLOSURE_TOLERANCE * self.scale()
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.knots.windows(2).map(|w| Segment {
            t_start: w[0].0,
            t_end: w[1].0,
            q_start: w[0].1,
            q_end: w[1].1,
        })
    }

    /// Inventory at `t`; constant `q(T)` after the horizon.
    pub fn q_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.q0();
        }
        if t >= self.horizon() {
            return self.q_end();
        }
        let i = self.knots.partition_point(|&(tk, _)| tk <= t);
        let (t0, q0) = self.knots[i - 1];
        let (t1, q1) = self.knots[i];
        Segment {
            t_start: t0,
            t_end: t1,
            q_start: q0,
            q_end: q1,
        }
        .q_at(t)
    }

    /// Trading rate on the segment containing `t` (right-continuous); zero
    /// outside `[0, T)`.
    pub fn rate_at(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.horizon() {
            return 0.0;
        }
        let i = self.knots.partition_point(|&(tk, _)| tk <= t);
        let (t0, q0) = self.knots[i - 1];
        let (t1, q1) = self.knots[i];
        -(q1 - q0) / (t1 - t0)
    }

    /// Knot times strictly inside `(a, b)`.
    pub(crate) fn interior_knot_times(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        self.knots.iter().map(|&(t, _)| t).filter(move |&t| t > a && t < b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_schedule_shape() {
        let tr = Trajectory::linear(4.0, 2.0).unwrap();
        assert_eq!(tr.q_at(1.0), 2.0);
        assert_eq!(tr.rate_at(0.5), 2.0);
        assert!(tr.is_liquidation());
        assert!(!tr.is_round_trip());
        assert_eq!(tr.rate_at(2.0), 0.0);
    }

    #[test]
    fn knots_validation() {
        assert!(Trajectory::from_knots(vec![(0.0, 1.0)]).is_err());
        assert!(Trajectory::from_knots(vec![(0.1, 1.0), (1.0, 0.0)]).is_err());
        assert!(Trajectory::from_knots(vec![(0.0, 1.0), (1.0, 0.0), (1.0, 2.0)]).is_err());
        assert!(Trajectory::from_knots(vec![(0.0, 1.0), (f64::NAN, 0.0)]).is_err());
        assert!(Trajectory::linear(1.0, 0.0).is_err());
    }

    #[test]
    fn piecewise_evaluation() {
        let tr = Trajectory::from_knots(vec![(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)]).unwrap();
        assert!(tr.is_round_trip());
        assert_eq!(tr.q_at(0.5), 1.0);
        assert_eq!(tr.q_at(2.0), 1.0);
        assert_eq!(tr.rate_at(0.5), -2.0);
        assert_eq!(tr.rate_at(1.0), 1.0);
        assert_eq!(tr.q_at(10.0), 0.0);
        let segs: Vec<_> = tr.segments().collect();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].rate(), 1.0);
    }
}
