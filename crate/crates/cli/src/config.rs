//! Experiment configuration (TOML). Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use permimpact::{
    DatasetDesign, GridConfig, ImpactRegime, InstantaneousImpact, ModelParams, PermanentImpact, PermanentRegime,
    SearchBounds, SearchConfig, Trajectory, VelocityImpact,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbitrage: Option<ArbitrageSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sigma: f64,
    pub s0: f64,
    #[serde(default)]
    pub x0: f64,
    /// Permanent impact scale.
    pub k: f64,
    pub alpha: f64,
    /// Regularizing offset of the permanent impact density.
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "one")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
#[serde(tag = "kind")]
pub enum TrajectorySection {
    /// Constant-rate liquidation of `q0` over `[0, horizon]`.
    Linear { q0: f64, horizon: f64 },
    /// Piecewise-linear inventory through `[t, q]` knots starting at `t = 0`.
    Knots { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_steps: usize,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_paths: usize,
    pub seed: u64,
    /// Number of full paths written as CSV (the first paths of the ensemble).
    #[serde(default)]
    pub dump_paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    AlmgrenChriss,
    CumulativeVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArbitrageSection {
    pub regime: RegimeKind,
    /// Scale of the permanent impact.
    pub k: f64,
    /// `gamma` of `k sgn(v)|v|^gamma`, or `alpha` of the cumulative-volume
    /// density.
    pub exponent: f64,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "one")]
    pub beta: f64,
    pub n_blocks: usize,
    /// Bounds on `|rate|`.
    pub rate_min: f64,
    pub rate_max: f64,
    pub duration_min: f64,
    pub duration_max: f64,
    pub max_evals: usize,
    pub n_starts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub n_orders: usize,
    pub q0_min: f64,
    pub q0_max: f64,
    pub horizon_min: f64,
    pub horizon_max: f64,
    #[serde(default)]
    pub delta_min: f64,
    #[serde(default)]
    pub delta_max: f64,
    pub n_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    /// Metaorder CSV, relative to the config file's directory.
    pub input: PathBuf,
    /// Use this permanent exponent in the second stage instead of the fitted one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_alpha: Option<f64>,
}

fn config_err(e: permimpact::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing table [{name}]")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Replaces every seed in the file.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(e) = self.ensemble.as_mut() {
            e.seed = seed;
        }
        if let Some(a) = self.arbitrage.as_mut() {
            a.seed = seed;
        }
        if let Some(d) = self.dataset.as_mut() {
            d.seed = seed;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<ModelParams, CliError> {
        let m = require(&self.model, "model")?;
        let permanent = PermanentImpact::new(m.k, m.alpha, m.offset).map_err(config_err)?;
        let instantaneous = InstantaneousImpact::new(m.eta, m.beta).map_err(config_err)?;
        ModelParams::new(m.sigma, m.s0, m.x0, permanent, instantaneous).map_err(config_err)
    }

    pub fn trajectory(&self) -> Result<Trajectory, CliError> {
        match require(&self.trajectory, "trajectory")? {
            TrajectorySection::Linear { q0, horizon } => Trajectory::linear(*q0, *horizon),
            TrajectorySection::Knots { knots } => Trajectory::from_knots(knots.iter().map(|k| (k[0], k[1])).collect()),
        }
        .map_err(config_err)
    }

    pub fn grid(&self) -> Result<GridConfig, CliError> {
        let g = require(&self.grid, "grid")?;
        GridConfig::new(g.n_steps, g.delta).map_err(config_err)
    }

    pub fn ensemble(&self) -> Result<EnsembleSection, CliError> {
        let e = *require(&self.ensemble, "ensemble")?;
        if e.n_paths < 2 {
            return Err(CliError::Config("ensemble.n_paths must be >= 2".into()));
        }
        if e.dump_paths > e.n_paths {
            return Err(CliError::Config(
                "ensemble.dump_paths must not exceed ensemble.n_paths".into(),
            ));
        }
        Ok(e)
    }

    pub fn arbitrage(&self) -> Result<(ImpactRegime, SearchConfig), CliError> {
        let a = require(&self.arbitrage, "arbitrage")?;
        let permanent = match a.regime {
            RegimeKind::AlmgrenChriss => {
                if a.offset != 0.0 {
                    return Err(CliError::Config(
                        "arbitrage.offset applies to the cumulative-volume regime only".into(),
                    ));
                }
                PermanentRegime::AlmgrenChriss(VelocityImpact::new(a.k, a.exponent).map_err(config_err)?)
            }
            RegimeKind::CumulativeVolume => {
                PermanentRegime::CumulativeVolume(PermanentImpact::new(a.k, a.exponent, a.offset).map_err(config_err)?)
            }
        };
        let instantaneous = InstantaneousImpact::new(a.eta, a.beta).map_err(config_err)?;
        let search = SearchConfig {
            n_blocks: a.n_blocks,
            bounds: SearchBounds {
                rate: (a.rate_min, a.rate_max),
                duration: (a.duration_min, a.duration_max),
            },
            max_evals: a.max_evals,
            n_starts: a.n_starts,
            seed: a.seed,
        };
        Ok((
            ImpactRegime {
                permanent,
                instantaneous,
            },
            search,
        ))
    }

    pub fn dataset(&self) -> Result<(DatasetDesign, u64), CliError> {
        let d = require(&self.dataset, "dataset")?;
        Ok((
            DatasetDesign {
                n_orders: d.n_orders,
                q0_range: (d.q0_min, d.q0_max),
                horizon_range: (d.horizon_min, d.horizon_max),
                delta_range: (d.delta_min, d.delta_max),
                n_steps: d.n_steps,
            },
            d.seed,
        ))
    }

    pub fn estimate(&self) -> Result<&EstimateSection, CliError> {
        let e = require(&self.estimate, "estimate")?;
        if let Some(a) = e.force_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(CliError::Config(format!(
                    "estimate.force_alpha must lie in (0, 1], got {a}"
                )));
            }
        }
        Ok(e)
    }
}
