//! Benchmark fixtures shared by the criterion suites.

use permimpact::{DatasetDesign, GridConfig, InstantaneousImpact, ModelParams, PermanentImpact, Trajectory};

pub fn model(sigma: f64) -> ModelParams {
    ModelParams::new(
        sigma,
        100.0,
        0.0,
        PermanentImpact::power_law(1.0, 0.5).unwrap(),
        InstantaneousImpact::new(0.1, 0.7).unwrap(),
    )
    .unwrap()
}

pub fn liquidation() -> (Trajectory, GridConfig) {
    (
        Trajectory::linear(4.0, 1.0).unwrap(),
        GridConfig::new(1000, 0.1).unwrap(),
    )
}

pub fn design(n_orders: usize) -> DatasetDesign {
    DatasetDesign {
        n_orders,
        q0_range: (0.5, 8.0),
        horizon_range: (0.5, 2.0),
        delta_range: (0.1, 0.1),
        n_steps: 100,
    }
}
