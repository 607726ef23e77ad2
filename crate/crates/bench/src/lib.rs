//! Inputs shared by the kernel benchmarks.

use mfgset::control::PureStateControl;
use mfgset::diffusion::{ContControl, DiffusionSpec, InitialLaw};
use mfgset::models::congestion_spec;
use mfgset::{GameSpec, SimplexMeasure};

pub struct GameCase {
    pub spec: GameSpec,
    pub mu: SimplexMeasure,
    pub alpha: PureStateControl,
}

/// Congestion game at the uniform measure with a fixed grid control.
pub fn congestion_case() -> GameCase {
    let spec = congestion_spec().expect("builtin game");
    let alpha = PureStateControl::from_grid_indices(&spec, &[1, 3, 4, 0]).expect("valid indices");
    GameCase {
        spec,
        mu: SimplexMeasure::uniform(2),
        alpha,
    }
}

pub struct DiffusionCase {
    pub spec: DiffusionSpec,
    pub mu: Vec<f64>,
    pub control: ContControl,
}

/// Crowd-averse diffusion with a measure-dependent feedback.
pub fn crowd_case() -> DiffusionCase {
    let spec = mfgset::diffusion::builtin("crowd").expect("builtin diffusion");
    let mu = InitialLaw::Gaussian { mean: 0.0, sd: 1.0 }
        .masses(spec.grid())
        .expect("law on grid");
    let control = ContControl::formula("-0.5 * tanh(x - m0)").expect("formula parses");
    DiffusionCase { spec, mu, control }
}
