//! Single and rod-coupled stick-balancing models with delayed feedback of
//! random gain, together with the stability and statistics tooling used to
//! study them and the trial files of the tracking experiment.

pub mod analysis;
pub mod sdde;
pub mod series;
pub mod stability;
pub mod trial;

pub use sdde::{ModelKind, ModelParams, SddeError};
pub use series::TimeSeries;
