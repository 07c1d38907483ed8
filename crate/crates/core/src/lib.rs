//! Branching Brownian motion with two-sided selection.
//!
//! * [`particle`]: exact `(N,p)`-BBM dynamics, monotone coupling, speeds.
//! * [`discrete`]: the time-discretised upper and lower bounding systems.
//! * [`density`]: Gaussian propagation and mass cuts on a grid, and the
//!   deterministic sandwich scheme built from them.
//! * [`wave`]: the closed-form travelling wave of the free boundary problem
//!   and the particle-versus-scheme comparison report.
//! * [`killed`]: Brownian motion killed at two moving barriers.
//! * [`cli`]: the command-line front end.

pub mod barrier;
pub mod cli;
pub mod density;
pub mod discrete;
pub mod error;
pub mod export;
pub mod killed;
pub mod particle;
pub mod rng;
pub mod stats;
pub mod wave;

pub use error::{Error, Result};
pub use particle::ParticleConfig;
pub use rng::RandomSource;
