//! Per-command options. Each field may come from the JSON config file or a
//! flag; flags win, then defaults fill the rest.

use clap::Args;
use serde::{Deserialize, Serialize};

macro_rules! options {
    ($name:ident => $resolved:ident {
        $( $(#[$fm:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?
    }) => {
        #[derive(Args, Deserialize, Serialize, Clone, Debug, Default)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            /// Master seed.
            #[arg(long)]
            pub seed: Option<u64>,
            $( $(#[$fm])* pub $field: Option<$ty>, )*
        }

        #[derive(Serialize, Clone, Debug, PartialEq)]
        pub struct $resolved {
            pub seed: u64,
            $( pub $field: $ty, )*
        }

        impl $name {
            /// `self` (flags) over `file`.
            pub fn over(self, file: $name) -> $name {
                $name {
                    seed: self.seed.or(file.seed),
                    $( $field: self.$field.or(file.$field), )*
                }
            }

            pub fn resolve(self) -> $resolved {
                $resolved {
                    seed: self.seed.unwrap_or(0),
                    $( $field: self.$field.unwrap_or_else(|| $default), )*
                }
            }
        }
    };
}

options!(SimulateArgs => SimulateConfig {
    /// Probability that a branching removes the leftmost particle.
    #[arg(long)] p: f64 = 0.75,
    /// Number of particles.
    #[arg(long)] n: usize = 100,
    #[arg(long)] horizon: f64 = 10.0,
    /// Equally spaced sample times in (0, horizon].
    #[arg(long)] samples: usize = 100,
    /// Independent replicas for the speed estimate (0 skips it).
    #[arg(long)] replicas: usize = 0,
    #[arg(long)] burn_in: f64 = 2.0,
});

options!(BoundsArgs => BoundsConfig {
    #[arg(long)] p: f64 = 0.75,
    #[arg(long)] n: usize = 1000,
    #[arg(long)] delta: f64 = 0.1,
    #[arg(long)] steps: usize = 10,
    /// Points on the tail comparison grid.
    #[arg(long)] points: usize = 200,
});

options!(SchemeArgs => SchemeConfig {
    #[arg(long)] p: f64 = 0.75,
    #[arg(long)] delta: f64 = 0.05,
    #[arg(long)] steps: usize = 20,
    #[arg(long)] dx: f64 = 1e-3,
    /// `wave` or `uniform`; ignored when `init_file` is set.
    #[arg(long)] init: String = "wave".to_string(),
    /// Initial density in the grid density file format.
    #[arg(long)] init_file: String = String::new(),
    /// Run the half-step refinement with this many halvings (0 skips it).
    #[arg(long)] refine_levels: usize = 0,
});

options!(WaveArgs => WaveConfig {
    #[arg(long, value_delimiter = ',')] p_grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect(),
    #[arg(long)] dx: f64 = 1e-3,
});

options!(ExitArgs => ExitConfig {
    #[arg(long)] p: f64 = 0.75,
    #[arg(long)] horizon: f64 = 1.0,
    /// Time step of the path discretisation.
    #[arg(long)] step: f64 = 1e-3,
    #[arg(long)] n_paths: usize = 100_000,
    #[arg(long, action = clap::ArgAction::Set)] bridge_correction: bool = true,
    /// Grid spacing of the initial wave density and of the scheme.
    #[arg(long)] dx: f64 = 1e-3,
    /// Points of the representation curve (0 skips it).
    #[arg(long)] representation_points: usize = 20,
    #[arg(long)] refine_levels: usize = 4,
    /// Decreasing deltas for the small-time flux (empty skips it).
    #[arg(long, value_delimiter = ',')] flux_deltas: Vec<f64> = Vec::new(),
});

options!(SpeedscanArgs => SpeedscanConfig {
    #[arg(long)] p: f64 = 0.75,
    #[arg(long, value_delimiter = ',')] n_grid: Vec<usize> = vec![10, 50, 200],
    #[arg(long)] horizon: f64 = 50.0,
    #[arg(long)] burn_in: f64 = 10.0,
    #[arg(long)] replicas: usize = 20,
});
