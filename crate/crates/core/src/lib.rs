//! Lagrangian flow matching.
//!
//! Flow matching regresses a velocity field onto the velocities of a
//! prescribed family of paths. Here those paths are least-action
//! trajectories of a Lagrangian `½‖v‖² − ½xᵀAx` between endpoint pairs that
//! are themselves coupled by mini-batch optimal transport under the same
//! Lagrangian's action cost. With `A = 0` this is OT conditional flow
//! matching; `A = ω²I` bends the straight lines into harmonic arcs; a general
//! SPD `A` gives direction-dependent curvature.
//!
//! ```
//! use lagflow::lagrangian::{trajectory, Endpoints, LagrangianSpec};
//!
//! let spec = LagrangianSpec::harmonic(std::f64::consts::FRAC_PI_2)?;
//! let ep = Endpoints::new(&[1.0, 0.0], &[0.0, 1.0])?;
//! let mid = trajectory(&spec, ep, 0.5)?;
//! // a quarter-period arc on the unit circle
//! assert!((mid[0] - mid[1]).abs() < 1e-15);
//! assert!((mid[0].hypot(mid[1]) - 1.0).abs() < 1e-15);
//! # Ok::<(), lagflow::Error>(())
//! ```

pub mod batch;
pub mod coupling;
pub mod error;
pub mod lagrangian;
mod lap;
pub mod linalg;
pub mod metrics;
pub mod neuralnet;
pub mod odesolve;
pub mod synthdata;
pub mod trainer;

pub use batch::PointBatch;
pub use coupling::{couple, cost_matrix, solve_assignment, CostMatrix, CouplingPlan};
pub use error::{Error, Result};
pub use lagrangian::{Endpoints, LagrangianSpec, SpectralPotential};
pub use metrics::{EvalProtocol, EvalReport};
pub use neuralnet::{AdamConfig, Architecture, VelocityModel};
pub use odesolve::{integrate, Method, SolveSpec, VectorField};
pub use synthdata::{DatasetName, DatasetSpec, Sampler};
pub use trainer::{train, TrainConfig, TrainRecord};
