//! Curriculum-learning toolkit for visual-odometry training.
//!
//! * [`geometry`]: SE(3)/SO(3) primitives.
//! * [`metrics`]: Umeyama alignment, ATE and AUC.
//! * [`difficulty`]: six-DoF motion-complexity scoring and level partitioning.
//! * [`curriculum`]: hierarchical weighted loss, staged and self-paced schedulers, early stopping.
//! * [`ddpg`]: adaptive weight scheduling with three DDPG agents.
//! * [`surrogate`]: a small synthetic VO-like training task that drives any scheduler.

pub mod checkpoint;
pub mod curriculum;
pub mod ddpg;
pub mod difficulty;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod nn;
pub mod parallel;
pub mod surrogate;
pub mod trajectory;

pub use error::{Error, Result};
pub use geometry::{RigidPose, Twist};
pub use parallel::Execution;
pub use trajectory::Trajectory;
