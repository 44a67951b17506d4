//! Hierarchical curriculum loss and the schedulers that weight it.

mod loss;
mod schedule;

pub use loss::*;
pub use schedule::*;
