pub mod error;
pub mod kmd;
pub mod linalg;
pub mod metrics;
pub mod modeselect;
pub mod noise;
pub mod pipeline;
pub mod rom;
pub mod snapshots;
pub mod systems;

pub use error::{KromError, Result};
