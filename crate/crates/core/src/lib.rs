pub mod assemble;
pub mod batch;
pub mod compositor;
pub mod error;
pub mod features;
pub mod gate;
pub mod georef;
pub mod geometry;
pub mod imaging;
pub mod model;
pub mod pipeline;
pub mod sequencer;
pub mod straighten;
pub mod synth;

pub use error::{Error, Result};
