pub mod caf;
pub mod detector;
mod dft;
pub mod error;
pub mod harness;
pub mod signal;
pub mod sparse;
pub mod verify;

pub use caf::{CycleAutocorrelationMatrix, DelayProductMatrix, SensingConfig};
pub use error::{Error, Result};
pub use signal::{SampleRecord, SignalModel};
