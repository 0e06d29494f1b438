pub mod catalog;
pub mod design;
pub mod encode;
pub mod enumerate;
pub mod error;
pub mod extend;
pub mod format;
pub mod hadamard;
pub mod heuristics;
pub mod iso;
pub mod spectra;

pub use design::{Design, DesignParams};
pub use error::{Error, Result};
