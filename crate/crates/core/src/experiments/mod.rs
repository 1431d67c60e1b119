//! Configuration, figure regeneration and the validation suite.

pub mod config;
pub mod figures;
pub mod validate;

pub use config::{ExperimentConfig, FigureId};
pub use figures::{figure, write_figure, FigureRow, FigureTable};
pub use validate::{validate, Check, Status, ValidationReport};
