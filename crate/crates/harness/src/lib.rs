//! Experiment runner for the identity-relation models: grid expansion,
//! parallel execution, CSV output, aggregation, and sweep plots.

mod error;
pub mod experiment;
pub mod grid;
pub mod plot;
pub mod results;

pub use error::{HarnessError, Result};
pub use experiment::{Cell, ExperimentSpec, RunSpec, Variant};
pub use grid::{run_grid, seeded_data, seeded_split};
pub use plot::{emit_sweep_plot, sweep_series, Series};
pub use results::{
    aggregate, grid_best, read_results, write_aggregate, write_results, AggregateRow, ResultRow,
};
