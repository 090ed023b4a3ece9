//! Config-driven experiment grids, bound sweeps, plots and the self-test.

mod bounds_sweep;
mod config;
mod grid;
mod plot;
mod selftest;
mod svg;

pub use bounds_sweep::{
    bounds_csv_header, run_bound_sweep, run_bound_sweep_to_dir, write_bound_rows, BoundRow, BoundSweep, TruthCheck,
};
pub use config::{parse_config, parse_config_str, BoundsConfig, DemoSampling, ExperimentConfig, GridConfig};
pub use grid::{read_records, record_count, run_grid, run_grid_to_dir, write_records, ExperimentRecord, Method};
pub use plot::{
    emit_plots, emit_plots_from_files, parse_plot_specs, summarize, summarize_cell, Axis, PlotOutput, PlotSpec, Summary,
    SummaryRow,
};
pub use svg::{render, Chart, Point, Reference, Series, PALETTE};
pub use selftest::{run_selftest, CheckResult};
