//! Configuration files, experiment runners and result files.

mod output;
mod run;
mod spec;

pub use output::{emit_outputs, format_number, render_csv};
pub use run::{
    run, run_optimize, run_power_grid, run_sweep_dac_bits, run_sweep_power, run_sweep_ris_bits, run_validate, Cell,
    OptimizerRecord, PlotSpec, SweepResult, Table,
};
pub use spec::{load_config, parse_config, ExperimentKind, ExperimentSpec, Overrides, Settings, KEYS};
