//! Training, checkpointing, the evaluation grid, ablations and reports.

mod ablate;
mod batch;
mod checkpoint;
mod config;
mod eval;
mod optim;
mod report;
mod train;

pub use ablate::{ablate, median_metric, ordering_checks, OrderingCheck, Variant};
pub use batch::{corrupted_input, model_input, stack_train, to_step_major, train_sample, TrainSample};
pub use checkpoint::{Best, Checkpoint, RngCounters, CHECKPOINT_VERSION};
pub use config::{DataSource, EvalConfig, OptimConfig, SplitConfig, TrainConfig, TrainSchedule};
pub use eval::{evaluate_grid, evaluate_scenario, summarize, EvalSet, SummaryRow};
pub use optim::AdamW;
pub use report::{line_chart, markdown_tables, render};
pub use train::{train, EpochRecord, History, TrainOutcome, Trainer};

use crate::data::{load_dataset, split, synth_generate, Dataset, Schema, SplitPlan, Splits, SynthConfig, WindowOptions};
use crate::error::{Error, Result};

/// Seed of the synthetic dataset behind `data.source=synthetic`; fixed so that runs
/// differing only in `seed` see the same data.
pub const SYNTH_DATA_SEED: u64 = 0;

/// Generates or reads the dataset named by the config and checks it fits the model.
pub fn load_data(cfg: &TrainConfig) -> Result<Dataset> {
    let ds = match &cfg.data {
        DataSource::Synthetic { n_nodes, n_steps, d_in } => synth_generate(&SynthConfig {
            n_nodes: *n_nodes,
            n_steps: *n_steps,
            d_in: *d_in,
            seed: SYNTH_DATA_SEED,
            ..SynthConfig::default()
        }),
        DataSource::File { data, schema } => load_dataset(data, &Schema::load(schema)?)?,
    };
    if ds.schema.d_in() != cfg.model.d_in || ds.schema.d_out() != cfg.model.d_out {
        return Err(Error::Config(format!(
            "data has {} features and {} targets; model.d_in={} model.d_out={}",
            ds.schema.d_in(),
            ds.schema.d_out(),
            cfg.model.d_in,
            cfg.model.d_out
        )));
    }
    Ok(ds)
}

/// Chronological split and windows as configured.
pub fn prepare(cfg: &TrainConfig, ds: &Dataset) -> Result<Splits> {
    let plan = match cfg.split {
        SplitConfig::Fractions { train, validation } => SplitPlan::fractions(&ds.timestamps, train, validation)?,
        SplitConfig::Years { train, validation, test } => SplitPlan::by_years(train, validation, test),
    };
    let opts = WindowOptions {
        n_in: cfg.model.n_in,
        n_out: cfg.model.n_out,
        train_stride: cfg.train.stride,
        eval_stride: cfg.eval_stride(),
    };
    split(ds, &plan, opts)
}
