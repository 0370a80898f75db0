use std::collections::HashMap;

use erbp::dataset::{generate, split_train_test, Dataset, Split, Task};
use erbp::trainer::{train_run, RunRecord, STREAM_DATA};
use erbp::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::experiment::{ExperimentSpec, RunSpec};
use crate::results::ResultRow;

/// The dataset and split for one seed: a pure function of
/// `(seed, n_half, task)`, shared by every cell that uses that seed.
pub fn seeded_split(seed: u64, n_half: usize, task: Task) -> Result<Split> {
    Ok(seeded_data(seed, n_half, task)?.1)
}

/// The full dataset along with its split.
pub fn seeded_data(seed: u64, n_half: usize, task: Task) -> Result<(Dataset, Split)> {
    let mut rng = Rng::new(seed).fork(STREAM_DATA);
    let data = generate(&mut rng, n_half, task)?;
    let split = split_train_test(&mut rng, &data)?;
    Ok((data, split))
}

pub fn run_one(run: &RunSpec, split: &Split) -> Result<RunRecord> {
    let cfg = run.cell.run_config(run.seed);
    Ok(train_run(&cfg, split)?.1)
}

/// Executes every run of `spec`. The spec and all datasets are checked
/// before any training starts; rows come back in axis order regardless of
/// how runs were scheduled.
pub fn run_grid(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let runs = spec.runs();
    let mut splits: HashMap<(u64, usize, Task), Split> = HashMap::new();
    for run in &runs {
        let key = (run.seed, run.cell.n_half, run.cell.task);
        if let std::collections::hash_map::Entry::Vacant(slot) = splits.entry(key) {
            slot.insert(seeded_split(key.0, key.1, key.2)?);
        }
    }
    runs.par_iter()
        .map(|run| {
            let split = &splits[&(run.seed, run.cell.n_half, run.cell.task)];
            let record = run_one(run, split)?;
            Ok(ResultRow::from_record(run, &record))
        })
        .collect()
}
