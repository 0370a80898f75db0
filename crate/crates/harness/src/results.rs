//! Per-run result rows, their CSV form, and per-cell aggregation.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use erbp::trainer::RunRecord;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::RunSpec;

/// One line of the results CSV. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: usize,
    pub experiment: String,
    pub variant: String,
    pub n_half: usize,
    pub hidden: usize,
    pub depth: usize,
    pub fusion: String,
    pub prior: String,
    pub lambda: f64,
    pub optimizer: String,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub pattern_train_acc: Option<f64>,
    pub pattern_test_acc: Option<f64>,
    pub final_data_loss: f64,
    pub final_prior_loss: f64,
    /// Left empty unless timing is requested, so that reruns are
    /// byte-identical.
    pub wall_ms: Option<f64>,
}

pub const RESULT_COLUMNS: [&str; 20] = [
    "run_id",
    "experiment",
    "variant",
    "n_half",
    "hidden",
    "depth",
    "fusion",
    "prior",
    "lambda",
    "optimizer",
    "lr",
    "epochs",
    "seed",
    "train_acc",
    "test_acc",
    "pattern_train_acc",
    "pattern_test_acc",
    "final_data_loss",
    "final_prior_loss",
    "wall_ms",
];

impl ResultRow {
    pub fn from_record(run: &RunSpec, record: &RunRecord) -> Self {
        Self::from_parts(
            run.run_id,
            &run.cell.experiment,
            run.cell.variant.as_str(),
            record,
        )
    }

    pub fn from_parts(run_id: usize, experiment: &str, variant: &str, record: &RunRecord) -> Self {
        let cfg = &record.config;
        let loss = record.final_loss();
        ResultRow {
            run_id,
            experiment: experiment.to_string(),
            variant: variant.to_string(),
            n_half: cfg.model.n_half,
            hidden: cfg.model.hidden,
            depth: cfg.model.depth,
            fusion: cfg.model.fusion.to_string(),
            prior: cfg.prior.map_or("none".to_string(), |p| p.to_string()),
            lambda: if cfg.prior.is_some() { cfg.lambda } else { 0.0 },
            optimizer: cfg.optimizer.to_string(),
            lr: cfg.lr,
            epochs: cfg.epochs,
            seed: cfg.seed,
            train_acc: record.train_accuracy[0],
            test_acc: record.test_accuracy[0],
            pattern_train_acc: record.train_accuracy.get(1).copied(),
            pattern_test_acc: record.test_accuracy.get(1).copied(),
            final_data_loss: loss.data,
            final_prior_loss: loss.prior,
            wall_ms: None,
        }
    }

    fn cell_key(&self) -> CellKey {
        CellKey {
            experiment: self.experiment.clone(),
            variant: self.variant.clone(),
            n_half: self.n_half,
            hidden: self.hidden,
            depth: self.depth,
            fusion: self.fusion.clone(),
            prior: self.prior.clone(),
            lambda: self.lambda,
            optimizer: self.optimizer.clone(),
            lr: self.lr,
            epochs: self.epochs,
        }
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS).map_err(csv_err(path))?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(String::from)
        .collect();
    if header != RESULT_COLUMNS {
        return Err(HarnessError::config(format!(
            "{}: unexpected columns {header:?}",
            path.display()
        )));
    }
    r.deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(csv_err(path))
}

/// Axis coordinates of an aggregate cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub experiment: String,
    pub variant: String,
    pub n_half: usize,
    pub hidden: usize,
    pub depth: usize,
    pub fusion: String,
    pub prior: String,
    pub lambda: f64,
    pub optimizer: String,
    pub lr: f64,
    pub epochs: usize,
}

impl CellKey {
    /// Whether `other` differs only in the tuned hyperparameters (hidden
    /// width and learning rate).
    fn same_family(&self, other: &CellKey) -> bool {
        CellKey {
            hidden: 0,
            lr: 0.0,
            ..self.clone()
        } == CellKey {
            hidden: 0,
            lr: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Summary {
            mean: mean.clamp(min, max),
            std: var.sqrt(),
            min,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub key: CellKey,
    pub seeds: Vec<u64>,
    pub run_ids: Vec<usize>,
    pub train_acc: Vec<f64>,
    pub test_acc: Vec<f64>,
    pub pattern_test_acc: Vec<f64>,
    pub test: Option<Summary>,
    /// `None` when no run in the cell has a pattern head.
    pub pattern_test: Option<Summary>,
}

impl AggregateRow {
    /// Mean test accuracy over all heads; the grid-best criterion.
    pub fn score(&self) -> f64 {
        let id = self.test.as_ref().map_or(f64::NEG_INFINITY, |s| s.mean);
        match &self.pattern_test {
            Some(p) => (id + p.mean) / 2.0,
            None => id,
        }
    }
}

/// Groups rows by cell, in order of first appearance. Each row lands in
/// exactly one cell.
pub fn aggregate(rows: &[ResultRow]) -> Vec<AggregateRow> {
    let mut cells: Vec<AggregateRow> = Vec::new();
    for row in rows {
        let key = row.cell_key();
        let idx = match cells.iter().position(|c| c.key == key) {
            Some(i) => i,
            None => {
                cells.push(AggregateRow {
                    key,
                    seeds: vec![],
                    run_ids: vec![],
                    train_acc: vec![],
                    test_acc: vec![],
                    pattern_test_acc: vec![],
                    test: None,
                    pattern_test: None,
                });
                cells.len() - 1
            }
        };
        let cell = &mut cells[idx];
        cell.seeds.push(row.seed);
        cell.run_ids.push(row.run_id);
        cell.train_acc.push(row.train_acc);
        cell.test_acc.push(row.test_acc);
        cell.pattern_test_acc.extend(row.pattern_test_acc);
    }
    for cell in &mut cells {
        cell.test = Summary::of(&cell.test_acc);
        cell.pattern_test = Summary::of(&cell.pattern_test_acc);
    }
    cells
}

/// For each family of cells that differ only in hidden width and learning
/// rate, the cell with the highest mean test accuracy. Ties keep the
/// earliest cell.
pub fn grid_best(cells: &[AggregateRow]) -> Vec<AggregateRow> {
    let mut best: Vec<AggregateRow> = Vec::new();
    for cell in cells {
        match best.iter_mut().find(|b| b.key.same_family(&cell.key)) {
            Some(b) if cell.score() > b.score() => *b = cell.clone(),
            Some(_) => {}
            None => best.push(cell.clone()),
        }
    }
    best
}

fn fmt_opt(s: Option<f64>) -> String {
    s.map_or(String::new(), |v| v.to_string())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

pub const AGGREGATE_COLUMNS: [&str; 22] = [
    "experiment",
    "variant",
    "n_half",
    "hidden",
    "depth",
    "fusion",
    "prior",
    "lambda",
    "optimizer",
    "lr",
    "epochs",
    "runs",
    "mean_test_acc",
    "std_test_acc",
    "min_test_acc",
    "max_test_acc",
    "mean_train_acc",
    "mean_pattern_test_acc",
    "std_pattern_test_acc",
    "test_acc_values",
    "pattern_test_acc_values",
    "seeds",
];

/// Writes aggregate cells; statistics of empty cells are left blank.
pub fn write_aggregate(cells: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(AGGREGATE_COLUMNS).map_err(csv_err(path))?;
    for c in cells {
        let k = &c.key;
        let record = [
            k.experiment.clone(),
            k.variant.clone(),
            k.n_half.to_string(),
            k.hidden.to_string(),
            k.depth.to_string(),
            k.fusion.clone(),
            k.prior.clone(),
            k.lambda.to_string(),
            k.optimizer.clone(),
            k.lr.to_string(),
            k.epochs.to_string(),
            c.test_acc.len().to_string(),
            fmt_opt(c.test.as_ref().map(|s| s.mean)),
            fmt_opt(c.test.as_ref().map(|s| s.std)),
            fmt_opt(c.test.as_ref().map(|s| s.min)),
            fmt_opt(c.test.as_ref().map(|s| s.max)),
            fmt_opt(Summary::of(&c.train_acc).map(|s| s.mean)),
            fmt_opt(c.pattern_test.as_ref().map(|s| s.mean)),
            fmt_opt(c.pattern_test.as_ref().map(|s| s.std)),
            join(&c.test_acc),
            join(&c.pattern_test_acc),
            c.seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        ];
        w.write_record(&record).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// A plain-text table of cells, one line each.
pub fn format_table(cells: &[AggregateRow]) -> String {
    let mut out = String::new();
    for c in cells {
        let k = &c.key;
        let acc = c.test.as_ref().map_or("missing".to_string(), |s| {
            format!("{:6.2} ({:.2})", s.mean, s.std)
        });
        let pattern = c.pattern_test.as_ref().map_or(String::new(), |s| {
            format!("  pattern {:6.2} ({:.2})", s.mean, s.std)
        });
        out.push_str(&format!(
            "{:<28} {:<13} n={:<2} h={:<2} depth={} {:<4} λ={:<5} {} lr={:<6} ep={:<2} -> {acc}{pattern}\n",
            k.experiment, k.variant, k.n_half, k.hidden, k.depth, k.prior, k.lambda, k.optimizer, k.lr, k.epochs
        ));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| HarnessError::io(path, e))
}
