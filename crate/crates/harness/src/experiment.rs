//! Experiment definitions: named presets, TOML configs, and their expansion
//! into individual runs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use erbp::dataset::{MAX_JOINT_N_HALF, MAX_N_HALF};
use erbp::model::MAX_DEPTH;
use erbp::{Fusion, Init, MlpConfig, OptimizerKind, PatternKind, PriorVariant, RunConfig, Task};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Standard,
    EarlyFusion,
    MidFusion,
    ErbpL1,
    ErbpL2,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Standard,
        Variant::EarlyFusion,
        Variant::MidFusion,
        Variant::ErbpL1,
        Variant::ErbpL2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::EarlyFusion => "early_fusion",
            Variant::MidFusion => "mid_fusion",
            Variant::ErbpL1 => "erbp_l1",
            Variant::ErbpL2 => "erbp_l2",
        }
    }

    pub fn fusion(self) -> Fusion {
        match self {
            Variant::EarlyFusion => Fusion::Early,
            Variant::MidFusion => Fusion::Mid,
            _ => Fusion::None,
        }
    }

    pub fn prior(self) -> Option<PriorVariant> {
        match self {
            Variant::ErbpL1 => Some(PriorVariant::L1),
            Variant::ErbpL2 => Some(PriorVariant::L2),
            _ => None,
        }
    }

    /// The variant with the given fusion and prior, if one exists.
    pub fn from_parts(fusion: Fusion, prior: Option<PriorVariant>) -> Result<Self> {
        match (fusion, prior) {
            (Fusion::None, None) => Ok(Variant::Standard),
            (Fusion::Early, None) => Ok(Variant::EarlyFusion),
            (Fusion::Mid, None) => Ok(Variant::MidFusion),
            (Fusion::None, Some(PriorVariant::L1)) => Ok(Variant::ErbpL1),
            (Fusion::None, Some(PriorVariant::L2)) => Ok(Variant::ErbpL2),
            (f, Some(p)) => Err(HarnessError::config(format!(
                "prior {p} with fusion {f} is not a supported variant"
            ))),
        }
    }

    /// Hidden width actually used: prior variants need two rows per input pair.
    pub fn resolve_hidden(self, n_half: usize, hidden: usize) -> usize {
        if self.prior().is_some() {
            hidden.max(2 * n_half)
        } else {
            hidden
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| HarnessError::config(format!("unknown variant {s:?}")))
    }
}

pub const LAMBDA_GRID: [f64; 8] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0];
pub const HIDDEN_GRID: [usize; 3] = [10, 20, 30];
pub const ADAM_LR_GRID: [f64; 2] = [0.001, 0.01];
pub const SGD_LR_GRID: [f64; 3] = [0.01, 0.05, 0.1];
pub const PRESETS: [&str; 5] = ["table1", "table2", "table3", "lambda_sweep", "joint"];

/// Axes of a grid. Every combination is run once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub tasks: Vec<Task>,
    pub n_half: Vec<usize>,
    pub variants: Vec<Variant>,
    pub hidden: Vec<usize>,
    pub depth: Vec<usize>,
    /// Applies to prior variants only; the others run once at λ=0.
    pub lambda: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
    pub adam_lr: Vec<f64>,
    pub sgd_lr: Vec<f64>,
    pub epochs: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    pub init: Init,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "custom".into(),
            tasks: vec![Task::Identity],
            n_half: vec![3],
            variants: Variant::ALL.to_vec(),
            hidden: vec![20],
            depth: vec![1],
            lambda: vec![3.0],
            optimizers: vec![OptimizerKind::Adam],
            adam_lr: vec![OptimizerKind::Adam.default_lr()],
            sgd_lr: vec![OptimizerKind::Sgd.default_lr()],
            epochs: vec![20],
            seeds: 10,
            base_seed: 0,
            init: Init::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn preset(name: &str) -> Result<Self> {
        let grid = ExperimentSpec {
            name: name.into(),
            hidden: HIDDEN_GRID.to_vec(),
            adam_lr: ADAM_LR_GRID.to_vec(),
            sgd_lr: SGD_LR_GRID.to_vec(),
            ..Default::default()
        };
        let erbp = vec![Variant::ErbpL1, Variant::ErbpL2];
        Ok(match name {
            "table1" => ExperimentSpec {
                n_half: vec![3, 10, 30],
                ..grid
            },
            "table2" => ExperimentSpec {
                depth: vec![2, 3, 4, 5],
                ..grid
            },
            "table3" => ExperimentSpec {
                variants: erbp,
                lambda: vec![1.0, 30.0],
                optimizers: vec![OptimizerKind::Adam, OptimizerKind::Sgd],
                ..grid
            },
            "lambda_sweep" => ExperimentSpec {
                variants: erbp,
                lambda: LAMBDA_GRID.to_vec(),
                ..grid
            },
            "joint" => ExperimentSpec {
                tasks: vec![
                    Task::Joint(PatternKind::SingleBit),
                    Task::Joint(PatternKind::ParityZero),
                ],
                n_half: vec![10],
                variants: vec![Variant::Standard, Variant::ErbpL1, Variant::ErbpL2],
                lambda: vec![1.0, 3.0, 10.0, 30.0],
                ..grid
            },
            _ => {
                return Err(HarnessError::config(format!(
                    "unknown experiment {name:?}; expected one of {PRESETS:?} or a config file"
                )))
            }
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SpecFile =
            toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        file.into_spec()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn learning_rates(&self, kind: OptimizerKind) -> &[f64] {
        match kind {
            OptimizerKind::Adam => &self.adam_lr,
            OptimizerKind::Sgd => &self.sgd_lr,
        }
    }

    /// Checks axis ranges and that every expanded run is a valid
    /// configuration.
    pub fn validate(&self) -> Result<()> {
        let nonempty = [
            ("tasks", self.tasks.is_empty()),
            ("n_half", self.n_half.is_empty()),
            ("variants", self.variants.is_empty()),
            ("hidden", self.hidden.is_empty()),
            ("depth", self.depth.is_empty()),
            ("lambda", self.lambda.is_empty()),
            ("optimizers", self.optimizers.is_empty()),
            ("epochs", self.epochs.is_empty()),
        ];
        if let Some((axis, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(HarnessError::config(format!("axis {axis} is empty")));
        }
        if self.seeds == 0 {
            return Err(HarnessError::config("seeds must be at least 1"));
        }
        for &kind in &self.optimizers {
            let lrs = self.learning_rates(kind);
            if lrs.is_empty() {
                return Err(HarnessError::config(format!(
                    "no learning rates for {kind}"
                )));
            }
            if let Some(lr) = lrs.iter().find(|lr| !(**lr > 0.0 && lr.is_finite())) {
                return Err(HarnessError::config(format!(
                    "learning rate must be > 0, got {lr}"
                )));
            }
        }
        for &task in &self.tasks {
            for &n in &self.n_half {
                let max = match task {
                    Task::Joint(_) => MAX_JOINT_N_HALF,
                    _ => MAX_N_HALF,
                };
                if n == 0 || n > max {
                    return Err(HarnessError::config(format!(
                        "n_half={n} outside 1..={max} for task {task}"
                    )));
                }
                if !matches!(task, Task::Identity) && n < 2 {
                    return Err(HarnessError::config(format!(
                        "task {task} needs n_half >= 2"
                    )));
                }
            }
        }
        if let Some(d) = self.depth.iter().find(|d| **d == 0 || **d > MAX_DEPTH) {
            return Err(HarnessError::config(format!(
                "depth={d} outside 1..={MAX_DEPTH}"
            )));
        }
        for cell in self.cells() {
            cell.run_config(self.base_seed).validate()?;
        }
        Ok(())
    }

    /// Distinct grid cells in output order. Seeds are not part of a cell.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = Vec::new();
        for &task in &self.tasks {
            for &n_half in &self.n_half {
                for &variant in &self.variants {
                    let lambdas: &[f64] = if variant.prior().is_some() {
                        &self.lambda
                    } else {
                        &[0.0]
                    };
                    for &depth in &self.depth {
                        for &h in &self.hidden {
                            let hidden = variant.resolve_hidden(n_half, h);
                            for &lambda in lambdas {
                                for &optimizer in &self.optimizers {
                                    for &lr in self.learning_rates(optimizer) {
                                        for &epochs in &self.epochs {
                                            let cell = Cell {
                                                experiment: self.experiment_label(task),
                                                task,
                                                variant,
                                                n_half,
                                                hidden,
                                                depth,
                                                lambda,
                                                optimizer,
                                                lr,
                                                epochs,
                                                init: self.init,
                                            };
                                            if !out.contains(&cell) {
                                                out.push(cell);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Every run in output order: cells in axis order, seeds innermost.
    pub fn runs(&self) -> Vec<RunSpec> {
        let cells = self.cells();
        let mut out = Vec::with_capacity(cells.len() * self.seeds);
        for cell in cells {
            for i in 0..self.seeds {
                out.push(RunSpec {
                    run_id: out.len(),
                    cell: cell.clone(),
                    seed: self.base_seed + i as u64,
                });
            }
        }
        out
    }

    fn experiment_label(&self, task: Task) -> String {
        match task {
            Task::Identity => self.name.clone(),
            other => format!("{}/{other}", self.name),
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub experiment: String,
    pub task: Task,
    pub variant: Variant,
    pub n_half: usize,
    pub hidden: usize,
    pub depth: usize,
    pub lambda: f64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub epochs: usize,
    pub init: Init,
}

impl Cell {
    pub fn run_config(&self, seed: u64) -> RunConfig {
        let model = MlpConfig::new(
            self.n_half,
            self.hidden,
            self.depth,
            self.variant.fusion(),
            self.task.heads(),
        )
        .with_init(self.init);
        let mut cfg = RunConfig::new(model, seed)
            .with_optimizer(self.optimizer, self.lr)
            .with_epochs(self.epochs);
        if let Some(p) = self.variant.prior() {
            cfg = cfg.with_prior(p, self.lambda);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: usize,
    pub cell: Cell,
    pub seed: u64,
}

/// TOML form of a spec; omitted keys take the custom defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    name: Option<String>,
    tasks: Option<Vec<String>>,
    n_half: Option<Vec<usize>>,
    variants: Option<Vec<String>>,
    hidden: Option<Vec<usize>>,
    depth: Option<Vec<usize>>,
    lambda: Option<Vec<f64>>,
    optimizers: Option<Vec<String>>,
    adam_lr: Option<Vec<f64>>,
    sgd_lr: Option<Vec<f64>>,
    epochs: Option<Vec<usize>>,
    seeds: Option<usize>,
    base_seed: Option<u64>,
    init: Option<String>,
}

fn parse_all<T: FromStr>(items: Vec<String>) -> Result<Vec<T>>
where
    HarnessError: From<T::Err>,
{
    items
        .iter()
        .map(|s| s.parse::<T>().map_err(HarnessError::from))
        .collect()
}

impl SpecFile {
    fn into_spec(self) -> Result<ExperimentSpec> {
        let d = ExperimentSpec::default();
        Ok(ExperimentSpec {
            name: self.name.unwrap_or(d.name),
            tasks: self.tasks.map(parse_all).transpose()?.unwrap_or(d.tasks),
            n_half: self.n_half.unwrap_or(d.n_half),
            variants: self
                .variants
                .map(parse_all)
                .transpose()?
                .unwrap_or(d.variants),
            hidden: self.hidden.unwrap_or(d.hidden),
            depth: self.depth.unwrap_or(d.depth),
            lambda: self.lambda.unwrap_or(d.lambda),
            optimizers: self
                .optimizers
                .map(parse_all)
                .transpose()?
                .unwrap_or(d.optimizers),
            adam_lr: self.adam_lr.unwrap_or(d.adam_lr),
            sgd_lr: self.sgd_lr.unwrap_or(d.sgd_lr),
            epochs: self.epochs.unwrap_or(d.epochs),
            seeds: self.seeds.unwrap_or(d.seeds),
            base_seed: self.base_seed.unwrap_or(d.base_seed),
            init: self.init.map(|s| s.parse()).transpose()?.unwrap_or(d.init),
        })
    }
}
