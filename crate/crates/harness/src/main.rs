use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use erbp::dataset::{read_dataset, split_train_test, write_dataset};
use erbp::trainer::{gradient_check, train_run, RunConfig, STREAM_DATA};
use erbp::{Fusion, Init, MlpConfig, OptimizerKind, PriorVariant, Rng, Task};
use erbp_harness::results::{format_table, write_text};
use erbp_harness::{
    aggregate, emit_sweep_plot, grid_best, read_results, run_grid, seeded_data, sweep_series,
    write_aggregate, write_results, ExperimentSpec, HarnessError, Result, ResultRow, Variant,
};

#[derive(Parser)]
#[command(
    name = "erbp",
    version,
    about = "Identity-relation learning with a relational weight prior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded dataset and its train/test split.
    Generate(GenerateArgs),
    /// Train and evaluate a single network.
    Train(TrainArgs),
    /// Run a named experiment or a TOML experiment file over seeds.
    Grid(GridArgs),
    /// Compare backpropagation against finite differences.
    Gradcheck(GradcheckArgs),
    /// Aggregate an existing results CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    None,
    L1,
    L2,
}

impl PriorArg {
    fn variant(self) -> Option<PriorVariant> {
        match self {
            PriorArg::None => None,
            PriorArg::L1 => Some(PriorVariant::L1),
            PriorArg::L2 => Some(PriorVariant::L2),
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 3)]
    n_half: usize,
    #[arg(long, default_value_t = 20)]
    hidden: usize,
    #[arg(long, default_value_t = 1)]
    depth: usize,
    #[arg(long, default_value = "none")]
    fusion: Fusion,
    #[arg(long, value_enum, default_value = "none")]
    prior: PriorArg,
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    /// identity, single_bit, parity_zero, parity_zero_odd, or joint_<pattern>.
    #[arg(long, default_value = "identity")]
    task: Task,
    #[arg(long, default_value = "glorot")]
    init: Init,
}

impl ModelArgs {
    fn run_config(&self, seed: u64) -> RunConfig {
        let model = MlpConfig::new(
            self.n_half,
            self.hidden,
            self.depth,
            self.fusion,
            self.task.heads(),
        )
        .with_init(self.init);
        let cfg = RunConfig::new(model, seed);
        match self.prior.variant() {
            Some(p) => cfg.with_prior(p, self.lambda),
            None => cfg,
        }
    }

    fn variant_label(&self) -> String {
        let prior = self.prior.variant();
        match Variant::from_parts(self.fusion, prior) {
            Ok(v) => v.to_string(),
            Err(_) => format!(
                "{}_fusion_{}",
                self.fusion,
                prior.map_or("none".into(), |p| p.to_string())
            ),
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 3)]
    n_half: usize,
    #[arg(long, default_value = "identity")]
    task: Task,
    #[arg(long, visible_alias = "base-seed", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    /// Defaults to 0.001 for Adam and 0.01 for SGD.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, visible_alias = "base-seed", default_value_t = 0)]
    seed: u64,
    /// Train on this dataset file instead of a generated one.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Directory for results.csv and model.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fill the wall_ms column.
    #[arg(long)]
    record_timing: bool,
}

#[derive(Args)]
struct GridArgs {
    /// table1, table2, table3, lambda_sweep or joint.
    experiment: Option<String>,
    /// TOML experiment file, used instead of a named experiment.
    #[arg(long, conflicts_with = "experiment")]
    config: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    n_half: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
    #[arg(long, value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    depth: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    optimizer: Vec<OptimizerKind>,
    /// Replaces the learning-rate grid of every optimizer.
    #[arg(long, value_delimiter = ',')]
    lr: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    epochs: Vec<usize>,
    /// Defaults to results/<experiment>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    record_timing: bool,
}

impl GridArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match (&self.experiment, &self.config) {
            (Some(name), None) => ExperimentSpec::preset(name)?,
            (None, Some(path)) => ExperimentSpec::load(path)?,
            _ => {
                return Err(HarnessError::Config(
                    "give an experiment name or --config FILE".into(),
                ))
            }
        };
        fn set<T: Clone>(axis: &mut Vec<T>, values: &[T]) {
            if !values.is_empty() {
                *axis = values.to_vec();
            }
        }
        set(&mut spec.n_half, &self.n_half);
        set(&mut spec.variants, &self.variants);
        set(&mut spec.hidden, &self.hidden);
        set(&mut spec.depth, &self.depth);
        set(&mut spec.lambda, &self.lambda);
        set(&mut spec.optimizers, &self.optimizer);
        set(&mut spec.adam_lr, &self.lr);
        set(&mut spec.sgd_lr, &self.lr);
        set(&mut spec.epochs, &self.epochs);
        if let Some(s) = self.seeds {
            spec.seeds = s;
        }
        if let Some(b) = self.base_seed {
            spec.base_seed = b;
        }
        Ok(spec)
    }
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, visible_alias = "base-seed", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV written by `grid` or `train`.
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the input's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let (data, split) = seeded_data(args.seed, args.n_half, args.task)?;
    create_dir(&args.out)?;
    write_dataset(&data, &args.out.join("dataset.txt"))?;
    write_dataset(&split.train, &args.out.join("train.txt"))?;
    write_dataset(&split.test, &args.out.join("test.txt"))?;
    let (pos, neg) = data.class_counts();
    println!(
        "wrote {} examples ({pos} positive, {neg} negative; {} train, {} test) to {}",
        data.len(),
        split.train.len(),
        split.test.len(),
        args.out.display()
    );
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let lr = args.lr.unwrap_or(args.optimizer.default_lr());
    let cfg = args
        .model
        .run_config(args.seed)
        .with_optimizer(args.optimizer, lr)
        .with_epochs(args.epochs);
    cfg.validate()?;
    let split = match &args.dataset {
        Some(path) => {
            let data = read_dataset(path)?;
            split_train_test(&mut Rng::new(args.seed).fork(STREAM_DATA), &data)?
        }
        None => seeded_data(args.seed, args.model.n_half, args.model.task)?.1,
    };
    let (model, record) = train_run(&cfg, &split)?;
    let mut row = ResultRow::from_parts(0, "train", &args.model.variant_label(), &record);
    if args.record_timing {
        row.wall_ms = Some(record.wall_ms);
    }
    print!("train_acc={} test_acc={}", row.train_acc, row.test_acc);
    if let (Some(tr), Some(te)) = (row.pattern_train_acc, row.pattern_test_acc) {
        print!(" pattern_train_acc={tr} pattern_test_acc={te}");
    }
    println!(
        " data_loss={:.6} prior_loss={:.6}",
        row.final_data_loss, row.final_prior_loss
    );
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_results(&[row], &dir.join("results.csv"))?;
        model.save(&dir.join("model.txt"))?;
    }
    Ok(())
}

fn write_reports(rows: &[ResultRow], dir: &Path) -> Result<()> {
    let cells = aggregate(rows);
    let best = grid_best(&cells);
    write_aggregate(&cells, &dir.join("aggregate.csv"))?;
    write_aggregate(&best, &dir.join("best.csv"))?;
    let table = format_table(&best);
    write_text(&dir.join("summary.txt"), &table)?;
    print!("{table}");
    if sweep_series(&best).iter().any(|s| s.points.len() > 1) {
        emit_sweep_plot(&best, &dir.join("sweep.svg"))?;
    }
    Ok(())
}

fn grid(args: &GridArgs) -> Result<()> {
    let spec = args.spec()?;
    spec.validate()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new("results").join(&spec.name));
    create_dir(&out)?;
    eprintln!("{}: {} runs", spec.name, spec.runs().len());
    let started = Instant::now();
    let mut rows = run_grid(&spec)?;
    if !args.record_timing {
        rows.iter_mut().for_each(|r| r.wall_ms = None);
    }
    write_results(&rows, &out.join("results.csv"))?;
    write_reports(&rows, &out)?;
    eprintln!(
        "done in {:.1}s; output in {}",
        started.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let cfg = args.model.run_config(args.seed);
    let report = gradient_check(&cfg, args.points)?;
    println!(
        "max_rel_error={:.3e} points={} rejected={} params_checked={} params_skipped={}",
        report.max_rel_error,
        report.points,
        report.rejected_points,
        report.params_checked,
        report.params_skipped
    );
    Ok(report.max_rel_error <= args.tolerance)
}

fn report(args: &ReportArgs) -> Result<()> {
    let rows = read_results(&args.input)?;
    if rows.is_empty() {
        return Err(HarnessError::Config(format!(
            "{}: no rows",
            args.input.display()
        )));
    }
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => args
            .input
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    create_dir(&out)?;
    write_reports(&rows, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Grid(a) => grid(a).map(|_| true),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Report(a) => report(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gradient check exceeded tolerance");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
