//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use erbp::dataset::hamming_between_halves;
use erbp::model::Layer;
use erbp::prior::build_default_matrix;
use erbp::trainer::{gradient_check, train_run, RunConfig};
use erbp::{Fusion, Mlp, MlpConfig, OptimizerKind, PriorVariant};
use erbp_harness::results::format_table;
use erbp_harness::{
    aggregate, grid_best, run_grid, seeded_split, write_results, AggregateRow, ExperimentSpec,
    Variant,
};

const GRAD_TOLERANCE: f64 = 1e-4;

type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            detail: String::new(),
        }
    }

    /// Records one checked value; any failing check fails the criterion.
    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.detail.push_str(&format!(
            "\n    [{}] {what}",
            if ok { "ok" } else { "FAIL" }
        ));
    }
}

fn out_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

/// Runs a preset, saves its CSV and grid-best table, and returns the
/// grid-best cells.
fn run_preset(spec: &ExperimentSpec) -> Vec<AggregateRow> {
    let rows = run_grid(spec).expect("grid runs");
    let dir = out_dir().join(&spec.name);
    std::fs::create_dir_all(&dir).unwrap();
    write_results(&rows, &dir.join("results.csv")).unwrap();
    let best = grid_best(&aggregate(&rows));
    std::fs::write(dir.join("best.txt"), format_table(&best)).unwrap();
    best
}

fn find(cells: &[AggregateRow], pred: impl Fn(&AggregateRow) -> bool) -> &AggregateRow {
    let hits: Vec<_> = cells.iter().filter(|c| pred(c)).collect();
    assert_eq!(hits.len(), 1, "expected exactly one grid-best cell");
    hits[0]
}

fn mean(c: &AggregateRow) -> f64 {
    c.test.as_ref().expect("cell has runs").mean
}

fn pattern_mean(c: &AggregateRow) -> f64 {
    c.pattern_test.as_ref().expect("two-head cell").mean
}

struct Table1 {
    cells: Vec<AggregateRow>,
    erbp_seconds: f64,
}

fn table1() -> Table1 {
    let spec = ExperimentSpec::preset("table1").unwrap();
    let erbp_spec = ExperimentSpec {
        name: "table1_erbp".into(),
        variants: vec![Variant::ErbpL1, Variant::ErbpL2],
        ..spec.clone()
    };
    let started = Instant::now();
    let mut cells = run_preset(&erbp_spec);
    let erbp_seconds = started.elapsed().as_secs_f64();
    let rest = ExperimentSpec {
        variants: vec![Variant::Standard, Variant::EarlyFusion, Variant::MidFusion],
        ..spec
    };
    cells.extend(run_preset(&rest));
    Table1 {
        cells,
        erbp_seconds,
    }
}

fn table1_cell(t: &Table1, variant: Variant, n: usize) -> &AggregateRow {
    find(&t.cells, |c| {
        c.key.variant == variant.as_str() && c.key.n_half == n
    })
}

fn criterion_1(t: &Table1) -> Outcome {
    let mut o = Outcome::new();
    for v in [Variant::ErbpL1, Variant::ErbpL2] {
        for n in [3, 10, 30] {
            let c = table1_cell(t, v, n);
            let m = mean(c);
            o.check(
                m >= 99.0,
                format!(
                    "{v} n={n} (h={}, lr={}): {m:.2} >= 99",
                    c.key.hidden, c.key.lr
                ),
            );
        }
    }
    o.check(
        t.erbp_seconds < 300.0,
        format!("ERBP runtime {:.1}s < 300s", t.erbp_seconds),
    );
    o
}

fn criterion_2(t: &Table1) -> Outcome {
    let mut o = Outcome::new();
    for n in [10, 30] {
        let m = mean(table1_cell(t, Variant::Standard, n));
        o.check(
            (45.0..=68.0).contains(&m),
            format!("standard n={n}: {m:.2} in [45, 68]"),
        );
    }
    let m = mean(table1_cell(t, Variant::Standard, 3));
    o.check(m < 85.0, format!("standard n=3: {m:.2} < 85"));
    o
}

fn criterion_3(t: &Table1) -> Outcome {
    let mut o = Outcome::new();
    for n in [3, 10, 30] {
        let m = mean(table1_cell(t, Variant::MidFusion, n));
        o.check(m >= 99.0, format!("mid_fusion n={n}: {m:.2} >= 99"));
    }
    o
}

fn criterion_4(t: &Table1) -> Outcome {
    let mut o = Outcome::new();
    for n in [3, 10, 30] {
        let early = mean(table1_cell(t, Variant::EarlyFusion, n));
        let standard = mean(table1_cell(t, Variant::Standard, n));
        o.check(
            early > standard,
            format!("early_fusion n={n}: {early:.2} > standard {standard:.2}"),
        );
        o.check(
            (55.0..=90.0).contains(&early),
            format!("early_fusion n={n}: {early:.2} in [55, 90]"),
        );
    }
    o
}

fn criterion_5(t: &Table1) -> Outcome {
    let sweep = run_preset(&ExperimentSpec::preset("lambda_sweep").unwrap());
    let standard = mean(table1_cell(t, Variant::Standard, 3));
    let mut o = Outcome::new();
    for v in [Variant::ErbpL1, Variant::ErbpL2] {
        let at = |l: f64| {
            mean(find(&sweep, |c| {
                c.key.variant == v.as_str() && c.key.lambda == l
            }))
        };
        for l in [3.0, 10.0, 30.0] {
            o.check(at(l) >= 99.0, format!("{v} λ={l}: {:.2} >= 99", at(l)));
        }
        o.check(
            (at(0.01) - standard).abs() <= 10.0,
            format!(
                "{v} λ=0.01: {:.2} within 10 of standard n=3 {standard:.2}",
                at(0.01)
            ),
        );
        let rising = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0];
        let curve: Vec<f64> = rising.iter().map(|&l| at(l)).collect();
        let monotone = curve.windows(2).all(|w| w[1] >= w[0] - 3.0);
        let shown: Vec<String> = curve.iter().map(|a| format!("{a:.1}")).collect();
        o.check(
            monotone,
            format!(
                "{v} non-decreasing (tol 3) over λ≤3: [{}]",
                shown.join(", ")
            ),
        );
    }
    o
}

fn criterion_6() -> Outcome {
    let cells = run_preset(&ExperimentSpec::preset("table2").unwrap());
    let mut o = Outcome::new();
    for depth in 2..=5 {
        for v in [Variant::ErbpL1, Variant::ErbpL2] {
            let m = mean(find(&cells, |c| {
                c.key.variant == v.as_str() && c.key.depth == depth
            }));
            o.check(m >= 99.0, format!("{v} depth={depth}: {m:.2} >= 99"));
        }
        let m = mean(find(&cells, |c| {
            c.key.variant == "standard" && c.key.depth == depth
        }));
        o.check(m < 85.0, format!("standard depth={depth}: {m:.2} < 85"));
    }
    o
}

fn criterion_7() -> Outcome {
    let cells = run_preset(&ExperimentSpec::preset("table3").unwrap());
    let at = |v: Variant, opt: OptimizerKind, l: f64| {
        mean(find(&cells, |c| {
            c.key.variant == v.as_str() && c.key.optimizer == opt.to_string() && c.key.lambda == l
        }))
    };
    let mut o = Outcome::new();
    for v in [Variant::ErbpL1, Variant::ErbpL2] {
        let adam = at(v, OptimizerKind::Adam, 1.0);
        o.check(adam >= 99.0, format!("{v} adam λ=1: {adam:.2} >= 99"));
        let sgd = at(v, OptimizerKind::Sgd, 1.0);
        o.check(
            (85.0..100.0).contains(&sgd),
            format!("{v} sgd λ=1: {sgd:.2} in [85, 100)"),
        );
        let sgd30 = at(v, OptimizerKind::Sgd, 30.0);
        o.check(sgd30 >= 99.0, format!("{v} sgd λ=30: {sgd30:.2} >= 99"));
    }
    o
}

fn criterion_8() -> Outcome {
    let cells = run_preset(&ExperimentSpec::preset("joint").unwrap());
    let mut o = Outcome::new();
    for task in ["joint/joint_single_bit", "joint/joint_parity_zero"] {
        for l in [1.0, 3.0, 10.0, 30.0] {
            let c = find(&cells, |c| {
                c.key.experiment == task && c.key.variant == "erbp_l2" && c.key.lambda == l
            });
            let (id, pat) = (mean(c), pattern_mean(c));
            o.check(
                id >= 99.0,
                format!("{task} erbp_l2 λ={l}: identity head {id:.2} >= 99"),
            );
            if l <= 10.0 {
                o.check(
                    pat >= 99.0,
                    format!("{task} erbp_l2 λ={l}: pattern head {pat:.2} >= 99"),
                );
            }
        }
    }
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    for fusion in [Fusion::None, Fusion::Early, Fusion::Mid] {
        for depth in 1..=5 {
            for heads in 1..=2 {
                for variant in [PriorVariant::L1, PriorVariant::L2] {
                    for lambda in [0.0, 3.0] {
                        let model = MlpConfig::new(3, 8, depth, fusion, heads);
                        let cfg = RunConfig::new(model, configs).with_prior(variant, lambda);
                        let report = gradient_check(&cfg, 20).unwrap();
                        if report.max_rel_error > GRAD_TOLERANCE || report.points < 20 {
                            o.check(
                                false,
                                format!("{fusion} depth={depth} heads={heads} {variant} λ={lambda}: {report:?}"),
                            );
                        }
                        worst = worst.max(report.max_rel_error);
                        configs += 1;
                    }
                }
            }
        }
    }
    o.check(
        worst <= GRAD_TOLERANCE,
        format!("{configs} configurations x 20 points: max relative error {worst:.2e} <= 1e-4"),
    );
    o
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new();
    for n in 1..=4 {
        let hidden = 2 * n;
        let first = Layer {
            weights: build_default_matrix(n, hidden).unwrap(),
            bias: vec![0.0; hidden],
        };
        let m = Mlp::from_layers(
            MlpConfig::new(n, hidden, 1, Fusion::None, 1),
            vec![first],
            vec![Layer::zeros(2, hidden)],
        )
        .unwrap();
        let mut mismatches = 0;
        for code in 0..1u64 << (2 * n) {
            let x: Vec<f64> = (0..2 * n).map(|p| ((code >> p) & 1) as f64).collect();
            let sum: f64 = m.hidden_activations(&x).unwrap()[0].iter().sum();
            if sum != hamming_between_halves(&x) as f64 {
                mismatches += 1;
            }
        }
        o.check(
            mismatches == 0,
            format!("n={n}: {} inputs, {mismatches} mismatches", 1u64 << (2 * n)),
        );
    }
    o
}

fn criterion_11() -> Outcome {
    let mut o = Outcome::new();
    for (n, seed) in [(3, 0), (10, 1)] {
        let split = seeded_split(seed, n, erbp::Task::Identity).unwrap();
        for fusion in [Fusion::None, Fusion::Early, Fusion::Mid] {
            for variant in [PriorVariant::L1, PriorVariant::L2] {
                for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
                    let plain = RunConfig::new(MlpConfig::new(n, 2 * n, 2, fusion, 1), seed)
                        .with_optimizer(optimizer, optimizer.default_lr())
                        .with_epochs(5);
                    let (a, _) = train_run(&plain, &split).unwrap();
                    let (b, _) = train_run(&plain.with_prior(variant, 0.0), &split).unwrap();
                    let same = a
                        .parameters()
                        .iter()
                        .zip(b.parameters())
                        .all(|(x, y)| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
                    o.check(
                        same,
                        format!("n={n} {fusion} {variant} {optimizer}: bitwise-equal parameters"),
                    );
                }
            }
        }
    }
    o
}

fn criterion_12() -> Outcome {
    let mut o = Outcome::new();
    let exe = env!("CARGO_BIN_EXE_erbp");
    let dir = out_dir().join("determinism");
    let mut outputs = Vec::new();
    for attempt in 0..2 {
        let out = dir.join(format!("run{attempt}"));
        let status = Command::new(exe)
            .args([
                "grid",
                "table3",
                "--seeds",
                "3",
                "--base-seed",
                "7",
                "--out",
            ])
            .arg(&out)
            .output()
            .expect("binary runs");
        o.check(
            status.status.success(),
            format!("grid invocation {attempt} exits 0"),
        );
        outputs.push(std::fs::read(out.join("results.csv")).unwrap_or_default());
    }
    o.check(
        !outputs[0].is_empty() && outputs[0] == outputs[1],
        format!(
            "results.csv identical across reruns ({} bytes)",
            outputs[0].len()
        ),
    );
    o
}

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let wanted = |id: usize| filter.is_empty() || filter.iter().any(|f| f == &id.to_string());
    let needs_table1 = (1..=5).any(wanted);
    let t1 = needs_table1.then(table1);
    let t1 = t1.as_ref();

    let criteria: Vec<Criterion> = vec![
        (
            1,
            "ERBP accuracy across input sizes",
            Box::new(|| criterion_1(t1.unwrap())),
        ),
        (
            2,
            "Standard-network failure",
            Box::new(|| criterion_2(t1.unwrap())),
        ),
        (3, "Mid Fusion", Box::new(|| criterion_3(t1.unwrap()))),
        (
            4,
            "Early Fusion intermediate",
            Box::new(|| criterion_4(t1.unwrap())),
        ),
        (
            5,
            "lambda sweep shape",
            Box::new(|| criterion_5(t1.unwrap())),
        ),
        (6, "ERBP and standard networks across depth", Box::new(criterion_6)),
        (7, "Adam versus SGD under the prior", Box::new(criterion_7)),
        (8, "Joint task", Box::new(criterion_8)),
        (9, "Gradient correctness", Box::new(criterion_9)),
        (10, "Hamming identity", Box::new(criterion_10)),
        (11, "Prior-zero equivalence", Box::new(criterion_11)),
        (12, "Determinism", Box::new(criterion_12)),
    ];
    let mut failed = Vec::new();
    let mut summary = Vec::new();
    for (id, name, run) in criteria.iter().filter(|(id, ..)| wanted(*id)) {
        let started = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict}: {name} ({:.1}s){}",
            started.elapsed().as_secs_f64(),
            outcome.detail
        );
        summary.push(format!("criterion {id:>2} {verdict}: {name}"));
        if !outcome.pass {
            failed.push(*id);
        }
    }
    println!("\nsummary:");
    for line in &summary {
        println!("{line}");
    }
    println!("grid outputs under {}", out_dir().display());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
