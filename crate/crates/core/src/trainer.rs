//! One training run at batch size 1, evaluation, and a finite-difference
//! gradient check of the full objective.

use std::time::Instant;

use crate::dataset::{Dataset, Split, Task};
use crate::model::Layer;
use crate::objective::{accuracy, cross_entropy_heads, total_loss, LossBreakdown, LOG_CLAMP};
use crate::{
    DefaultPrior, Error, Mlp, MlpConfig, Optimizer, OptimizerKind, PriorVariant, Result, Rng,
};

/// Random streams derived from a run seed.
pub const STREAM_DATA: u64 = 0;
pub const STREAM_INIT: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;
pub const STREAM_GRADCHECK: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub model: MlpConfig,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub epochs: usize,
    /// `None` trains the plain network; `lambda` is then ignored.
    pub prior: Option<PriorVariant>,
    pub lambda: f64,
    pub seed: u64,
}

impl RunConfig {
    /// Adam at its default rate, 20 epochs, no prior.
    pub fn new(model: MlpConfig, seed: u64) -> Self {
        RunConfig {
            model,
            optimizer: OptimizerKind::Adam,
            lr: OptimizerKind::Adam.default_lr(),
            epochs: 20,
            prior: None,
            lambda: 0.0,
            seed,
        }
    }

    pub fn with_prior(mut self, variant: PriorVariant, lambda: f64) -> Self {
        self.prior = Some(variant);
        self.lambda = lambda;
        self
    }

    pub fn with_optimizer(mut self, kind: OptimizerKind, lr: f64) -> Self {
        self.optimizer = kind;
        self.lr = lr;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        self.build_prior().map(|_| ())
    }

    /// The first-layer prior, if any, sized to this model.
    pub fn build_prior(&self) -> Result<Option<DefaultPrior>> {
        self.prior
            .map(|variant| {
                DefaultPrior::with_input_width(
                    self.model.n_half,
                    self.model.hidden,
                    self.model.layer_input_width(0),
                    variant,
                    self.lambda,
                )
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub task: Task,
    /// Training-set objective measured after each epoch.
    pub epoch_losses: Vec<LossBreakdown>,
    /// Accuracy in percent, one entry per head.
    pub train_accuracy: Vec<f64>,
    pub test_accuracy: Vec<f64>,
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn final_loss(&self) -> LossBreakdown {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: Vec<f64>,
    /// Mean summed-over-heads cross-entropy.
    pub mean_loss: f64,
}

pub fn evaluate(m: &Mlp, d: &Dataset) -> Result<Evaluation> {
    let accuracy = accuracy(m, d)?;
    let mut loss = 0.0;
    for ex in d.examples() {
        loss += cross_entropy_heads(&m.predict(&ex.input)?, &Dataset::targets(ex));
    }
    Ok(Evaluation {
        accuracy,
        mean_loss: loss / d.len() as f64,
    })
}

fn check_split(cfg: &RunConfig, split: &Split) -> Result<()> {
    if split.n_half() != cfg.model.n_half {
        return Err(Error::config(format!(
            "dataset has n_half={}, model expects {}",
            split.n_half(),
            cfg.model.n_half
        )));
    }
    if split.task().heads() != cfg.model.heads {
        return Err(Error::config(format!(
            "task {} needs {} head(s), model has {}",
            split.task(),
            split.task().heads(),
            cfg.model.heads
        )));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::config("train and test sets must be nonempty"));
    }
    Ok(())
}

fn epoch_loss(m: &Mlp, train: &Dataset, prior: Option<&DefaultPrior>) -> Result<LossBreakdown> {
    let data = evaluate(m, train)?.mean_loss;
    let first = m.first_layer();
    total_loss(data, prior, &first.weights, &first.bias)
}

/// Trains a freshly initialised network on `split.train` and evaluates it on
/// both halves of the split.
///
/// Each epoch visits the training examples in a new seeded order, taking one
/// optimizer step per example on cross-entropy plus `λ ·` prior.
pub fn train_run(cfg: &RunConfig, split: &Split) -> Result<(Mlp, RunRecord)> {
    cfg.validate()?;
    check_split(cfg, split)?;
    let started = Instant::now();
    let root = Rng::new(cfg.seed);
    let mut init_rng = root.fork(STREAM_INIT);
    let mut order_rng = root.fork(STREAM_SHUFFLE);

    let prior = cfg.build_prior()?;
    let mut mlp = Mlp::init(cfg.model, &mut init_rng)?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr)?;
    let train = &split.train;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        for &i in &order {
            let ex = &train.examples()[i];
            mlp.forward(&ex.input)?;
            let mut grads = mlp.backward(&Dataset::targets(ex))?;
            if let Some(p) = prior.as_ref().filter(|p| p.lambda() > 0.0) {
                let Layer { weights, bias } = mlp.first_layer();
                let g = grads.first_layer_mut();
                p.accumulate_grad(p.lambda(), weights, bias, &mut g.weights, &mut g.bias)?;
            }
            opt.step(mlp.parameters_mut(), &grads.tensors())?;
        }
        epoch_losses.push(epoch_loss(&mlp, train, prior.as_ref())?);
    }

    let train_accuracy = accuracy(&mlp, train)?;
    let test_accuracy = accuracy(&mlp, &split.test)?;
    let record = RunRecord {
        config: *cfg,
        task: split.task(),
        epoch_losses,
        train_accuracy,
        test_accuracy,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok((mlp, record))
}

/// Central-difference step.
pub const GRADCHECK_EPS: f64 = 1e-5;
/// Points or parameters this close to a ReLU or L1 kink are not compared.
pub const KINK_MARGIN: f64 = 1e-3;
/// Points whose target probability falls below this are not compared: the
/// log clamp flattens the loss there.
pub const CLAMP_MARGIN: f64 = 1e3 * LOG_CLAMP;
/// Floor on the denominator of the relative error, so gradients that are
/// zero up to rounding do not produce spurious ratios.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub points: usize,
    /// Candidate points discarded because a pre-activation sat near a kink
    /// or a target probability sat near the log clamp.
    pub rejected_points: usize,
    pub params_checked: usize,
    pub params_skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

fn objective_parts(
    m: &Mlp,
    input: &[f64],
    targets: &[usize],
    prior: Option<&DefaultPrior>,
) -> Result<(f64, f64)> {
    let data = cross_entropy_heads(&m.predict(input)?, targets);
    let first = m.first_layer();
    let p = match prior {
        Some(p) => p.loss(&first.weights, &first.bias)?,
        None => 0.0,
    };
    Ok((data, p))
}

/// Compares backprop (plus `λ ·` prior gradient) against central finite
/// differences of the total objective at `n_points` random parameter points,
/// each with a random binary input and random targets. Returns the largest
/// relative error seen.
pub fn gradient_check(cfg: &RunConfig, n_points: usize) -> Result<GradCheckReport> {
    cfg.model.validate()?;
    let prior = cfg.build_prior()?;
    let lambda = prior.as_ref().map_or(0.0, DefaultPrior::lambda);
    let mut rng = Rng::new(cfg.seed).fork(STREAM_GRADCHECK);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        points: 0,
        rejected_points: 0,
        params_checked: 0,
        params_skipped: 0,
    };

    while report.points < n_points {
        let mut mlp = Mlp::init(cfg.model, &mut rng)?;
        for t in mlp.parameters_mut() {
            t.iter_mut().for_each(|x| *x = rng.uniform(-1.0, 1.0));
        }
        let input: Vec<f64> = (0..cfg.model.input_len())
            .map(|_| rng.below(2) as f64)
            .collect();
        let targets: Vec<usize> = (0..cfg.model.heads)
            .map(|_| rng.below(2) as usize)
            .collect();

        let near_kink = mlp
            .pre_activations(&input)?
            .iter()
            .flatten()
            .any(|z| z.abs() < KINK_MARGIN);
        let near_clamp = mlp
            .predict(&input)?
            .iter()
            .zip(&targets)
            .any(|(p, &t)| p[t] < CLAMP_MARGIN);
        if near_kink || near_clamp {
            report.rejected_points += 1;
            if report.rejected_points > 100 * n_points.max(1) {
                return Err(Error::config(
                    "could not find parameter points away from kinks",
                ));
            }
            continue;
        }
        report.points += 1;

        mlp.forward(&input)?;
        let mut grads = mlp.backward(&targets)?;
        if let Some(p) = prior.as_ref() {
            let Layer { weights, bias } = mlp.first_layer();
            let g = grads.first_layer_mut();
            p.accumulate_grad(lambda, weights, bias, &mut g.weights, &mut g.bias)?;
        }
        let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(<[f64]>::to_vec).collect();
        // Prior defaults for the first layer's weights then bias.
        let defaults: Option<Vec<&[f64]>> = prior
            .as_ref()
            .map(|p| vec![p.matrix().as_slice(), p.bias()]);

        for (t, tensor_grad) in analytic.iter().enumerate() {
            for (j, &a) in tensor_grad.iter().enumerate() {
                let original = mlp.parameters()[t][j];
                let on_l1_kink = t < 2
                    && prior
                        .as_ref()
                        .is_some_and(|p| p.variant() == PriorVariant::L1)
                    && defaults
                        .as_ref()
                        .is_some_and(|d| (original - d[t][j]).abs() < KINK_MARGIN);
                if on_l1_kink {
                    report.params_skipped += 1;
                    continue;
                }
                mlp.parameters_mut()[t][j] = original + GRADCHECK_EPS;
                let (data_plus, prior_plus) =
                    objective_parts(&mlp, &input, &targets, prior.as_ref())?;
                mlp.parameters_mut()[t][j] = original - GRADCHECK_EPS;
                let (data_minus, prior_minus) =
                    objective_parts(&mlp, &input, &targets, prior.as_ref())?;
                mlp.parameters_mut()[t][j] = original;

                // Differencing each term separately keeps a large prior value
                // from swamping a small data-loss slope in rounding error.
                let numeric = (data_plus - data_minus) / (2.0 * GRADCHECK_EPS)
                    + lambda * (prior_plus - prior_minus) / (2.0 * GRADCHECK_EPS);
                report.max_rel_error = report.max_rel_error.max(relative_error(a, numeric));
                report.params_checked += 1;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_identity_dataset, split_train_test};
    use crate::Fusion;

    fn small_split(seed: u64) -> Split {
        let d = generate_identity_dataset(&mut Rng::new(seed), 3).unwrap();
        split_train_test(&mut Rng::new(seed + 1), &d).unwrap()
    }

    #[test]
    fn run_records_every_epoch_and_is_deterministic() {
        let split = small_split(0);
        let cfg = RunConfig::new(MlpConfig::new(3, 10, 1, Fusion::None, 1), 7)
            .with_prior(PriorVariant::L2, 3.0)
            .with_epochs(5);
        let (m1, r1) = train_run(&cfg, &split).unwrap();
        let (m2, r2) = train_run(&cfg, &split).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.epoch_losses, r2.epoch_losses);
        assert_eq!(r1.epoch_losses.len(), 5);
        assert!(r1.test_accuracy.iter().all(|a| (0.0..=100.0).contains(a)));
        for l in &r1.epoch_losses {
            assert_eq!(l.total, l.data + 3.0 * l.prior);
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let split = small_split(0);
        let base = RunConfig::new(MlpConfig::new(4, 10, 1, Fusion::None, 1), 0);
        assert!(train_run(&base, &split).is_err());
        let two_heads = RunConfig::new(MlpConfig::new(3, 10, 1, Fusion::None, 2), 0);
        assert!(train_run(&two_heads, &split).is_err());
        let narrow = RunConfig::new(MlpConfig::new(3, 5, 1, Fusion::None, 1), 0)
            .with_prior(PriorVariant::L1, 1.0);
        assert!(train_run(&narrow, &split).is_err());
        let no_epochs = RunConfig::new(MlpConfig::new(3, 10, 1, Fusion::None, 1), 0).with_epochs(0);
        assert!(train_run(&no_epochs, &split).is_err());
    }

    #[test]
    fn evaluate_is_pure() {
        let split = small_split(1);
        let m = Mlp::init(MlpConfig::new(3, 10, 1, Fusion::None, 1), &mut Rng::new(0)).unwrap();
        let a = evaluate(&m, &split.test).unwrap();
        assert_eq!(a, evaluate(&m, &split.test).unwrap());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, 0.0) <= 1e-6);
    }

    #[test]
    fn gradcheck_small_network() {
        let cfg = RunConfig::new(MlpConfig::new(2, 5, 2, Fusion::Mid, 2), 3)
            .with_prior(PriorVariant::L2, 3.0);
        let report = gradient_check(&cfg, 5).unwrap();
        assert_eq!(report.points, 5);
        assert!(report.max_rel_error <= 1e-4, "{report:?}");
    }
}
