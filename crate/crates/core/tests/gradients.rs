//! Backpropagation against central finite differences, over every
//! architecture the model supports.

use erbp::prior::DefaultPrior;
use erbp::trainer::{gradient_check, RunConfig};
use erbp::{Fusion, Matrix, MlpConfig, PriorVariant, Rng};

const TOLERANCE: f64 = 1e-4;

#[test]
fn every_architecture_passes_gradient_check() {
    let mut worst: f64 = 0.0;
    for fusion in [Fusion::None, Fusion::Early, Fusion::Mid] {
        for depth in 1..=5 {
            for heads in 1..=2 {
                for variant in [PriorVariant::L1, PriorVariant::L2] {
                    for lambda in [0.0, 3.0] {
                        let model = MlpConfig::new(2, 5, depth, fusion, heads);
                        let seed = (depth * 10 + heads) as u64;
                        let cfg = RunConfig::new(model, seed).with_prior(variant, lambda);
                        let report = gradient_check(&cfg, 20).unwrap();
                        assert_eq!(report.points, 20);
                        assert!(
                            report.max_rel_error <= TOLERANCE,
                            "{fusion} depth={depth} heads={heads} {variant} λ={lambda}: {report:?}"
                        );
                        worst = worst.max(report.max_rel_error);
                    }
                }
            }
        }
    }
    eprintln!("worst relative error {worst:.3e}");
}

#[test]
fn l1_prior_gradient_matches_finite_differences_off_kinks() {
    let prior = DefaultPrior::new(3, 8, PriorVariant::L1, 1.0).unwrap();
    let mut rng = Rng::new(21);
    let w = Matrix::from_vec(8, 6, (0..48).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
    let b: Vec<f64> = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let (gw, _) = prior.grad(&w, &b).unwrap();
    for k in 0..48 {
        if (w.as_slice()[k] - prior.matrix().as_slice()[k]).abs() <= 1e-3 {
            continue;
        }
        let eps = 1e-5;
        let mut hi = w.clone();
        let mut lo = w.clone();
        hi.as_mut_slice()[k] += eps;
        lo.as_mut_slice()[k] -= eps;
        let numeric = (prior.loss(&hi, &b).unwrap() - prior.loss(&lo, &b).unwrap()) / (2.0 * eps);
        assert!((gw.as_slice()[k] - numeric).abs() <= 1e-6, "entry {k}");
    }
}

#[test]
fn total_gradient_is_data_plus_scaled_prior() {
    // The check covers the composite objective: the same point with λ=0 and
    // λ=3 must both agree with finite differences.
    let model = MlpConfig::new(3, 8, 2, Fusion::Mid, 1);
    for lambda in [0.0, 3.0] {
        let cfg = RunConfig::new(model, 4).with_prior(PriorVariant::L2, lambda);
        assert!(gradient_check(&cfg, 20).unwrap().max_rel_error <= TOLERANCE);
    }
}
