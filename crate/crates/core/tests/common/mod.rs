#![allow(dead_code)]

use erbp::model::Layer;
use erbp::prior::build_default_matrix;
use erbp::{Fusion, Matrix, Mlp, MlpConfig};

/// Logit scale of the hand-built classifier.
const SCALE: f64 = 10.0;

/// A network that classifies the identity relation exactly: the first layer
/// is the default comparison matrix, later hidden layers carry the Hamming
/// sum in unit 0, and the head thresholds that sum at 0.5.
pub fn hamming_network(n_half: usize, hidden: usize, depth: usize) -> Mlp {
    let cfg = MlpConfig::new(n_half, hidden, depth, Fusion::None, 1);
    let mut layers = vec![Layer {
        weights: build_default_matrix(n_half, hidden).unwrap(),
        bias: vec![0.0; hidden],
    }];
    for l in 1..depth {
        let mut w = Matrix::zeros(hidden, hidden);
        if l == 1 {
            w.row_mut(0).iter_mut().for_each(|x| *x = 1.0);
        } else {
            w[(0, 0)] = 1.0;
        }
        layers.push(Layer {
            weights: w,
            bias: vec![0.0; hidden],
        });
    }
    let mut head = Layer::zeros(2, hidden);
    if depth == 1 {
        head.weights.row_mut(0).iter_mut().for_each(|x| *x = -SCALE);
    } else {
        head.weights[(0, 0)] = -SCALE;
    }
    head.bias[0] = 0.5 * SCALE;
    Mlp::from_layers(cfg, layers, vec![head]).unwrap()
}

pub fn all_binary_vectors(len: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1u64 << len).map(move |c| {
        (0..len)
            .map(|p| ((c >> (len - 1 - p)) & 1) as f64)
            .collect()
    })
}
