//! ReLU multilayer perceptron with optional difference-unit fusion.
//!
//! A difference (DR) unit computes `|u_i - v_i|` for a pair of corresponding
//! inputs. Its wiring is fixed: with early fusion the `n_half` DR outputs are
//! appended to the input vector, with mid fusion they are appended to the
//! first hidden layer's activations before the next layer. Each output head
//! is a 2-way softmax.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::linalg::{relu, relu_grad, softmax};
use crate::{Error, Matrix, Result, Rng};

pub const MAX_DEPTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fusion {
    None,
    Early,
    Mid,
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::None => "none",
            Fusion::Early => "early",
            Fusion::Mid => "mid",
        })
    }
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Fusion::None),
            "early" => Ok(Fusion::Early),
            "mid" => Ok(Fusion::Mid),
            _ => Err(Error::config(format!("unknown fusion {s:?}"))),
        }
    }
}

/// Parameter initialisation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Init {
    /// Weights uniform in `±√(6/(fan_in + fan_out))`, zero biases.
    #[default]
    Glorot,
    /// Weights and biases uniform in `±1/√fan_in` (the usual PyTorch
    /// `Linear` default).
    FanIn,
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::FanIn => "fan_in",
            Init::Glorot => "glorot",
        })
    }
}

impl FromStr for Init {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fan_in" => Ok(Init::FanIn),
            "glorot" => Ok(Init::Glorot),
            _ => Err(Error::config(format!("unknown init {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MlpConfig {
    pub n_half: usize,
    /// Units per hidden layer.
    pub hidden: usize,
    /// Number of hidden layers.
    pub depth: usize,
    pub fusion: Fusion,
    /// 1 for identity only, 2 for identity plus pattern.
    pub heads: usize,
    pub init: Init,
}

impl MlpConfig {
    pub fn new(n_half: usize, hidden: usize, depth: usize, fusion: Fusion, heads: usize) -> Self {
        MlpConfig {
            n_half,
            hidden,
            depth,
            fusion,
            heads,
            init: Init::default(),
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_half == 0 || self.hidden == 0 {
            return Err(Error::config("n_half and hidden must be positive"));
        }
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return Err(Error::config(format!(
                "depth must be in 1..={MAX_DEPTH}, got {}",
                self.depth
            )));
        }
        if !(1..=2).contains(&self.heads) {
            return Err(Error::config(format!(
                "heads must be 1 or 2, got {}",
                self.heads
            )));
        }
        Ok(())
    }

    /// Length of the raw input vector.
    pub fn input_len(&self) -> usize {
        2 * self.n_half
    }

    /// Input width of hidden layer `layer` (or of the heads when
    /// `layer == depth`).
    pub fn layer_input_width(&self, layer: usize) -> usize {
        match (layer, self.fusion) {
            (0, Fusion::Early) => 3 * self.n_half,
            (0, _) => 2 * self.n_half,
            (1, Fusion::Mid) => self.hidden + self.n_half,
            _ => self.hidden,
        }
    }
}

/// One dense layer, weights shaped `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Layer {
            weights: Matrix::zeros(out, inp),
            bias: vec![0.0; out],
        }
    }

    fn init(out: usize, inp: usize, init: Init, rng: &mut Rng) -> Self {
        let mut layer = Layer::zeros(out, inp);
        match init {
            Init::Glorot => {
                let limit = (6.0 / (inp + out) as f64).sqrt();
                for w in layer.weights.as_mut_slice() {
                    *w = rng.uniform(-limit, limit);
                }
            }
            Init::FanIn => {
                let limit = 1.0 / (inp as f64).sqrt();
                for w in layer
                    .weights
                    .as_mut_slice()
                    .iter_mut()
                    .chain(&mut layer.bias)
                {
                    *w = rng.uniform(-limit, limit);
                }
            }
        }
        layer
    }
}

/// Activations recorded by [`Mlp::forward`] for the following backward pass.
#[derive(Debug, Clone)]
struct Trace {
    /// `u_i - v_i` for each compared pair.
    dr_args: Vec<f64>,
    /// Input to each hidden layer and, last, to the heads.
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<Layer>,
    pub heads: Vec<Layer>,
    /// Gradient with respect to the raw input vector, including the path
    /// through the DR units.
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(m: &Mlp) -> Self {
        let shape = |l: &Layer| Layer::zeros(l.weights.rows(), l.weights.cols());
        Gradients {
            hidden: m.hidden.iter().map(shape).collect(),
            heads: m.heads.iter().map(shape).collect(),
            input: vec![0.0; m.config.input_len()],
        }
    }

    /// Parameter gradients in [`Mlp::parameters`] order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.hidden
            .iter()
            .chain(&self.heads)
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn first_layer_mut(&mut self) -> &mut Layer {
        &mut self.hidden[0]
    }
}

#[derive(Debug, Clone)]
pub struct Mlp {
    config: MlpConfig,
    hidden: Vec<Layer>,
    heads: Vec<Layer>,
    trace: Option<Trace>,
}

impl PartialEq for Mlp {
    /// Compares configuration and parameters; forward caches are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.hidden == other.hidden && self.heads == other.heads
    }
}

impl Mlp {
    /// Random parameters drawn according to `config.init`.
    pub fn init(config: MlpConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let hidden = (0..config.depth)
            .map(|l| Layer::init(config.hidden, config.layer_input_width(l), config.init, rng))
            .collect();
        let head_in = config.layer_input_width(config.depth);
        let heads = (0..config.heads)
            .map(|_| Layer::init(2, head_in, config.init, rng))
            .collect();
        Ok(Mlp {
            config,
            hidden,
            heads,
            trace: None,
        })
    }

    /// Assembles a network from explicit layers, checking every shape.
    pub fn from_layers(config: MlpConfig, hidden: Vec<Layer>, heads: Vec<Layer>) -> Result<Self> {
        config.validate()?;
        if hidden.len() != config.depth || heads.len() != config.heads {
            return Err(Error::config(
                "layer count does not match the configuration",
            ));
        }
        for (l, layer) in hidden.iter().enumerate() {
            check_layer(
                layer,
                config.hidden,
                config.layer_input_width(l),
                &format!("hidden{l}"),
            )?;
        }
        for (k, layer) in heads.iter().enumerate() {
            check_layer(
                layer,
                2,
                config.layer_input_width(config.depth),
                &format!("head{k}"),
            )?;
        }
        Ok(Mlp {
            config,
            hidden,
            heads,
            trace: None,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.hidden
    }

    pub fn heads(&self) -> &[Layer] {
        &self.heads
    }

    pub fn first_layer(&self) -> &Layer {
        &self.hidden[0]
    }

    /// All trainable tensors: each hidden layer's weights then bias, then
    /// each head's.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.hidden
            .iter()
            .chain(&self.heads)
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    /// Mutable view of [`Mlp::parameters`]. Invalidates the forward cache.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.trace = None;
        self.hidden
            .iter_mut()
            .chain(&mut self.heads)
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    fn run(&self, input: &[f64]) -> Result<Trace> {
        let n = self.config.n_half;
        if input.len() != 2 * n {
            return Err(Error::config(format!(
                "input length {} does not match 2 * n_half = {}",
                input.len(),
                2 * n
            )));
        }
        let dr_args: Vec<f64> = (0..n).map(|i| input[i] - input[n + i]).collect();
        let dr = || dr_args.iter().map(|d| d.abs());

        let first_input = match self.config.fusion {
            Fusion::Early => input.iter().copied().chain(dr()).collect(),
            _ => input.to_vec(),
        };
        let mut layer_inputs = vec![first_input];
        let mut pre = Vec::with_capacity(self.hidden.len());
        for (l, layer) in self.hidden.iter().enumerate() {
            let z = layer
                .weights
                .affine(layer_inputs.last().unwrap(), &layer.bias)?;
            let mut h = relu(&z);
            if l == 0 && self.config.fusion == Fusion::Mid {
                h.extend(dr());
            }
            pre.push(z);
            layer_inputs.push(h);
        }
        let top = layer_inputs.last().unwrap();
        let probs = self
            .heads
            .iter()
            .map(|head| head.weights.affine(top, &head.bias).map(|z| softmax(&z)))
            .collect::<Result<_>>()?;
        Ok(Trace {
            dr_args,
            layer_inputs,
            pre,
            probs,
        })
    }

    /// Class probabilities per head, caching activations for [`Mlp::backward`].
    pub fn forward(&mut self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        let trace = self.run(input)?;
        let probs = trace.probs.clone();
        self.trace = Some(trace);
        Ok(probs)
    }

    /// Class probabilities per head without touching the cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.run(input)?.probs)
    }

    /// Argmax class per head; an exact tie resolves to class 0.
    pub fn classify(&self, input: &[f64]) -> Result<Vec<usize>> {
        Ok(self.predict(input)?.iter().map(|p| argmax2(p)).collect())
    }

    /// Pre-activations of every hidden layer.
    pub fn pre_activations(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.run(input)?.pre)
    }

    /// Hidden activations (post-ReLU, without appended DR outputs) of every
    /// hidden layer.
    pub fn hidden_activations(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .pre_activations(input)?
            .iter()
            .map(|z| relu(z))
            .collect())
    }

    /// Gradient of the summed cross-entropy of all heads against `targets`
    /// (one class index per head) at the last forwarded input. Consumes the
    /// forward cache.
    pub fn backward(&mut self, targets: &[usize]) -> Result<Gradients> {
        let trace = self
            .trace
            .take()
            .ok_or_else(|| Error::Usage("backward called without a fresh forward pass".into()))?;
        if targets.len() != self.heads.len() || targets.iter().any(|&t| t > 1) {
            return Err(Error::config(format!(
                "expected {} target class indices in 0..2, got {targets:?}",
                self.heads.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let n = self.config.n_half;
        let depth = self.hidden.len();

        let top = &trace.layer_inputs[depth];
        let mut delta = vec![0.0; top.len()];
        for (k, head) in self.heads.iter().enumerate() {
            let mut dz = trace.probs[k].clone();
            dz[targets[k]] -= 1.0;
            grads.heads[k].weights.add_outer(1.0, &dz, top);
            grads.heads[k].bias.copy_from_slice(&dz);
            for (d, g) in delta.iter_mut().zip(head.weights.transpose_mul(&dz)) {
                *d += g;
            }
        }

        // Gradient reaching the DR outputs, wherever they were attached.
        let mut dr_delta = vec![0.0; n];
        for l in (0..depth).rev() {
            if l == 0 && self.config.fusion == Fusion::Mid {
                dr_delta.copy_from_slice(&delta[self.config.hidden..]);
                delta.truncate(self.config.hidden);
            }
            let dz: Vec<f64> = delta
                .iter()
                .zip(relu_grad(&trace.pre[l]))
                .map(|(d, g)| d * g)
                .collect();
            grads.hidden[l]
                .weights
                .add_outer(1.0, &dz, &trace.layer_inputs[l]);
            grads.hidden[l].bias.copy_from_slice(&dz);
            delta = self.hidden[l].weights.transpose_mul(&dz);
        }
        if self.config.fusion == Fusion::Early {
            dr_delta.copy_from_slice(&delta[2 * n..]);
            delta.truncate(2 * n);
        }
        for (i, (&dd, &arg)) in dr_delta.iter().zip(&trace.dr_args).enumerate() {
            let s = dr_slope(arg);
            delta[i] += dd * s;
            delta[n + i] -= dd * s;
        }
        grads.input = delta;
        Ok(grads)
    }

    pub fn to_checkpoint(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "erbp-checkpoint n_half={} hidden={} depth={} fusion={} heads={} init={}\n",
            c.n_half, c.hidden, c.depth, c.fusion, c.heads, c.init
        );
        let named = self
            .hidden
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("hidden{i}"), l))
            .chain(
                self.heads
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (format!("head{i}"), l)),
            );
        for (name, layer) in named {
            let (rows, cols) = layer.weights.shape();
            let _ = writeln!(out, "weights {name} {rows} {cols}");
            for r in 0..rows {
                let _ = writeln!(out, "{}", format_row(layer.weights.row(r)));
            }
            let _ = writeln!(out, "bias {name} {rows}");
            let _ = writeln!(out, "{}", format_row(&layer.bias));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, msg: &str| Error::config(format!("checkpoint line {line}: {msg}"));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty checkpoint"))?;
        let config = parse_checkpoint_header(header).map_err(|m| bad(1, &m))?;
        config.validate()?;

        let mut read_layer = |rows: usize, cols: usize| -> Result<Layer> {
            let mut layer = Layer::zeros(rows, cols);
            let (ln, tag) = lines.next().ok_or_else(|| bad(0, "truncated"))?;
            let dims: Vec<&str> = tag.split_whitespace().collect();
            let expected = [rows.to_string(), cols.to_string()];
            if dims.len() != 4 || dims[0] != "weights" || dims[2..] != expected[..] {
                return Err(bad(ln, &format!("expected weights block {rows}x{cols}")));
            }
            for r in 0..rows {
                let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated"))?;
                let vals = parse_row(line, cols).map_err(|m| bad(ln, &m))?;
                layer.weights.row_mut(r).copy_from_slice(&vals);
            }
            let (ln, tag) = lines.next().ok_or_else(|| bad(0, "truncated"))?;
            if !tag.starts_with("bias ") {
                return Err(bad(ln, "expected bias block"));
            }
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated"))?;
            layer.bias = parse_row(line, rows).map_err(|m| bad(ln, &m))?;
            Ok(layer)
        };
        let hidden = (0..config.depth)
            .map(|l| read_layer(config.hidden, config.layer_input_width(l)))
            .collect::<Result<Vec<_>>>()?;
        let heads = (0..config.heads)
            .map(|_| read_layer(2, config.layer_input_width(config.depth)))
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(config, hidden, heads)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Mlp::from_checkpoint(&text)
    }
}

fn check_layer(layer: &Layer, rows: usize, cols: usize, name: &str) -> Result<()> {
    if layer.weights.shape() != (rows, cols) || layer.bias.len() != rows {
        return Err(Error::config(format!(
            "{name}: expected {rows}x{cols} weights and {rows} biases, got {:?} and {}",
            layer.weights.shape(),
            layer.bias.len()
        )));
    }
    Ok(())
}

/// `|x - y|`, the difference-unit activation.
pub fn dr_activation(x: f64, y: f64) -> f64 {
    (x - y).abs()
}

/// `d|a|/da`, taken as 0 at `a = 0`.
fn dr_slope(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Index of the larger of two probabilities; ties go to 0.
pub fn argmax2(p: &[f64]) -> usize {
    if p[1] > p[0] {
        1
    } else {
        0
    }
}

fn format_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_row(line: &str, expected: usize) -> std::result::Result<Vec<f64>, String> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if vals.len() != expected {
        return Err(format!("expected {expected} values, got {}", vals.len()));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("non-finite parameter".into());
    }
    Ok(vals)
}

fn parse_checkpoint_header(line: &str) -> std::result::Result<MlpConfig, String> {
    let mut fields = line.split_whitespace();
    if fields.next() != Some("erbp-checkpoint") {
        return Err("missing erbp-checkpoint magic".into());
    }
    let mut cfg = MlpConfig::new(0, 0, 0, Fusion::None, 0);
    for field in fields {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| format!("malformed field {field:?}"))?;
        let num = || v.parse::<usize>().map_err(|e| format!("{k}: {e}"));
        match k {
            "n_half" => cfg.n_half = num()?,
            "hidden" => cfg.hidden = num()?,
            "depth" => cfg.depth = num()?,
            "heads" => cfg.heads = num()?,
            "fusion" => cfg.fusion = v.parse().map_err(|e: Error| e.to_string())?,
            "init" => cfg.init = v.parse().map_err(|e: Error| e.to_string())?,
            _ => return Err(format!("unknown field {k:?}")),
        }
    }
    Ok(cfg)
}
