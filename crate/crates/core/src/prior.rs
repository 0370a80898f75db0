//! Default comparison weights for the first layer and the L1/L2 prior that
//! pulls the trained weights toward them.
//!
//! Hidden rows `2i` and `2i + 1` compare input `i` with input `n_half + i`
//! with opposite signs, so after a ReLU exactly one of them carries
//! `|u_i - v_i|`. Remaining rows, every extra input column and all biases
//! default to zero.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorVariant {
    /// Laplacian prior: `Σ|w - d|`.
    L1,
    /// Gaussian prior: `Σ(w - d)²`.
    L2,
}

impl fmt::Display for PriorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorVariant::L1 => "l1",
            PriorVariant::L2 => "l2",
        })
    }
}

impl FromStr for PriorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(PriorVariant::L1),
            "l2" => Ok(PriorVariant::L2),
            _ => Err(Error::config(format!("unknown prior variant {s:?}"))),
        }
    }
}

/// The `hidden × 2·n_half` comparison matrix.
pub fn build_default_matrix(n_half: usize, hidden: usize) -> Result<Matrix> {
    if n_half == 0 {
        return Err(Error::config("n_half must be positive"));
    }
    if hidden < 2 * n_half {
        return Err(Error::config(format!(
            "hidden size {hidden} cannot hold {} comparison rows for n_half={n_half}",
            2 * n_half
        )));
    }
    let mut d = Matrix::zeros(hidden, 2 * n_half);
    for i in 0..n_half {
        d[(2 * i, i)] = 1.0;
        d[(2 * i, n_half + i)] = -1.0;
        d[(2 * i + 1, i)] = -1.0;
        d[(2 * i + 1, n_half + i)] = 1.0;
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DefaultPrior {
    d: Matrix,
    bias: Vec<f64>,
    variant: PriorVariant,
    lambda: f64,
}

impl DefaultPrior {
    pub fn new(n_half: usize, hidden: usize, variant: PriorVariant, lambda: f64) -> Result<Self> {
        Self::with_input_width(n_half, hidden, 2 * n_half, variant, lambda)
    }

    /// Prior for a first layer that sees `input_width ≥ 2·n_half` inputs
    /// (early fusion appends difference units). Extra columns default to 0.
    pub fn with_input_width(
        n_half: usize,
        hidden: usize,
        input_width: usize,
        variant: PriorVariant,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if input_width < 2 * n_half {
            return Err(Error::config(
                "prior input width smaller than the input vector",
            ));
        }
        let base = build_default_matrix(n_half, hidden)?;
        let mut d = Matrix::zeros(hidden, input_width);
        for r in 0..hidden {
            d.row_mut(r)[..2 * n_half].copy_from_slice(base.row(r));
        }
        Ok(DefaultPrior {
            d,
            bias: vec![0.0; hidden],
            variant,
            lambda,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.d
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn variant(&self) -> PriorVariant {
        self.variant
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check(&self, w: &Matrix, b: &[f64]) -> Result<()> {
        if w.shape() != self.d.shape() || b.len() != self.bias.len() {
            return Err(Error::config(format!(
                "prior expects weights {:?} and bias {}, got {:?} and {}",
                self.d.shape(),
                self.bias.len(),
                w.shape(),
                b.len()
            )));
        }
        Ok(())
    }

    fn deviations<'a>(&'a self, w: &'a Matrix, b: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let dw = w
            .as_slice()
            .iter()
            .zip(self.d.as_slice())
            .map(|(w, d)| w - d);
        dw.chain(b.iter().zip(&self.bias).map(|(b, p)| b - p))
    }

    /// Unscaled prior loss (λ is applied by the objective).
    pub fn loss(&self, w: &Matrix, b: &[f64]) -> Result<f64> {
        self.check(w, b)?;
        let dev = self.deviations(w, b);
        Ok(match self.variant {
            PriorVariant::L1 => dev.map(f64::abs).sum(),
            PriorVariant::L2 => dev.map(|x| x * x).sum(),
        })
    }

    /// Gradient of [`DefaultPrior::loss`]; the L1 subgradient at zero is 0.
    pub fn grad(&self, w: &Matrix, b: &[f64]) -> Result<(Matrix, Vec<f64>)> {
        let mut gw = Matrix::zeros(w.rows(), w.cols());
        let mut gb = vec![0.0; b.len()];
        self.accumulate_grad(1.0, w, b, &mut gw, &mut gb)?;
        Ok((gw, gb))
    }

    /// `gw += scale · ∂loss/∂w`, `gb += scale · ∂loss/∂b`.
    pub fn accumulate_grad(
        &self,
        scale: f64,
        w: &Matrix,
        b: &[f64],
        gw: &mut Matrix,
        gb: &mut [f64],
    ) -> Result<()> {
        self.check(w, b)?;
        self.check(gw, gb)?;
        let slope = |x: f64| match self.variant {
            PriorVariant::L1 => sign(x),
            PriorVariant::L2 => 2.0 * x,
        };
        for ((g, w), d) in gw
            .as_mut_slice()
            .iter_mut()
            .zip(w.as_slice())
            .zip(self.d.as_slice())
        {
            *g += scale * slope(w - d);
        }
        for ((g, b), p) in gb.iter_mut().zip(b).zip(&self.bias) {
            *g += scale * slope(b - p);
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
