//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearProbeParams {
    pub learning_rate: f64,
    pub iterations: usize,
    /// L2 penalty `l2/2 * ||W||^2` on the weights; the bias is not penalized.
    pub l2: f64,
}

impl Default for LinearProbeParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

/// Softmax classifier. Parameters are stored flat: the `classes x dim`
/// weight matrix row-major, followed by `classes` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRegression {
    classes: usize,
    dim: usize,
    params: Vec<f64>,
}

impl SoftmaxRegression {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            params: vec![0.0; classes * dim + classes],
        }
    }

    pub fn from_params(classes: usize, dim: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != classes * dim + classes {
            return Err(Error::InvalidArgument(format!(
                "{} parameters for {classes} classes of dim {dim}",
                params.len()
            )));
        }
        Ok(Self { classes, dim, params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let (w, b) = self.params.split_at(self.classes * self.dim);
        w.chunks_exact(self.dim)
            .zip(b)
            .map(|(row, bias)| row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + bias)
            .collect()
    }

    /// Argmax logit, lowest class on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = c;
            }
        }
        best
    }

    /// Mean cross-entropy plus the L2 penalty, and its gradient with respect
    /// to [`params`](Self::params). `xs` is row-major `n x dim`.
    pub fn loss_and_gradient(&self, xs: &[f64], ys: &[usize], l2: f64) -> (f64, Vec<f64>) {
        let (c, d) = (self.classes, self.dim);
        let n = ys.len();
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, &y) in xs.chunks_exact(d).zip(ys) {
            let z = self.logits(x);
            let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let sum: f64 = exps.iter().sum();
            loss += sum.ln() + zmax - z[y];
            for k in 0..c {
                let delta = exps[k] / sum - if k == y { 1.0 } else { 0.0 };
                let gw = &mut grad[k * d..(k + 1) * d];
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g += delta * xi;
                }
                grad[c * d + k] += delta;
            }
        }
        let inv_n = 1.0 / n as f64;
        loss *= inv_n;
        for g in grad.iter_mut() {
            *g *= inv_n;
        }
        let w = &self.params[..c * d];
        loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
        for (g, v) in grad[..c * d].iter_mut().zip(w) {
            *g += l2 * v;
        }
        (loss, grad)
    }

    /// Zero-initialized full-batch gradient descent.
    pub fn fit(
        xs: &[f64],
        ys: &[usize],
        classes: usize,
        dim: usize,
        params: &LinearProbeParams,
    ) -> Result<Self> {
        if xs.len() != ys.len() * dim {
            return Err(Error::Validation(format!(
                "{} feature values for {} labels of dim {dim}",
                xs.len(),
                ys.len()
            )));
        }
        if ys.is_empty() {
            return Err(Error::Validation("no training examples".into()));
        }
        if let Some(&bad) = ys.iter().find(|&&y| y >= classes) {
            return Err(Error::Validation(format!("label {bad} outside {classes} classes")));
        }
        let mut model = Self::zeros(classes, dim);
        for iteration in 0..params.iterations {
            let (loss, grad) = model.loss_and_gradient(xs, ys, params.l2);
            if !loss.is_finite() {
                let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                let wnorm = model.params.iter().map(|g| g * g).sum::<f64>().sqrt();
                return Err(Error::Numeric(format!(
                    "linear probe loss became {loss} at iteration {iteration} \
                     (|grad| = {gnorm:e}, |params| = {wnorm:e}, lr = {})",
                    params.learning_rate
                )));
            }
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= params.learning_rate * g;
            }
        }
        Ok(model)
    }
}
