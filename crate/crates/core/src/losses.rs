//! Training losses over a batch of attribute predictions.
//!
//! Each loss takes the network output for a batch as a flat row-major
//! `(batch, d)` array and returns the summed loss together with its gradient
//! with respect to that output.
//!
//! * [`bce_loss`]: binary cross entropy on pre-sigmoid outputs. The sigmoid
//!   is fused into the loss, so the gradient is simply `sigmoid(o) - y`.
//! * [`cosine_loss`]: `1 - cos(y, o)` per sample on pre-normalization
//!   outputs. Labels are normalized internally; the loss is invariant to the
//!   scale of `o`.
//! * [`euclidean_loss`]: `0.5 * ||y - y_hat||^2` per sample.
//!
//! For unit-length labels and outputs the Euclidean and cosine losses agree:
//! `0.5 * ||y - y_hat||^2 = 0.5 * (2 - 2 y.y_hat) = 1 - cos(y, y_hat)`.
//!
//! ```
//! use wordspot::losses::{bce_loss, cosine_loss};
//!
//! let bce = bce_loss(&[0.0; 8], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0], 1).unwrap();
//! assert!((bce.loss - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
//!
//! let cos = cosine_loss(&[1.0, 0.0], &[1.0, 1.0], 1).unwrap();
//! assert!((cos.loss - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::{l2_norm, normalize, normalize_backward, sigmoid, softplus};

/// Summed loss over a batch and its gradient w.r.t. the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Cosine,
    Euclidean,
}

impl LossKind {
    pub fn compute(self, outputs: &[f64], labels: &[f64], batch: usize) -> Result<LossValue> {
        match self {
            LossKind::Bce => bce_loss(outputs, labels, batch),
            LossKind::Cosine => cosine_loss(outputs, labels, batch),
            LossKind::Euclidean => euclidean_loss(outputs, labels, batch),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Bce => "bce",
            LossKind::Cosine => "cosine",
            LossKind::Euclidean => "euclidean",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "cosine" => Ok(LossKind::Cosine),
            "euclidean" => Ok(LossKind::Euclidean),
            _ => Err(Error::Config(format!("unknown loss {s:?}"))),
        }
    }
}

fn check_shapes(outputs: &[f64], labels: &[f64], batch: usize) -> Result<usize> {
    if outputs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} outputs vs {} labels",
            outputs.len(),
            labels.len()
        )));
    }
    if batch == 0 || !outputs.len().is_multiple_of(batch) {
        return Err(Error::shape(format!(
            "{} values do not split into {batch} samples",
            outputs.len()
        )));
    }
    Ok(outputs.len() / batch)
}

/// Binary cross entropy on pre-activations `o` against binary labels `y`.
///
/// Evaluated as `softplus(o) - y*o`, which equals
/// `-[y log sigmoid(o) + (1-y) log(1 - sigmoid(o))]` without saturating.
pub fn bce_loss(outputs: &[f64], labels: &[f64], batch: usize) -> Result<LossValue> {
    check_shapes(outputs, labels, batch)?;
    if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidParameter(format!(
            "binary cross entropy needs 0/1 labels, found {bad}"
        )));
    }
    let mut loss = 0.0;
    let grad = outputs
        .iter()
        .zip(labels)
        .map(|(&o, &y)| {
            loss += softplus(o) - y * o;
            sigmoid(o) - y
        })
        .collect();
    Ok(LossValue { loss, grad })
}

/// `o / ||o||`; errors when the norm is below `1e-12`.
pub fn normalize_output(o: &[f64]) -> Result<Vec<f64>> {
    normalize(o).map(|(y, _)| y)
}

/// `sum_i 1 - cos(y_i, o_i)` over the batch.
pub fn cosine_loss(outputs: &[f64], labels: &[f64], batch: usize) -> Result<LossValue> {
    let d = check_shapes(outputs, labels, batch)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(outputs.len());
    for (o, y) in outputs.chunks_exact(d).zip(labels.chunks_exact(d)) {
        let y_norm = l2_norm(y);
        if y_norm == 0.0 {
            return Err(Error::ZeroNormLabel);
        }
        let (o_hat, o_norm) = normalize(o)?;
        let y_hat: Vec<f64> = y.iter().map(|v| v / y_norm).collect();
        let cos: f64 = o_hat.iter().zip(&y_hat).map(|(a, b)| a * b).sum();
        loss += 1.0 - cos;
        // d(-cos)/do = -(I - o_hat o_hat^T) y_hat / ||o||
        let neg: Vec<f64> = y_hat.iter().map(|v| -v).collect();
        grad.extend(normalize_backward(&o_hat, o_norm, &neg));
    }
    Ok(LossValue { loss, grad })
}

/// `0.5 * sum_i ||y_i - y_hat_i||^2`.
pub fn euclidean_loss(outputs: &[f64], labels: &[f64], batch: usize) -> Result<LossValue> {
    check_shapes(outputs, labels, batch)?;
    let mut loss = 0.0;
    let grad = outputs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            loss += 0.5 * (p - y) * (p - y);
            p - y
        })
        .collect();
    Ok(LossValue { loss, grad })
}
