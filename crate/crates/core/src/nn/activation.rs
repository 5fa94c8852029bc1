//! Scalar and vector activations, shared by network layers and losses.

use crate::error::{Error, Result};

/// Norms below this are treated as degenerate by [`normalize`].
pub const NORM_EPSILON: f64 = 1e-12;

/// Logistic sigmoid, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Softmax with max subtraction.
pub fn softmax(o: &[f64]) -> Result<Vec<f64>> {
    let max = o
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::EmptyInput("softmax input"))?;
    let mut out: Vec<f64> = o.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(out)
}

/// Backward of softmax given its output `y` and upstream gradient `g`.
pub fn softmax_backward(y: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    y.iter().zip(g).map(|(yi, gi)| yi * (gi - dot)).collect()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `o / ||o||`, together with `||o||`.
pub fn normalize(o: &[f64]) -> Result<(Vec<f64>, f64)> {
    let norm = l2_norm(o);
    if norm.is_nan() || norm <= NORM_EPSILON {
        return Err(Error::DegenerateOutput(NORM_EPSILON));
    }
    Ok((o.iter().map(|v| v / norm).collect(), norm))
}

/// Backward of [`normalize`]: `(I/||o|| - o o^T/||o||^3) g`, written in terms
/// of the normalized output `y` as `(g - y (y.g)) / ||o||`.
pub fn normalize_backward(y: &[f64], norm: f64, g: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    y.iter()
        .zip(g)
        .map(|(yi, gi)| (gi - yi * dot) / norm)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        for x in [-30.0, -2.5, -0.1, 0.7, 4.0, 40.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert!(sigmoid(-1000.0).is_finite() && sigmoid(1000.0) == 1.0);
    }

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for x in [-20.0, -1.0, 0.0, 0.5, 15.0] {
            assert!((softplus(x) - (1.0 + f64::exp(x)).ln()).abs() < 1e-12);
        }
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn softmax_properties() {
        let u = softmax(&[0.3; 4]).unwrap();
        assert!(u.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let a = softmax(&[1.0, 2.0, -0.5]).unwrap();
        let b = softmax(&[11.0, 12.0, 9.5]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        let big = softmax(&[1000.0, -1000.0, 999.0]).unwrap();
        assert!(big.iter().all(|v| v.is_finite()));
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let (y, n) = normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(n, 5.0);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        let (y, _) = normalize(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.0, 1.0, 0.0]);
        assert!(matches!(normalize(&[0.0, 1e-13]), Err(Error::DegenerateOutput(_))));
    }
}
