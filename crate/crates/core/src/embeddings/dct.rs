use rustdct::DctPlanner;
use serde::{Deserialize, Serialize};

use super::{Alphabet, AttributeVector, EmbeddingKind, WordString};
use crate::error::{Error, Result};

pub const DEFAULT_DCT_COEFFICIENTS: usize = 3;

/// Which DCT coefficients of each indicator row are kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientSelection {
    /// The lowest-frequency coefficients, in frequency order.
    #[default]
    First,
    /// The coefficients of largest magnitude, in decreasing magnitude
    /// (ties go to the lower frequency).
    Largest,
}

fn scales(m: usize) -> (f64, f64) {
    let m = m as f64;
    ((1.0 / m).sqrt(), (2.0 / m).sqrt())
}

/// Orthonormal DCT-II.
pub fn dct_row(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("dct sequence"));
    }
    let mut buf = seq.to_vec();
    DctPlanner::new().plan_dct2(buf.len()).process_dct2(&mut buf);
    let (s0, s) = scales(buf.len());
    buf[0] *= s0;
    buf[1..].iter_mut().for_each(|v| *v *= s);
    Ok(buf)
}

/// Inverse of [`dct_row`] (orthonormal DCT-III).
pub fn idct_row(coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.is_empty() {
        return Err(Error::EmptyInput("dct coefficients"));
    }
    let (s0, s) = scales(coeffs.len());
    let mut buf = coeffs.to_vec();
    // rustdct's DCT-III halves the DC term
    buf[0] *= 2.0 * s0;
    buf[1..].iter_mut().for_each(|v| *v *= s);
    DctPlanner::new().plan_dct3(buf.len()).process_dct3(&mut buf);
    Ok(buf)
}

fn select(coeffs: &[f64], count: usize, selection: CoefficientSelection) -> Vec<f64> {
    let mut out = vec![0.0; count];
    match selection {
        CoefficientSelection::First => {
            let k = count.min(coeffs.len());
            out[..k].copy_from_slice(&coeffs[..k]);
        }
        CoefficientSelection::Largest => {
            let mut order: Vec<usize> = (0..coeffs.len()).collect();
            // stable sort keeps lower frequencies first on ties
            order.sort_by(|&a, &b| coeffs[b].abs().total_cmp(&coeffs[a].abs()));
            for (slot, &i) in out.iter_mut().zip(&order) {
                *slot = coeffs[i];
            }
        }
    }
    out
}

/// Discrete cosine transform of words.
///
/// Builds the `|alphabet| x n` position indicator matrix of `word`, applies
/// [`dct_row`] to each row and keeps `coeff_count` coefficients per row.
/// Words shorter than `coeff_count` are zero-padded.
pub fn build_dctow(
    word: &WordString,
    alphabet: &Alphabet,
    coeff_count: usize,
    selection: CoefficientSelection,
) -> Result<AttributeVector> {
    if coeff_count == 0 {
        return Err(Error::InvalidParameter("coefficient count must be >= 1".into()));
    }
    let codes = alphabet.encode(word)?;
    let n = codes.len();
    let mut planner = DctPlanner::new();
    let dct = planner.plan_dct2(n);
    let (s0, s) = scales(n);
    let mut values = Vec::with_capacity(alphabet.len() * coeff_count);
    let mut row = vec![0.0; n];
    for symbol in 0..alphabet.len() {
        if !codes.contains(&symbol) {
            values.extend(std::iter::repeat_n(0.0, coeff_count));
            continue;
        }
        for (r, &c) in row.iter_mut().zip(&codes) {
            *r = if c == symbol { 1.0 } else { 0.0 };
        }
        dct.process_dct2(&mut row);
        row[0] *= s0;
        row[1..].iter_mut().for_each(|v| *v *= s);
        values.extend(select(&row, coeff_count, selection));
    }
    Ok(AttributeVector {
        kind: EmbeddingKind::Dctow,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_and_constants() {
        assert_eq!(dct_row(&[0.0; 5]).unwrap(), vec![0.0; 5]);
        let c = dct_row(&[2.0; 4]).unwrap();
        assert!((c[0] - 4.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
        assert!(dct_row(&[]).is_err());
        assert!(idct_row(&[]).is_err());
    }

    #[test]
    fn single_letter_is_padded() {
        let a = Alphabet::from_words(["a"]).unwrap();
        let w = WordString::new("a").unwrap();
        let v = build_dctow(&w, &a, 3, CoefficientSelection::First).unwrap();
        assert_eq!(v.values, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn absent_character_gives_zero_row() {
        let a = Alphabet::from_words(["abc"]).unwrap();
        let w = WordString::new("ab").unwrap();
        let v = build_dctow(&w, &a, 3, CoefficientSelection::First).unwrap();
        assert_eq!(&v.values[6..], &[0.0, 0.0, 0.0]);
        assert_eq!(v.dim(), 9);
    }

    #[test]
    fn largest_mode_orders_by_magnitude() {
        assert_eq!(
            select(&[0.1, -0.9, 0.5, 0.9], 3, CoefficientSelection::Largest),
            vec![-0.9, 0.9, 0.5]
        );
        assert_eq!(
            select(&[0.1, -0.9], 3, CoefficientSelection::Largest),
            vec![-0.9, 0.1, 0.0]
        );
    }
}
