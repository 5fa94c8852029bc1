//! Nearest-neighbour retrieval in attribute space and its evaluation.
//!
//! Items are ranked by cosine distance to the query. Each ranking is scored
//! with average precision,
//!
//! `AP = sum_i P(i) r(i) / R`,
//!
//! where `r(i)` is 1 if the item at rank `i` is relevant, `P(i)` is the
//! precision of the first `i` results and `R` the number of relevant items.
//! Protocols average AP over queries into mAP; [`permutation_test`] decides
//! whether two methods differ significantly.
//!
//! ```
//! use wordspot::retrieval::average_precision;
//!
//! let ap = average_precision(&[true, false, true], 2).unwrap();
//! assert!((ap - 5.0 / 6.0).abs() < 1e-15);
//! ```

mod protocol;
mod report;
mod significance;

pub use protocol::{
    run_competition_protocol, run_qbe_almazan, run_qbs_almazan, QueryMode, PROTOCOL_COMPETITION_QBE,
    PROTOCOL_COMPETITION_QBS, PROTOCOL_QBE_ALMAZAN, PROTOCOL_QBS_ALMAZAN,
};
pub use report::{APReport, QueryAp};
pub use significance::{
    compare_reports, permutation_test, permutations_needed, standard_error, PermutationOptions,
    PermutationScheme, Sidedness, SignificanceResult,
};

use std::collections::HashSet;

use crate::embeddings::fold_case;
use crate::error::{Error, Result};

/// `1 - a.b / (|a| |b|)`, in `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{} vs {} dimensions", a.len(), b.len())));
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let (saa, sbb) = (sq(a), sq(b));
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (saa * sbb).sqrt()).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryItem {
    pub id: String,
    /// Case-folded class label.
    pub label: String,
    pub vector: Vec<f64>,
}

/// Retrieval database with unique ids and vectors of one dimensionality.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gallery {
    items: Vec<GalleryItem>,
    ids: HashSet<String>,
}

impl Gallery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: impl Into<String>, label: &str, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if let Some(first) = self.items.first() {
            if first.vector.len() != vector.len() {
                return Err(Error::shape(format!(
                    "item {id:?} has {} dimensions, gallery has {}",
                    vector.len(),
                    first.vector.len()
                )));
            }
        }
        if !self.ids.insert(id.clone()) {
            return Err(Error::InvalidParameter(format!("duplicate gallery id {id:?}")));
        }
        self.items.push(GalleryItem {
            id,
            label: fold_case(label),
            vector,
        });
        Ok(())
    }

    pub fn items(&self) -> &[GalleryItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.items.first().map(|i| i.vector.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedItem {
    /// Position of the item in the gallery.
    pub index: usize,
    pub id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query: String,
    pub items: Vec<RankedItem>,
}

/// Sorts the gallery by ascending cosine distance to `query`. Ties keep
/// gallery order; the item whose id equals `exclude` is left out.
pub fn rank(query_id: &str, query: &[f64], gallery: &Gallery, exclude: Option<&str>) -> Result<RankedList> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut items = Vec::with_capacity(gallery.len());
    for (index, item) in gallery.items.iter().enumerate() {
        if exclude == Some(item.id.as_str()) {
            continue;
        }
        items.push(RankedItem {
            index,
            id: item.id.clone(),
            distance: cosine_distance(query, &item.vector)?,
        });
    }
    items.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(RankedList {
        query: query_id.to_string(),
        items,
    })
}

/// Average precision of a ranking given as relevance flags, with
/// `n_relevant` relevant items in total.
pub fn average_precision(relevance: &[bool], n_relevant: usize) -> Result<f64> {
    if n_relevant == 0 {
        return Err(Error::NoRelevant("average precision needs at least one relevant item".into()));
    }
    let hits = relevance.iter().filter(|&&r| r).count();
    if hits > n_relevant {
        return Err(Error::InvalidParameter(format!(
            "{hits} relevant items retrieved but only {n_relevant} exist"
        )));
    }
    // Summing the precisions as a fraction rounds only once at the end;
    // long rankings whose denominators overflow fall back to floating point.
    let exact = (|| {
        let (mut num, mut den, mut k) = (0u128, 1u128, 0u128);
        for (i, &r) in relevance.iter().enumerate() {
            if r {
                k += 1;
                let d = (i + 1) as u128;
                num = num.checked_mul(d)?.checked_add(k.checked_mul(den)?)?;
                den = den.checked_mul(d)?;
                let g = gcd(num, den);
                num /= g;
                den /= g;
            }
        }
        Some(num as f64 / (den.checked_mul(n_relevant as u128)?) as f64)
    })();
    Ok(exact.unwrap_or_else(|| {
        let mut k = 0usize;
        let sum: f64 = relevance
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| {
                k += 1;
                k as f64 / (i + 1) as f64
            })
            .sum();
        sum / n_relevant as f64
    }))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}
