use serde::{Deserialize, Serialize};

use super::{Alphabet, AttributeVector, EmbeddingKind, LevelSet, WordString};
use crate::error::{Error, Result};

/// Closed interval on the normalized word axis `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }
}

/// The interval `[k/n, (k+1)/n]` occupied by character `k` of an `n`-character word.
pub fn normalized_occupancy(k: usize, n: usize) -> Result<Interval> {
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let n = n as f64;
    Ok(Interval::new(k as f64 / n, (k + 1) as f64 / n))
}

/// Floating-point form of the 50% overlap rule.
///
/// Comparison tolerance is 1e-12 so that exact halves (e.g. `[1/3, 2/3]`
/// against `[0, 1/2]`) are not lost to rounding. The embeddings themselves
/// use the exact integer form, [`occupies_split`].
pub fn char_in_split(occ: &Interval, split: &Interval) -> bool {
    let overlap = occ.overlap(split);
    overlap > 0.0 && 2.0 * overlap >= occ.len() - 1e-12
}

/// Whether character `k` of an `n`-character word belongs to split `s` of a
/// level with `l` splits.
///
/// Everything is scaled by `n * l`: the occupancy `[k/n, (k+1)/n]` becomes
/// `[k*l, (k+1)*l]` and the split `[s/l, (s+1)/l]` becomes `[s*n, (s+1)*n]`,
/// so the overlap test is exact.
pub fn occupies_split(k: usize, n: usize, s: usize, l: usize) -> bool {
    let lo = (k * l).max(s * n);
    let hi = ((k + 1) * l).min((s + 1) * n);
    hi > lo && 2 * (hi - lo) >= l
}

fn pyramid_histogram(
    word: &WordString,
    alphabet: &Alphabet,
    levels: &LevelSet,
    kind: EmbeddingKind,
) -> Result<AttributeVector> {
    let codes = alphabet.encode(word)?;
    let n = codes.len();
    let a = alphabet.len();
    let mut values = vec![0.0; a * levels.total_splits()];
    let mut offset = 0;
    for &l in levels.levels() {
        for (k, &c) in codes.iter().enumerate() {
            // only splits near k/n can reach 50% overlap
            let first = (k * l) / n;
            let last = (((k + 1) * l).div_ceil(n)).min(l);
            for s in first..last {
                if occupies_split(k, n, s, l) {
                    let slot = &mut values[offset + s * a + c];
                    match kind {
                        EmbeddingKind::Phoc => *slot = 1.0,
                        _ => *slot += 1.0,
                    }
                }
            }
        }
        offset += l * a;
    }
    Ok(AttributeVector { kind, values })
}

/// Pyramidal histogram of characters.
///
/// Layout: level ascending, then split ascending, then alphabet order.
pub fn build_phoc(word: &WordString, alphabet: &Alphabet, levels: &LevelSet) -> Result<AttributeVector> {
    pyramid_histogram(word, alphabet, levels, EmbeddingKind::Phoc)
}

/// Spatial pyramid of characters: same layout as [`build_phoc`] with counts
/// instead of presence bits. A character that overlaps two adjacent splits by
/// exactly half is counted in both.
pub fn build_spoc(word: &WordString, alphabet: &Alphabet, levels: &LevelSet) -> Result<AttributeVector> {
    pyramid_histogram(word, alphabet, levels, EmbeddingKind::Spoc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels(v: &[usize]) -> LevelSet {
        LevelSet::new(v.to_vec()).unwrap()
    }

    fn word(s: &str) -> WordString {
        WordString::new(s).unwrap()
    }

    #[test]
    fn occupancy_examples() {
        assert_eq!(normalized_occupancy(0, 2).unwrap(), Interval::new(0.0, 0.5));
        let i = normalized_occupancy(1, 3).unwrap();
        assert!((i.lo - 1.0 / 3.0).abs() < 1e-15 && (i.hi - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(normalized_occupancy(4, 5).unwrap(), Interval::new(0.8, 1.0));
        assert!(matches!(
            normalized_occupancy(5, 5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn split_membership_examples() {
        let third = Interval::new(1.0 / 3.0, 2.0 / 3.0);
        assert!(char_in_split(&third, &Interval::new(0.0, 0.5)));
        assert!(char_in_split(&third, &Interval::new(0.5, 1.0)));
        assert!(!char_in_split(&Interval::new(0.0, 0.5), &Interval::new(0.5, 1.0)));
        assert!(char_in_split(&Interval::new(0.0, 0.5), &Interval::new(0.0, 0.5)));
    }

    #[test]
    fn exact_rule_agrees_with_float_rule() {
        for n in 1..=12 {
            for k in 0..n {
                let occ = normalized_occupancy(k, n).unwrap();
                for l in 1..=7 {
                    for s in 0..l {
                        let split = Interval::new(s as f64 / l as f64, (s + 1) as f64 / l as f64);
                        assert_eq!(
                            occupies_split(k, n, s, l),
                            char_in_split(&occ, &split),
                            "k={k} n={n} s={s} l={l}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn phoc_examples() {
        let ab = Alphabet::from_words(["ab"]).unwrap();
        let v = build_phoc(&word("ab"), &ab, &levels(&[1, 2])).unwrap();
        assert_eq!(v.values, vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        let v = build_phoc(&word("aa"), &ab, &levels(&[1])).unwrap();
        assert_eq!(v.values, vec![1.0, 0.0]);
    }

    #[test]
    fn middle_character_present_in_both_halves() {
        let alpha = Alphabet::from_words(["map"]).unwrap();
        let a = alpha.index_of('a').unwrap();
        let v = build_phoc(&word("map"), &alpha, &levels(&[2])).unwrap();
        assert_eq!(v.values[a], 1.0);
        assert_eq!(v.values[alpha.len() + a], 1.0);
    }

    #[test]
    fn spoc_examples() {
        let ab = Alphabet::from_words(["ab"]).unwrap();
        assert_eq!(
            build_spoc(&word("aa"), &ab, &levels(&[1])).unwrap().values,
            vec![2.0, 0.0]
        );
        assert_eq!(
            build_spoc(&word("ab"), &ab, &levels(&[1, 2])).unwrap().values,
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0]
        );
        let a = Alphabet::from_words(["a"]).unwrap();
        assert_eq!(
            build_spoc(&word("aaa"), &a, &levels(&[2])).unwrap().values,
            vec![2.0, 2.0]
        );
    }

    #[test]
    fn unknown_character_is_named() {
        let ab = Alphabet::from_words(["ab"]).unwrap();
        match build_phoc(&word("abc"), &ab, &levels(&[1])) {
            Err(Error::UnknownCharacter('c')) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
