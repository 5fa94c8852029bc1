//! String embeddings into attribute space.
//!
//! Three embeddings are provided, all built against a data-set specific
//! [`Alphabet`]:
//!
//! * **PHOC**: binary presence of each character in each split of a pyramid
//!   of horizontal word partitions.
//! * **SPOC**: the same pyramid, but each slot counts occurrences.
//! * **DCToW**: per-character position indicator rows, compressed with an
//!   orthonormal DCT-II and truncated to a few coefficients per row.
//!
//! ```
//! use wordspot::embeddings::{build_phoc, Alphabet, LevelSet, WordString};
//!
//! let alphabet = Alphabet::from_words(["ab", "ba"]).unwrap();
//! let word = WordString::new("ab").unwrap();
//! let phoc = build_phoc(&word, &alphabet, &LevelSet::new(vec![1, 2]).unwrap()).unwrap();
//! assert_eq!(phoc.values, vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
//! ```

mod dct;
mod dump;
mod pyramid;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dct::{build_dctow, dct_row, idct_row, CoefficientSelection, DEFAULT_DCT_COEFFICIENTS};
pub use dump::{format_dump_record, parse_dump_record, DumpRecord};
pub use pyramid::{
    build_phoc, build_spoc, char_in_split, normalized_occupancy, occupies_split, Interval,
};

/// Case folding applied to every transcription before it is embedded or compared.
pub fn fold_case(text: &str) -> String {
    text.to_lowercase()
}

/// A normalized (case-folded), non-empty transcription.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordString {
    text: String,
    len: usize,
}

impl WordString {
    pub fn new(text: &str) -> Result<Self> {
        let text = fold_case(text);
        let len = text.chars().count();
        if len == 0 {
            return Err(Error::EmptyInput("word string"));
        }
        Ok(Self { text, len })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Number of characters (not bytes).
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.text.chars()
    }
}

impl fmt::Display for WordString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Ordered set of unigram symbols; position in the set is the attribute index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<char>,
    #[serde(skip)]
    index: HashMap<char, usize>,
}

impl Alphabet {
    /// Alphabet with the given symbol order. Duplicates are rejected.
    pub fn new(symbols: Vec<char>) -> Result<Self> {
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate alphabet symbol {c:?}"
                )));
            }
        }
        if symbols.is_empty() {
            return Err(Error::EmptyInput("alphabet"));
        }
        Ok(Self { symbols, index })
    }

    /// Every distinct character of the given transcriptions, sorted by code point.
    ///
    /// Empty transcriptions are skipped; if nothing remains the corpus is
    /// reported as empty.
    pub fn build<'a, I>(transcriptions: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a WordString>,
    {
        let mut symbols: Vec<char> = transcriptions
            .into_iter()
            .flat_map(|w| w.chars())
            .collect();
        if symbols.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        symbols.sort_unstable();
        symbols.dedup();
        Self::new(symbols)
    }

    /// Convenience wrapper around [`Alphabet::build`] for raw strings.
    /// Strings are case-folded; empty strings are skipped.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words: Vec<WordString> = words
            .into_iter()
            .filter_map(|w| WordString::new(w.as_ref()).ok())
            .collect();
        Self::build(&words)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    /// Symbol indices of every character of `word`, failing on the first unknown one.
    pub fn encode(&self, word: &WordString) -> Result<Vec<usize>> {
        word.chars()
            .map(|c| self.index_of(c).ok_or(Error::UnknownCharacter(c)))
            .collect()
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.symbols.into_iter().collect()
    }
}

impl TryFrom<String> for Alphabet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Alphabet::new(s.chars().collect())
    }
}

/// Pyramid levels: each entry is the number of horizontal splits at that level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LevelSet(Vec<usize>);

impl LevelSet {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidLevels("no levels".into()));
        }
        if levels[0] == 0 {
            return Err(Error::InvalidLevels("levels must be >= 1".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLevels(format!(
                "levels must be strictly increasing: {levels:?}"
            )));
        }
        Ok(Self(levels))
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    /// Total number of splits over all levels.
    pub fn total_splits(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn max_level(&self) -> usize {
        *self.0.last().expect("non-empty by construction")
    }
}

impl Default for LevelSet {
    fn default() -> Self {
        Self(vec![2, 3, 4, 5])
    }
}

impl From<LevelSet> for Vec<usize> {
    fn from(l: LevelSet) -> Self {
        l.0
    }
}

impl TryFrom<Vec<usize>> for LevelSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        LevelSet::new(v)
    }
}

impl FromStr for LevelSet {
    type Err = Error;

    /// Parses a comma-separated list such as `1,2,3`.
    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidLevels(format!("not an integer: {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        LevelSet::new(levels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Phoc,
    Spoc,
    Dctow,
}

impl EmbeddingKind {
    /// Whether every value of this embedding is 0 or 1.
    pub fn is_binary(self) -> bool {
        matches!(self, EmbeddingKind::Phoc)
    }
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingKind::Phoc => "PHOC",
            EmbeddingKind::Spoc => "SPOC",
            EmbeddingKind::Dctow => "DCTOW",
        })
    }
}

impl FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "phoc" => Ok(EmbeddingKind::Phoc),
            "spoc" => Ok(EmbeddingKind::Spoc),
            "dctow" => Ok(EmbeddingKind::Dctow),
            _ => Err(Error::Config(format!("unknown embedding kind {s:?}"))),
        }
    }
}

/// A point in attribute space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    pub kind: EmbeddingKind,
    pub values: Vec<f64>,
}

impl AttributeVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Everything needed to embed a transcription, minus the alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    #[serde(default)]
    pub levels: LevelSet,
    #[serde(default = "default_dct_coefficients")]
    pub dct_coefficients: usize,
    #[serde(default)]
    pub dct_selection: CoefficientSelection,
}

fn default_dct_coefficients() -> usize {
    DEFAULT_DCT_COEFFICIENTS
}

impl EmbeddingConfig {
    pub fn new(kind: EmbeddingKind) -> Self {
        Self {
            kind,
            levels: LevelSet::default(),
            dct_coefficients: DEFAULT_DCT_COEFFICIENTS,
            dct_selection: CoefficientSelection::default(),
        }
    }

    pub fn with_levels(mut self, levels: LevelSet) -> Self {
        self.levels = levels;
        self
    }

    /// Dimensionality of the embedding for an alphabet of `alphabet_len` symbols.
    pub fn dim(&self, alphabet_len: usize) -> usize {
        match self.kind {
            EmbeddingKind::Phoc | EmbeddingKind::Spoc => alphabet_len * self.levels.total_splits(),
            EmbeddingKind::Dctow => alphabet_len * self.dct_coefficients,
        }
    }

    pub fn embed(&self, word: &WordString, alphabet: &Alphabet) -> Result<AttributeVector> {
        match self.kind {
            EmbeddingKind::Phoc => build_phoc(word, alphabet, &self.levels),
            EmbeddingKind::Spoc => build_spoc(word, alphabet, &self.levels),
            EmbeddingKind::Dctow => {
                build_dctow(word, alphabet, self.dct_coefficients, self.dct_selection)
            }
        }
    }

    /// Embeds a raw string after case folding.
    pub fn embed_str(&self, word: &str, alphabet: &Alphabet) -> Result<AttributeVector> {
        self.embed(&WordString::new(word)?, alphabet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_is_order_independent() {
        let a = Alphabet::from_words(["ab", "ba"]).unwrap();
        let b = Alphabet::from_words(["ba"]).unwrap();
        assert_eq!(a.symbols(), &['a', 'b']);
        assert_eq!(a, b);
    }

    #[test]
    fn alphabet_skips_empty_and_rejects_all_empty() {
        let a = Alphabet::from_words(["", "c", "a"]).unwrap();
        assert_eq!(a.symbols(), &['a', 'c']);
        assert!(matches!(Alphabet::from_words([""]), Err(Error::EmptyCorpus)));
        assert!(matches!(
            Alphabet::build(std::iter::empty()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn alphabet_lookup_matches_position() {
        let a = Alphabet::from_words(["zebra", "Apple"]).unwrap();
        for (i, &c) in a.symbols().iter().enumerate() {
            assert_eq!(a.index_of(c), Some(i));
        }
        // case folded
        assert!(!a.contains('A'));
        assert!(Alphabet::new(vec!['a', 'a']).is_err());
    }

    #[test]
    fn level_set_validation() {
        assert!(LevelSet::new(vec![]).is_err());
        assert!(LevelSet::new(vec![0, 1]).is_err());
        assert!(LevelSet::new(vec![2, 2]).is_err());
        assert!(LevelSet::new(vec![3, 2]).is_err());
        let l: LevelSet = "1, 2,3".parse().unwrap();
        assert_eq!(l.total_splits(), 6);
        assert_eq!(LevelSet::default().levels(), &[2, 3, 4, 5]);
    }

    #[test]
    fn word_string_folds_case() {
        let w = WordString::new("Spotting").unwrap();
        assert_eq!(w.as_str(), "spotting");
        assert_eq!(w.len(), 8);
        assert!(WordString::new("").is_err());
    }

    #[test]
    fn config_dims() {
        let a = Alphabet::from_words(["abc"]).unwrap();
        let phoc = EmbeddingConfig::new(EmbeddingKind::Phoc);
        assert_eq!(phoc.dim(a.len()), 3 * 14);
        let w = WordString::new("cab").unwrap();
        assert_eq!(phoc.embed(&w, &a).unwrap().dim(), 42);
        let dct = EmbeddingConfig::new(EmbeddingKind::Dctow);
        assert_eq!(dct.embed(&w, &a).unwrap().dim(), 9);
    }
}
