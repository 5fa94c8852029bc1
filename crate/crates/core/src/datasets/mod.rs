//! Corpus manifests, word image files and synthetic corpora.
//!
//! A manifest is a tab-separated text file:
//!
//! ```text
//! # wordspot manifest v1
//! # stopwords	the	and
//! images/0001.pgm	the	train
//! images/0002.pgm	Spotting	test	2
//! ```
//!
//! Records are `image path`, `transcription`, `partition` (`train`, `test` or
//! `query`) and an optional cross-validation fold. Relative image paths are
//! resolved against the manifest's directory. The stop-word line is optional;
//! other lines starting with `#` are comments.

// The example above uses real tabs so it can be copied verbatim.
#![allow(clippy::tabs_in_doc_comments)]

mod synth;

pub use synth::{generate_synthetic_corpus, glyph, render_word, RenderJitter, SynthSpec, GLYPH_HEIGHT, GLYPH_WIDTH};

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::augment::{normalize_pixels, InkConvention, WordImage};
use crate::embeddings::fold_case;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub const MANIFEST_HEADER: &str = "# wordspot manifest v1";
const STOPWORDS_PREFIX: &str = "# stopwords";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Test,
    Query,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Test => "test",
            Partition::Query => "query",
        })
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "test" => Ok(Partition::Test),
            "query" => Ok(Partition::Query),
            _ => Err(Error::InvalidParameter(format!("unknown partition {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    /// Image path as written in the manifest.
    pub image: PathBuf,
    pub transcription: String,
    pub partition: Partition,
    pub fold: Option<usize>,
}

impl ManifestRecord {
    pub fn new(image: impl Into<PathBuf>, transcription: &str, partition: Partition) -> Self {
        Self {
            image: image.into(),
            transcription: transcription.to_string(),
            partition,
            fold: None,
        }
    }

    /// Case-folded class label.
    pub fn label(&self) -> String {
        fold_case(&self.transcription)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub records: Vec<ManifestRecord>,
    pub stop_words: Vec<String>,
    /// Directory that relative image paths are resolved against.
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn new(records: Vec<ManifestRecord>, root: impl Into<PathBuf>) -> Result<Self> {
        let m = Self {
            records,
            stop_words: Vec::new(),
            root: root.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            let text = r.image.to_string_lossy();
            if text.is_empty() || text.contains(['\t', '\n']) {
                return Err(Error::InvalidParameter(format!("invalid image path {text:?}")));
            }
            if r.label().trim().is_empty() || r.transcription.contains(['\t', '\n']) {
                return Err(Error::InvalidParameter(format!(
                    "invalid transcription {:?} for {text}",
                    r.transcription
                )));
            }
            if !seen.insert(&r.image) {
                return Err(Error::InvalidParameter(format!("duplicate image path {text}")));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.image)
    }

    pub fn partition(&self, p: Partition) -> impl Iterator<Item = &ManifestRecord> + '_ {
        self.records.iter().filter(move |r| r.partition == p)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        if !self.stop_words.is_empty() {
            let _ = writeln!(out, "{STOPWORDS_PREFIX}\t{}", self.stop_words.join("\t"));
        }
        for r in &self.records {
            let _ = write!(out, "{}\t{}\t{}", r.image.display(), r.transcription, r.partition);
            if let Some(f) = r.fold {
                let _ = write!(out, "\t{f}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses manifest text without touching the file system.
    pub fn parse(text: &str, source: &Path, root: impl Into<PathBuf>) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == MANIFEST_HEADER => {}
            _ => return Err(bad(1, format!("expected header {MANIFEST_HEADER:?}"))),
        }
        let mut m = Self {
            root: root.into(),
            ..Self::default()
        };
        for (i, line) in lines {
            let n = i + 1;
            if let Some(rest) = line.strip_prefix(STOPWORDS_PREFIX) {
                m.stop_words
                    .extend(rest.split('\t').map(str::trim).filter(|w| !w.is_empty()).map(String::from));
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&f.len()) {
                return Err(bad(n, "expected image, transcription, partition[, fold]".into()));
            }
            let partition = f[2].parse().map_err(|e: Error| bad(n, e.to_string()))?;
            let fold = match f.get(3) {
                Some(v) => Some(v.parse().map_err(|_| bad(n, format!("bad fold {v:?}")))?),
                None => None,
            };
            m.records.push(ManifestRecord {
                image: PathBuf::from(f[0]),
                transcription: f[1].to_string(),
                partition,
                fold,
            });
        }
        m.validate().map_err(|e| bad(0, e.to_string()))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }
}

/// Reads and validates a manifest; every referenced image must exist.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = CorpusManifest::parse(&std::fs::read_to_string(path)?, path, root)?;
    for r in &m.records {
        let p = m.resolve(r);
        if !p.is_file() {
            return Err(Error::MissingFile(p));
        }
    }
    Ok(m)
}

/// Loads a grayscale PGM or PNG file (dark ink on light paper).
pub fn load_word_image(path: &Path) -> Result<WordImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    use image::ColorType::*;
    match img.color() {
        L8 | L16 | La8 | La16 => {}
        c => {
            return Err(Error::Image(format!(
                "{}: expected a grayscale image, found {c:?}",
                path.display()
            )))
        }
    }
    normalize_pixels(&img.to_luma8(), InkConvention::DarkOnLight)
}

/// Encodes an image as binary PGM bytes (dark ink on light paper).
pub fn encode_pgm(image: &WordImage) -> Result<Vec<u8>> {
    use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
    use image::ImageEncoder;
    let gray = image.to_gray_image();
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(gray.as_raw(), gray.width(), gray.height(), image::ExtendedColorType::L8)?;
    Ok(buf)
}

/// Splits the records into `(train, test)` for cross-validation fold `fold`.
///
/// Records carrying fold labels are split by label; otherwise folds are
/// assigned round-robin over a permutation seeded by `seed`.
pub fn fold_split(
    manifest: &CorpusManifest,
    fold: usize,
    n_folds: usize,
    seed: u64,
) -> Result<(Vec<ManifestRecord>, Vec<ManifestRecord>)> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {n_folds}")));
    }
    if fold >= n_folds {
        return Err(Error::IndexOutOfRange { index: fold, len: n_folds });
    }
    let records = &manifest.records;
    let labelled = records.iter().all(|r| r.fold.is_some());
    let assignment: Vec<usize> = if labelled && !records.is_empty() {
        let folds: Vec<usize> = records.iter().map(|r| r.fold.unwrap_or(0)).collect();
        if let Some(&f) = folds.iter().find(|&&f| f >= n_folds) {
            return Err(Error::InvalidParameter(format!("fold label {f} with only {n_folds} folds")));
        }
        folds
    } else {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut stream_rng(seed, Stream::Folds, 0));
        let mut a = vec![0; records.len()];
        for (pos, &idx) in order.iter().enumerate() {
            a[idx] = pos % n_folds;
        }
        a
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, &f) in records.iter().zip(&assignment) {
        if f == fold {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((train, test))
}
