use std::path::Path;

use rand::Rng;

use super::{encode_pgm, CorpusManifest, ManifestRecord, Partition};
use crate::augment::WordImage;
use crate::embeddings::fold_case;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;
const MIN_WIDTH: usize = 26;
const SUPERSAMPLE: usize = 3;

type Glyph = [&'static str; GLYPH_HEIGHT];

#[rustfmt::skip]
const LETTERS: [Glyph; 26] = [
    [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
    [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
    ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
    ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
    [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."],
    ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
    ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
    ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
    ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
    ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
    ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"],
    [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
    [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
    ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
    [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
    ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
    ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
    ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
    ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
    ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
    ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
];

#[rustfmt::skip]
const DIGITS: [Glyph; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    ["####.", "....#", "....#", ".###.", "....#", "....#", "####."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    [".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."],
];

/// 5x7 bitmap for a lowercase letter or digit; `'#'` marks ink.
pub fn glyph(c: char) -> Option<&'static Glyph> {
    match c {
        'a'..='z' => Some(&LETTERS[c as usize - 'a' as usize]),
        '0'..='9' => Some(&DIGITS[c as usize - '0' as usize]),
        _ => None,
    }
}

/// Ranges of the per-sample random distortions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderJitter {
    pub scale_x: (f64, f64),
    pub scale_y: (f64, f64),
    /// Maximum horizontal shear.
    pub slant: f64,
    /// Maximum vertical offset of the whole word, in pixels.
    pub shift: f64,
    /// Maximum per-character offset, in pixels.
    pub char_shift: f64,
    /// Amplitude of uniform pixel noise.
    pub noise: f64,
}

impl Default for RenderJitter {
    fn default() -> Self {
        Self {
            scale_x: (0.8, 1.15),
            scale_y: (0.85, 1.1),
            slant: 0.2,
            shift: 2.0,
            char_shift: 0.75,
            noise: 0.05,
        }
    }
}

/// Renders `word` at the given height with seeded distortions.
pub fn render_word<R: Rng + ?Sized>(word: &str, height: usize, jitter: &RenderJitter, rng: &mut R) -> Result<WordImage> {
    let word = fold_case(word);
    let glyphs = word
        .chars()
        .map(|c| glyph(c).ok_or(Error::UnknownCharacter(c)))
        .collect::<Result<Vec<_>>>()?;
    if glyphs.is_empty() {
        return Err(Error::EmptyInput("word"));
    }
    if height < 12 {
        return Err(Error::InvalidParameter(format!("synthetic images need height >= 12, got {height}")));
    }
    let h = height as f64;
    let cell = 0.66 * h / GLYPH_HEIGHT as f64;
    let cy = cell * rng.random_range(jitter.scale_y.0..=jitter.scale_y.1);
    let cx = cell * rng.random_range(jitter.scale_x.0..=jitter.scale_x.1);
    let slant = rng.random_range(-jitter.slant..=jitter.slant);
    let gap = cx * rng.random_range(0.6..=1.4);
    let top = (h - GLYPH_HEIGHT as f64 * cy) / 2.0 + rng.random_range(-jitter.shift..=jitter.shift);
    let margin = 2.0 + slant.abs() * h / 2.0;

    let mut boxes = Vec::with_capacity(glyphs.len());
    let mut x = margin;
    for _ in &glyphs {
        let dx = rng.random_range(-jitter.char_shift..=jitter.char_shift);
        let dy = rng.random_range(-jitter.char_shift..=jitter.char_shift);
        boxes.push((x + dx, top + dy));
        x += GLYPH_WIDTH as f64 * cx + gap;
    }
    let natural = (x - gap + margin).ceil() as usize;
    let width = natural.max(MIN_WIDTH);
    let pad = (width - natural) as f64 / 2.0;

    let inked = |px: f64, py: f64| {
        let ux = px - pad + slant * (py - h / 2.0);
        boxes.iter().zip(&glyphs).any(|(&(left, top), g)| {
            let col = (ux - left) / cx;
            let row = (py - top) / cy;
            col >= 0.0
                && row >= 0.0
                && col < GLYPH_WIDTH as f64
                && row < GLYPH_HEIGHT as f64
                && g[row as usize].as_bytes()[col as usize] == b'#'
        })
    };
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) * step;
                    let py = y as f64 + (sy as f64 + 0.5) * step;
                    hits += usize::from(inked(px, py));
                }
            }
            let v = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
            let noise = if jitter.noise > 0.0 {
                rng.random_range(-jitter.noise..=jitter.noise)
            } else {
                0.0
            };
            pixels.push((v + noise).clamp(0.0, 1.0));
        }
    }
    WordImage::new(height, width, pixels)
}

/// Parameters of a synthetic corpus. Every word is one class.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub words: Vec<String>,
    pub height: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub query_per_class: usize,
    pub seed: u64,
    pub jitter: RenderJitter,
}

impl SynthSpec {
    pub fn new(words: Vec<String>, seed: u64) -> Self {
        Self {
            words,
            height: 32,
            train_per_class: 20,
            test_per_class: 10,
            query_per_class: 0,
            seed,
            jitter: RenderJitter::default(),
        }
    }

    /// Ten short words with distinct spellings.
    pub fn default_words() -> Vec<String> {
        ["the", "and", "word", "spot", "image", "query", "net", "deep", "text", "from"]
            .iter()
            .map(|w| w.to_string())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.words.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = std::collections::HashSet::new();
        for w in &self.words {
            let folded = fold_case(w);
            if folded.is_empty() {
                return Err(Error::EmptyInput("word"));
            }
            if let Some(c) = folded.chars().find(|&c| glyph(c).is_none()) {
                return Err(Error::UnknownCharacter(c));
            }
            if !seen.insert(folded) {
                return Err(Error::InvalidParameter(format!("duplicate word {w:?}")));
            }
        }
        Ok(())
    }

    /// Renders every sample in manifest order: per word, its train, test
    /// and query samples.
    pub fn render_all(&self) -> Result<Vec<(WordImage, ManifestRecord)>> {
        self.validate()?;
        let per_class = [
            (Partition::Train, self.train_per_class),
            (Partition::Test, self.test_per_class),
            (Partition::Query, self.query_per_class),
        ];
        let mut out = Vec::new();
        let mut index = 0u64;
        for (class, word) in self.words.iter().enumerate() {
            for (partition, count) in per_class {
                for n in 0..count {
                    let mut rng = stream_rng(self.seed, Stream::Synth, index);
                    index += 1;
                    let image = render_word(word, self.height, &self.jitter, &mut rng)?;
                    let path = format!("images/{class:03}-{partition}-{n:03}.pgm");
                    out.push((image, ManifestRecord::new(path, word, partition)));
                }
            }
        }
        Ok(out)
    }
}

/// Writes `out_dir/images/*.pgm` and `out_dir/manifest.tsv`.
pub fn generate_synthetic_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<CorpusManifest> {
    let samples = spec.render_all()?;
    let mut records = Vec::with_capacity(samples.len());
    for (image, record) in samples {
        crate::io::write_atomic(&out_dir.join(&record.image), &encode_pgm(&image)?)?;
        records.push(record);
    }
    let manifest = CorpusManifest::new(records, out_dir)?;
    manifest.save(&out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
