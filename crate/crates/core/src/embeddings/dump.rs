//! Text dump of embeddings, one record per line:
//! `transcription<TAB>KIND<TAB>d<TAB>v1 v2 ... vd`.
//!
//! Values use Rust's shortest round-trip float formatting, so a dump parses
//! back to bit-identical vectors and integer-valued embeddings print as
//! plain integers.

use super::{AttributeVector, EmbeddingKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub transcription: String,
    pub vector: AttributeVector,
}

pub fn format_dump_record(transcription: &str, vector: &AttributeVector) -> String {
    let values: Vec<String> = vector.values.iter().map(|v| v.to_string()).collect();
    format!(
        "{}\t{}\t{}\t{}",
        transcription,
        vector.kind,
        vector.dim(),
        values.join(" ")
    )
}

pub fn parse_dump_record(line: &str) -> Result<DumpRecord> {
    let bad = |msg: &str| Error::InvalidParameter(format!("embedding dump: {msg}"));
    let mut fields = line.trim_end_matches(['\n', '\r']).split('\t');
    let (Some(transcription), Some(kind), Some(d), Some(values), None) = (
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
    ) else {
        return Err(bad("expected 4 tab-separated fields"));
    };
    let kind: EmbeddingKind = kind.parse()?;
    let d: usize = d.parse().map_err(|_| bad("bad dimensionality"))?;
    let values = values
        .split_whitespace()
        .map(|v| v.parse::<f64>().map_err(|_| bad("bad value")))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != d {
        return Err(bad(&format!("declared d = {d}, found {} values", values.len())));
    }
    Ok(DumpRecord {
        transcription: transcription.to_string(),
        vector: AttributeVector { kind, values },
    })
}
