//! Binary checkpoint format.
//!
//! ```text
//! WORDSPOT-CHECKPOINT\n
//! {header json}\n
//! <little-endian f64 blocks>
//! ```
//!
//! The JSON header carries the format version, the [`NetworkSpec`], the
//! name and shape of every parameter block, the master seed, free-form
//! metadata and the names and lengths of any extra blocks (optimizer state).
//! Parameter blocks follow in declaration order, then the extra blocks.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::io::write_atomic;

const MAGIC: &str = "WORDSPOT-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    network: NetworkSpec,
    params: Vec<BlockHeader>,
    seed: u64,
    metadata: serde_json::Value,
    extra: Vec<BlockHeader>,
}

/// A named auxiliary block stored after the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraBlock {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub seed: u64,
    pub metadata: serde_json::Value,
    pub extra: Vec<ExtraBlock>,
}

impl Checkpoint {
    pub fn new(network: Network, seed: u64) -> Self {
        Self {
            network,
            seed,
            metadata: serde_json::Value::Null,
            extra: Vec::new(),
        }
    }

    pub fn extra_block(&self, name: &str) -> Option<&[f64]> {
        self.extra
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.values.as_slice())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            network: self.network.spec().clone(),
            params: self
                .network
                .params()
                .iter()
                .map(|p| BlockHeader {
                    name: p.spec.name.clone(),
                    shape: p.spec.shape.clone(),
                })
                .collect(),
            seed: self.seed,
            metadata: self.metadata.clone(),
            extra: self
                .extra
                .iter()
                .map(|b| BlockHeader {
                    name: b.name.clone(),
                    shape: vec![b.values.len()],
                })
                .collect(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::new();
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "{json}")?;
        let blocks = self
            .network
            .params()
            .iter()
            .map(|p| &p.value)
            .chain(self.extra.iter().map(|b| &b.values));
        for block in blocks {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        line.clear();
        reader.read_line(&mut line)?;
        let header: Header =
            serde_json::from_str(line.trim_end()).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let read_block = |reader: &mut BufReader<R>, len: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; len * 8];
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::Checkpoint("truncated parameter data".into()))?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let expected = header.network.param_specs()?;
        if expected.len() != header.params.len()
            || expected
                .iter()
                .zip(&header.params)
                .any(|(e, h)| e.name != h.name || e.shape != h.shape)
        {
            return Err(Error::Checkpoint("parameter table does not match network".into()));
        }
        let mut values = Vec::with_capacity(header.params.len());
        for p in &header.params {
            values.push(read_block(&mut reader, p.shape.iter().product())?);
        }
        let mut extra = Vec::with_capacity(header.extra.len());
        for b in &header.extra {
            extra.push(ExtraBlock {
                name: b.name.clone(),
                values: read_block(&mut reader, b.shape.iter().product())?,
            });
        }
        let mut rest = [0u8; 1];
        if reader.read(&mut rest)? != 0 {
            return Err(Error::Checkpoint("trailing bytes after last block".into()));
        }
        Ok(Self {
            network: Network::from_parts(header.network, values)?,
            seed: header.seed,
            metadata: header.metadata,
            extra,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_reader(fs::File::open(path)?)
    }
}
