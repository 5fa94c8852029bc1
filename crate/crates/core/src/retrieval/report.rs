use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryAp {
    pub id: String,
    pub label: String,
    pub ap: f64,
}

/// Per-query average precision for one method under one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct APReport {
    pub protocol: String,
    pub entries: Vec<QueryAp>,
    pub map: f64,
}

impl APReport {
    pub fn new(protocol: &str, entries: Vec<QueryAp>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoQueries);
        }
        let map = entries.iter().map(|e| e.ap).sum::<f64>() / entries.len() as f64;
        Ok(Self {
            protocol: protocol.to_string(),
            entries,
            map,
        })
    }

    pub fn aps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ap).collect()
    }

    /// `# protocol <name>`, one `id  label  ap` line per query, then
    /// `mAP  <value>`; fields are tab-separated, values have 9 decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("# protocol {}\n", self.protocol);
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{:.9}", e.id, e.label, e.ap);
        }
        let _ = writeln!(out, "mAP\t{:.9}", self.map);
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let protocol = match lines.next() {
            Some((_, l)) if l.starts_with("# protocol ") => l["# protocol ".len()..].trim().to_string(),
            _ => return Err(bad(1, "missing '# protocol' header".into())),
        };
        let mut entries = Vec::new();
        let mut stated_map = None;
        for (i, line) in lines {
            let n = i + 1;
            if stated_map.is_some() {
                return Err(bad(n, "content after the mAP line".into()));
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["mAP", v] => stated_map = Some(v.parse::<f64>().map_err(|e| bad(n, e.to_string()))?),
                [id, label, ap] => {
                    let ap: f64 = ap.parse().map_err(|e| bad(n, format!("bad AP: {e}")))?;
                    if !(0.0..=1.0).contains(&ap) {
                        return Err(bad(n, format!("AP {ap} outside [0, 1]")));
                    }
                    entries.push(QueryAp {
                        id: id.to_string(),
                        label: label.to_string(),
                        ap,
                    });
                }
                _ => return Err(bad(n, "expected 'id<TAB>label<TAB>ap'".into())),
            }
        }
        let stated = stated_map.ok_or_else(|| bad(text.lines().count(), "missing mAP line".into()))?;
        let report = Self::new(&protocol, entries)?;
        if (report.map - stated).abs() > 1e-8 {
            return Err(bad(
                text.lines().count(),
                format!("mAP {stated} does not match the per-query mean {}", report.map),
            ));
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?, path)
    }
}
