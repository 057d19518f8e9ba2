//! Census persistence as length-prefixed JSON lines.
//!
//! Every line is `<byte length> <json>`. The first line is the header with
//! the format version, the run configuration and the block count; one line
//! per block follows. A file written under a different configuration is
//! rejected, and so is any file whose lines or lengths do not add up.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::census::{BlockStats, CensusTable, Label, RunConfig};
use crate::error::{OrbitError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    #[serde(flatten)]
    config: RunConfig,
    blocks: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockLine {
    index: usize,
    labels: Vec<Label>,
    stats: BlockStats,
}

fn push_line(out: &mut String, json: &str) {
    out.push_str(&format!("{} {json}\n", json.len()));
}

pub fn encode(table: &CensusTable) -> Result<String> {
    let mut out = String::new();
    let header = Header { format_version: FORMAT_VERSION, config: table.config.clone(), blocks: table.blocks.len() };
    push_line(&mut out, &serde_json::to_string(&header)?);
    let bs = table.config.block_size as usize;
    for (index, (labels, stats)) in table.labels.chunks(bs).zip(&table.blocks).enumerate() {
        let line = BlockLine { index, labels: labels.to_vec(), stats: stats.clone() };
        push_line(&mut out, &serde_json::to_string(&line)?);
    }
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> OrbitError {
    OrbitError::CacheCorrupt(msg.into())
}

fn read_line(rest: &mut &str) -> Result<String> {
    let (len, tail) = rest.split_once(' ').ok_or_else(|| corrupt("truncated line prefix"))?;
    let len: usize = len.parse().map_err(|_| corrupt(format!("bad length prefix {len:?}")))?;
    if tail.len() < len + 1 || !tail.is_char_boundary(len) || tail.as_bytes()[len] != b'\n' {
        return Err(corrupt("line shorter than its length prefix"));
    }
    let json = tail[..len].to_string();
    *rest = &tail[len + 1..];
    Ok(json)
}

/// Decodes a cache and checks it was built for `expected`.
pub fn decode(text: &str, expected: &RunConfig) -> Result<CensusTable> {
    let mut rest = text;
    let header: Header = serde_json::from_str(&read_line(&mut rest)?).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(OrbitError::CacheMismatch(format!(
            "format version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    if &header.config != expected {
        return Err(OrbitError::CacheMismatch(format!(
            "cache built for {:?}, requested {:?}",
            header.config, expected
        )));
    }
    let mut labels = Vec::new();
    let mut blocks = Vec::new();
    for i in 0..header.blocks {
        let line: BlockLine =
            serde_json::from_str(&read_line(&mut rest)?).map_err(|e| corrupt(format!("block {i}: {e}")))?;
        if line.index != i {
            return Err(corrupt(format!("block {} found at position {i}", line.index)));
        }
        labels.extend(line.labels);
        blocks.push(line.stats);
    }
    if !rest.is_empty() {
        return Err(corrupt("trailing data after the last block"));
    }
    let table = CensusTable::from_labels(header.config, labels).map_err(|e| corrupt(e.to_string()))?;
    if table.blocks != blocks {
        return Err(corrupt("stored block statistics do not match labels"));
    }
    Ok(table)
}

pub fn cache_store(path: &Path, table: &CensusTable) -> Result<()> {
    let text = encode(table)?;
    // write then rename so an interrupted store never leaves a partial file
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(text.as_bytes())?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn cache_load(path: &Path, expected: &RunConfig) -> Result<CensusTable> {
    decode(&fs::read_to_string(path)?, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::census;

    fn table() -> (RunConfig, CensusTable) {
        let cfg = RunConfig::new(-1, 1, 10, 4);
        let t = census(&cfg).unwrap();
        (cfg, t)
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let (cfg, t) = table();
        cache_store(&path, &t).unwrap();
        assert_eq!(cache_load(&path, &cfg).unwrap(), t);
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let (cfg, t) = table();
        let text = encode(&t).unwrap();
        let mut other = cfg.clone();
        other.k = 1;
        assert!(matches!(decode(&text, &other), Err(OrbitError::CacheMismatch(_))));
        let mut other = cfg.clone();
        other.max_steps = 5;
        assert!(matches!(decode(&text, &other), Err(OrbitError::CacheMismatch(_))));
    }

    #[test]
    fn truncation_is_detected() {
        let (cfg, t) = table();
        let text = encode(&t).unwrap();
        for cut in [0, 5, text.len() / 2, text.len() - 1] {
            assert!(matches!(decode(&text[..cut], &cfg), Err(OrbitError::CacheCorrupt(_))), "cut={cut}");
        }
        let mut extra = text.clone();
        extra.push_str("3 {}\n");
        assert!(decode(&extra, &cfg).is_err());
    }

    #[test]
    fn tampered_labels_are_detected() {
        let (cfg, t) = table();
        let text = encode(&t).unwrap();
        // swap a label without fixing the statistics or the length prefix
        let bad = text.replacen("[\"1\",\"1\",\"1\",\"1\"]", "[\"5\",\"1\",\"1\",\"1\"]", 1);
        assert_ne!(bad, text);
        assert!(matches!(decode(&bad, &cfg), Err(OrbitError::CacheCorrupt(_))));
    }

    #[test]
    fn version_mismatch() {
        let (cfg, t) = table();
        let text = encode(&t).unwrap();
        let bad = text.replacen("\"format_version\":1", "\"format_version\":9", 1);
        assert!(matches!(decode(&bad, &cfg), Err(OrbitError::CacheMismatch(_))));
    }
}
