//! Membership census: the attractor of every integer in a range, with
//! per-block densities and interlacing counts.
//!
//! Interlacing is measured by runs (maximal blocks of equal labels) and
//! alternations (adjacent label changes); `runs = alternations + 1` in
//! every non-empty block.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cycles::{classify_range, CycleId, CycleSet};
use crate::error::{OrbitError, Result};
use crate::exec::Execution;
use crate::map::{MapParam, DEFAULT_MAX_BITS, DEFAULT_MAX_STEPS};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Cycle(CycleId),
    Unresolved,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Cycle(c) => write!(f, "{c}"),
            Label::Unresolved => write!(f, "unresolved"),
        }
    }
}

impl FromStr for Label {
    type Err = OrbitError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "unresolved" {
            Ok(Label::Unresolved)
        } else {
            s.parse().map(Label::Cycle)
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub lo: i64,
    pub hi: i64,
    pub counts: BTreeMap<CycleId, u64>,
    pub densities: BTreeMap<CycleId, f64>,
    pub unresolved: u64,
    pub runs: u64,
    pub alternations: u64,
}

impl BlockStats {
    pub fn from_labels(lo: i64, labels: &[Label]) -> Self {
        let mut counts: BTreeMap<CycleId, u64> = BTreeMap::new();
        let mut unresolved = 0;
        for l in labels {
            match l {
                Label::Cycle(c) => *counts.entry(c.clone()).or_default() += 1,
                Label::Unresolved => unresolved += 1,
            }
        }
        let len = labels.len() as f64;
        let densities = counts.iter().map(|(c, &n)| (c.clone(), n as f64 / len)).collect();
        let alternations = labels.windows(2).filter(|w| w[0] != w[1]).count() as u64;
        BlockStats {
            lo,
            hi: lo + labels.len() as i64 - 1,
            counts,
            densities,
            unresolved,
            runs: if labels.is_empty() { 0 } else { alternations + 1 },
            alternations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: i64,
    pub lo: i64,
    pub hi: i64,
    pub max_steps: u64,
    pub max_bits: u64,
    pub block_size: u64,
}

impl RunConfig {
    pub fn new(k: i64, lo: i64, hi: i64, block_size: u64) -> Self {
        RunConfig { k, lo, hi, max_steps: DEFAULT_MAX_STEPS, max_bits: DEFAULT_MAX_BITS, block_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hi < self.lo {
            return Err(OrbitError::pre(format!("empty range [{}, {}]", self.lo, self.hi)));
        }
        if self.block_size < 1 {
            return Err(OrbitError::InvalidCap("block size must be >= 1".into()));
        }
        MapParam::with_caps(self.k, self.max_steps, self.max_bits).map(|_| ())
    }

    pub fn param(&self) -> Result<MapParam> {
        MapParam::with_caps(self.k, self.max_steps, self.max_bits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusTable {
    pub config: RunConfig,
    /// Label of `lo + i` at index `i`.
    pub labels: Vec<Label>,
    pub blocks: Vec<BlockStats>,
}

impl CensusTable {
    pub fn from_labels(config: RunConfig, labels: Vec<Label>) -> Result<Self> {
        config.validate()?;
        if labels.len() as i64 != config.hi - config.lo + 1 {
            return Err(OrbitError::pre(format!("{} labels for range [{}, {}]", labels.len(), config.lo, config.hi)));
        }
        let blocks = compute_blocks(&config, &labels);
        Ok(CensusTable { config, labels, blocks })
    }

    pub fn label(&self, n: i64) -> Option<&Label> {
        usize::try_from(n - self.config.lo).ok().and_then(|i| self.labels.get(i))
    }

    /// Whether the stored block statistics match the labels.
    pub fn blocks_consistent(&self) -> bool {
        compute_blocks(&self.config, &self.labels) == self.blocks
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,label,block\n");
        for (i, l) in self.labels.iter().enumerate() {
            let n = self.config.lo + i as i64;
            out.push_str(&format!("{n},{l},{}\n", i as u64 / self.config.block_size));
        }
        out
    }

    /// Decodes the CSV encoding; the run configuration is not part of it.
    pub fn from_csv(text: &str, config: RunConfig) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("n,label,block") {
            return Err(OrbitError::Parse("missing header n,label,block".into()));
        }
        let mut labels = Vec::new();
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            let [n, label, block] = cols[..] else {
                return Err(OrbitError::Parse(format!("bad row {line:?}")));
            };
            let n: i64 = n.parse().map_err(|_| OrbitError::Parse(format!("bad n {n:?}")))?;
            let block: u64 = block.parse().map_err(|_| OrbitError::Parse(format!("bad block {block:?}")))?;
            if n != config.lo + i as i64 || block != i as u64 / config.block_size {
                return Err(OrbitError::Parse(format!("row {line:?} out of sequence")));
            }
            labels.push(label.parse()?);
        }
        Self::from_labels(config, labels)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: CensusTable = serde_json::from_str(text)?;
        if !t.blocks_consistent() {
            return Err(OrbitError::Parse("block statistics do not match labels".into()));
        }
        Ok(t)
    }
}

fn compute_blocks(config: &RunConfig, labels: &[Label]) -> Vec<BlockStats> {
    labels
        .chunks(config.block_size as usize)
        .enumerate()
        .map(|(b, chunk)| BlockStats::from_labels(config.lo + (b as u64 * config.block_size) as i64, chunk))
        .collect()
}

pub fn census(cfg: &RunConfig) -> Result<CensusTable> {
    census_with(cfg, Execution::default())
}

pub fn census_with(cfg: &RunConfig, execution: Execution) -> Result<CensusTable> {
    cfg.validate()?;
    let p = cfg.param()?.with_execution(execution);
    let rc = classify_range(&p, cfg.lo..=cfg.hi, &CycleSet::new());
    let labels = rc
        .outcomes
        .iter()
        .map(|o| o.cycle().map_or(Label::Unresolved, |c| Label::Cycle(c.clone())))
        .collect();
    CensusTable::from_labels(cfg.clone(), labels)
}
