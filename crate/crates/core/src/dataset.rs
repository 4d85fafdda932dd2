//! Grid-search data collection and the transitions file format.
//!
//! A transitions file is line-oriented JSON: one header object followed by
//! one record per line. The header carries the schema version, the
//! normalization ranges and the simulator configuration the records were
//! produced with. Latencies are stored as count + nine deciles; `prob` and
//! `pe` are authoritative.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{
    normalize_state, ConfigAction, LatencySummary, NetworkState, PerfRecord, Range, ACTION_DIM,
    ACTION_RANGES, STATE_DIM, STATE_RANGES,
};
use crate::error::{Error, Result};
use crate::netsim::{self, SimConfig};
use crate::{par, seed};

pub const SCHEMA_VERSION: u32 = 1;

pub const BANDWIDTH_LEVELS: [f64; 6] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0];
pub const CPU_LEVELS: [f64; 3] = [0.25, 0.5, 1.0];

/// Salt for the train/validation split.
pub const SPLIT_SALT: u64 = 0x5EED_5A17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranges {
    pub state: [Range; STATE_DIM],
    pub action: [Range; ACTION_DIM],
}

impl Ranges {
    pub fn compiled() -> Self {
        Self {
            state: STATE_RANGES,
            action: ACTION_RANGES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema_version: u32,
    pub ranges: Ranges,
    pub sim_config: SimConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub header: Header,
    pub records: Vec<PerfRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    s: [f64; STATE_DIM],
    a: [f64; ACTION_DIM],
    n: usize,
    deciles: Vec<f64>,
    prob: f64,
    usage: f64,
    pe: f64,
}

impl From<&PerfRecord> for RecordLine {
    fn from(r: &PerfRecord) -> Self {
        Self {
            s: r.state.to_array(),
            a: r.action.to_array(),
            n: r.latency.count,
            deciles: r.latency.deciles.clone(),
            prob: r.prob,
            usage: r.usage,
            pe: r.pe,
        }
    }
}

impl From<RecordLine> for PerfRecord {
    fn from(l: RecordLine) -> Self {
        Self {
            state: NetworkState::from_array(l.s),
            action: ConfigAction::from_array(l.a),
            latency: LatencySummary {
                count: l.n,
                deciles: l.deciles,
            },
            prob: l.prob,
            usage: l.usage,
            pe: l.pe,
        }
    }
}

fn pair_key(s: &NetworkState, a: &ConfigAction) -> [u64; STATE_DIM + ACTION_DIM] {
    let mut k = [0u64; STATE_DIM + ACTION_DIM];
    for (i, v) in s.to_array().iter().chain(a.to_array().iter()).enumerate() {
        k[i] = v.to_bits();
    }
    k
}

/// Evenly spaced levels over `range`, both endpoints included.
pub fn levels(range: Range, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            if k + 1 == count {
                range.hi
            } else {
                range.denormalize(k as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

/// Cartesian product of `levels_per_dim` levels on every state dimension,
/// first dimension varying slowest.
pub fn grid_states(levels_per_dim: usize) -> Result<Vec<NetworkState>> {
    if levels_per_dim < 2 {
        return Err(Error::Validation {
            field: "levels",
            reason: format!("{levels_per_dim} < 2"),
        });
    }
    let axes: Vec<Vec<f64>> = STATE_RANGES
        .iter()
        .map(|r| levels(*r, levels_per_dim))
        .collect();
    let total = levels_per_dim.pow(STATE_DIM as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut v = [0.0; STATE_DIM];
        for d in (0..STATE_DIM).rev() {
            v[d] = axes[d][rem % levels_per_dim];
            rem /= levels_per_dim;
        }
        out.push(NetworkState::from_array(v));
    }
    Ok(out)
}

/// The 6 x 6 x 3 = 108 grid actions.
pub fn grid_actions() -> Vec<ConfigAction> {
    let mut out = Vec::with_capacity(108);
    for &ul in &BANDWIDTH_LEVELS {
        for &dl in &BANDWIDTH_LEVELS {
            for &cpu in &CPU_LEVELS {
                out.push(ConfigAction {
                    bandwidth_ul: ul,
                    bandwidth_dl: dl,
                    cpu_ratio: cpu,
                });
            }
        }
    }
    out
}

/// Simulates every (state, action) pair; records are state-major.
pub fn collect(
    states: &[NetworkState],
    actions: &[ConfigAction],
    cfg: &SimConfig,
) -> Result<TransitionSet> {
    if states.is_empty() || actions.is_empty() {
        return Err(Error::Validation {
            field: "collect",
            reason: "state and action lists must be nonempty".into(),
        });
    }
    cfg.validate()?;
    let pairs: Vec<(NetworkState, ConfigAction)> = states
        .iter()
        .flat_map(|s| actions.iter().map(move |a| (*s, *a)))
        .collect();
    let records = par::try_map(&pairs, |(s, a)| {
        netsim::pe_of(s, a, cfg).map_err(|e| Error::Simulation {
            state: s.to_array(),
            action: a.to_array(),
            source: Box::new(e),
        })
    })?;
    let ts = TransitionSet {
        header: Header {
            schema_version: SCHEMA_VERSION,
            ranges: Ranges::compiled(),
            sim_config: cfg.clone(),
        },
        records,
    };
    ts.check_unique()?;
    Ok(ts)
}

impl TransitionSet {
    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !seen.insert(pair_key(&r.state, &r.action)) {
                return Err(Error::Invariant(format!(
                    "duplicate record for state {:?} / action {:?}",
                    r.state.to_array(),
                    r.action.to_array()
                )));
            }
        }
        Ok(())
    }

    /// Distinct states in first-appearance order.
    pub fn states(&self) -> Vec<NetworkState> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.state.to_array().map(f64::to_bits)))
            .map(|r| r.state)
            .collect()
    }

    pub fn records_for<'a>(&'a self, s: &'a NetworkState) -> impl Iterator<Item = &'a PerfRecord> {
        self.records.iter().filter(move |r| r.state == *s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut w = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, &RecordLine::from(r))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let malformed = |line: usize, reason: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut lines = reader.lines().enumerate();
        let header_line = match lines.next() {
            Some((_, l)) => l?,
            None => return Err(malformed(1, "empty file".into())),
        };
        #[derive(Deserialize)]
        struct VersionOnly {
            schema_version: u32,
        }
        let version: VersionOnly =
            serde_json::from_str(&header_line).map_err(|e| malformed(1, e.to_string()))?;
        if version.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: version.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let header: Header =
            serde_json::from_str(&header_line).map_err(|e| malformed(1, e.to_string()))?;
        if header.ranges != Ranges::compiled() {
            return Err(Error::HeaderMismatch(format!(
                "file has {:?}, compiled {:?}",
                header.ranges,
                Ranges::compiled()
            )));
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: RecordLine =
                serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
            records.push(PerfRecord::from(rec));
        }
        let ts = Self { header, records };
        ts.check_unique()?;
        Ok(ts)
    }
}

/// Deterministic pair-level split: `true` for the validation side.
pub fn is_validation_pair(s: &NetworkState, a: &ConfigAction, salt: u64, fraction: f64) -> bool {
    let h = seed::mix(salt, pair_key(s, a));
    (h % 1_000_000) as f64 / 1_000_000.0 < fraction
}

/// Deterministic state-level holdout.
pub fn is_holdout_state(s: &NetworkState, salt: u64, fraction: f64) -> bool {
    let h = seed::mix(salt ^ 0xA5A5, s.to_array().map(f64::to_bits));
    (h % 1_000_000) as f64 / 1_000_000.0 < fraction
}

/// Records split 80/20 (by default) into (train, validation).
pub fn split_pairs(records: &[PerfRecord], salt: u64, fraction: f64) -> (Vec<PerfRecord>, Vec<PerfRecord>) {
    records
        .iter()
        .cloned()
        .partition(|r| !is_validation_pair(&r.state, &r.action, salt, fraction))
}

/// Predictor features and targets for a list of records.
pub fn training_pairs(records: &[PerfRecord]) -> Result<(Vec<[f64; 8]>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(records.len());
    let mut ys = Vec::with_capacity(records.len());
    for r in records {
        xs.push(crate::domain::features(&normalize_state(&r.state)?, &r.action));
        ys.push(r.pe);
    }
    Ok((xs, ys))
}
