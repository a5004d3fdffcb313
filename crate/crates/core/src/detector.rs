//! The BDM core state machine.
//!
//! Pairs per-domain interval blocks, classifies group behavior by
//! Jaccard similarity, runs the single-host decision procedure over
//! domains that never form a host group, and maintains the persistent
//! domain database and MAC blacklist.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::MacAddr;
use crate::similarity::{
    classify_score, detection_allowed, jaccard, Classification, SimilarityScore, Threshold,
};
use crate::window::{DomainIntervalBlock, WindowSummary};

pub const DOMAINS_FILE: &str = "domains.jsonl";
pub const BLACKLIST_FILE: &str = "blacklist.jsonl";
pub const ALERTS_FILE: &str = "alerts.jsonl";

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt database {file} at line {line}: {reason}")]
    CorruptDatabase {
        file: String,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainClass {
    Normal,
    Abnormal,
}

/// How a domain record was derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    GroupBehavior,
    SingleHostPrediction,
    SingleHostBlacklistedMac,
}

/// Persistent classification state of one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub qname: String,
    pub class: DomainClass,
    /// Best group-behavior similarity score; absent for records
    /// derived from the single-host path.
    pub best_score: Option<f64>,
    pub source: RecordSource,
    pub first_seen_ts: f64,
    pub last_seen_ts: f64,
}

/// A MAC flagged as bot-infected, with the domain that implicated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacBlacklistEntry {
    pub mac: MacAddr,
    pub implicating_qname: String,
    pub added_ts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    AbnormalDomainGroup,
    PredictedAbnormalDomain,
    BlacklistedMacActivity,
}

/// An operator notification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: AlertKind,
    pub qname: String,
    pub macs: BTreeSet<MacAddr>,
    pub score: Option<f64>,
    pub emitted_ts: f64,
}

/// Detection knobs, all CLI-configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Similarity at or above this is abnormal.
    pub threshold: Threshold,
    /// Minimum distinct MACs for a block to count as a host group.
    pub group_min: usize,
    /// Minimum queries for the single-host repeated-query rule.
    pub repeat_min: usize,
    /// Maximum coefficient of variation of inter-arrival gaps for a
    /// query pattern to count as periodic.
    pub periodicity_tolerance: f64,
    /// When true, a new single-host domain is abnormal only if the MAC
    /// is blacklisted AND the querying is periodic (default: OR).
    pub require_both_signals: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            threshold: Threshold::default(),
            group_min: 2,
            repeat_min: 3,
            periodicity_tolerance: 0.5,
            require_both_signals: false,
        }
    }
}

/// The detector's persistent state: domain database, MAC blacklist,
/// and pending alerts. Single-writer; one detection pass owns it.
#[derive(Debug, Clone, Default)]
pub struct DetectorState {
    pub domains: BTreeMap<String, DomainRecord>,
    pub blacklist: BTreeMap<MacAddr, MacBlacklistEntry>,
    pub alerts: Vec<Alert>,
    pub config: DetectorConfig,
}

impl DetectorState {
    pub fn new(config: DetectorConfig) -> Self {
        DetectorState {
            domains: BTreeMap::new(),
            blacklist: BTreeMap::new(),
            alerts: Vec::new(),
            config,
        }
    }

    /// Runs one monitoring period through the analyzing and
    /// classifying phases. Returns the alerts this window produced.
    pub fn process_window(&mut self, summary: &WindowSummary) -> Vec<Alert> {
        let mut new_alerts = Vec::new();
        let mut emitted: BTreeSet<(AlertKind, String)> = BTreeSet::new();

        let domains: Vec<String> = summary.domains.keys().cloned().collect();
        for qname in &domains {
            let blocks = &summary.domains[qname];
            let group_blocks: Vec<&DomainIntervalBlock> = blocks
                .iter()
                .filter(|b| b.macs.len() >= self.config.group_min)
                .collect();

            let best_pair = best_consecutive_pair(&group_blocks, summary.dns_ratio);
            if let Some((score, x_block, y_block)) = best_pair {
                self.classify_group(
                    qname,
                    score,
                    x_block,
                    y_block,
                    summary,
                    &mut new_alerts,
                    &mut emitted,
                );
                continue;
            }

            // No group pair: single-host procedure for each MAC that
            // appears alone in a block of this domain.
            let single_macs: BTreeSet<MacAddr> = blocks
                .iter()
                .filter(|b| b.macs.len() == 1)
                .flat_map(|b| b.macs.iter().copied())
                .collect();
            for mac in single_macs {
                let timestamps = &summary.host_queries[qname][&mac];
                if let Some(alert) = self.process_single_host(qname, mac, timestamps) {
                    let key = (alert.kind, alert.qname.clone());
                    if emitted.insert(key) {
                        new_alerts.push(alert);
                    }
                }
            }
        }

        self.alerts.extend(new_alerts.iter().cloned());
        new_alerts
    }

    #[allow(clippy::too_many_arguments)]
    fn classify_group(
        &mut self,
        qname: &str,
        score: SimilarityScore,
        x_block: &DomainIntervalBlock,
        y_block: &DomainIntervalBlock,
        summary: &WindowSummary,
        new_alerts: &mut Vec<Alert>,
        emitted: &mut BTreeSet<(AlertKind, String)>,
    ) {
        let (first_ts, last_ts) = seen_range(summary, qname);
        match classify_score(&score, self.config.threshold) {
            Classification::Abnormal => {
                self.upsert_abnormal_group(qname, score.value(), first_ts, last_ts);
                let macs: BTreeSet<MacAddr> = x_block
                    .macs
                    .union(&y_block.macs)
                    .copied()
                    .collect();
                for mac in &macs {
                    self.blacklist
                        .entry(*mac)
                        .or_insert_with(|| MacBlacklistEntry {
                            mac: *mac,
                            implicating_qname: qname.to_string(),
                            added_ts: last_ts,
                        });
                }
                let key = (AlertKind::AbnormalDomainGroup, qname.to_string());
                if emitted.insert(key) {
                    new_alerts.push(Alert {
                        kind: AlertKind::AbnormalDomainGroup,
                        qname: qname.to_string(),
                        macs,
                        score: Some(score.value()),
                        emitted_ts: last_ts,
                    });
                }
            }
            Classification::Normal => {
                self.upsert_normal(qname, RecordSource::GroupBehavior, first_ts, last_ts);
            }
        }
    }

    /// The single-host decision procedure for one (domain, MAC) pair
    /// over one monitoring period.
    pub fn process_single_host(
        &mut self,
        qname: &str,
        mac: MacAddr,
        query_timestamps: &[f64],
    ) -> Option<Alert> {
        let first_ts = *query_timestamps.first()?;
        let last_ts = *query_timestamps.last()?;
        let blacklisted = self.blacklist.contains_key(&mac);

        if let Some(record) = self.domains.get_mut(qname) {
            record.last_seen_ts = record.last_seen_ts.max(last_ts);
            record.first_seen_ts = record.first_seen_ts.min(first_ts);
            // Known domain, normal or abnormal: the host itself is the
            // suspicion signal, the domain's class does not change.
            if blacklisted {
                return Some(Alert {
                    kind: AlertKind::BlacklistedMacActivity,
                    qname: qname.to_string(),
                    macs: BTreeSet::from([mac]),
                    score: None,
                    emitted_ts: last_ts,
                });
            }
            return None;
        }

        // New domain: blacklist match and repeated periodic querying
        // are the two suspicion signals.
        let periodic = query_timestamps.len() >= self.config.repeat_min
            && gap_coefficient_of_variation(query_timestamps)
                .is_some_and(|cv| cv <= self.config.periodicity_tolerance);
        let abnormal = if self.config.require_both_signals {
            blacklisted && periodic
        } else {
            blacklisted || periodic
        };

        if abnormal {
            let source = if blacklisted {
                RecordSource::SingleHostBlacklistedMac
            } else {
                RecordSource::SingleHostPrediction
            };
            self.domains.insert(
                qname.to_string(),
                DomainRecord {
                    qname: qname.to_string(),
                    class: DomainClass::Abnormal,
                    best_score: None,
                    source,
                    first_seen_ts: first_ts,
                    last_seen_ts: last_ts,
                },
            );
            self.blacklist
                .entry(mac)
                .or_insert_with(|| MacBlacklistEntry {
                    mac,
                    implicating_qname: qname.to_string(),
                    added_ts: last_ts,
                });
            Some(Alert {
                kind: AlertKind::PredictedAbnormalDomain,
                qname: qname.to_string(),
                macs: BTreeSet::from([mac]),
                score: None,
                emitted_ts: last_ts,
            })
        } else {
            self.domains.insert(
                qname.to_string(),
                DomainRecord {
                    qname: qname.to_string(),
                    class: DomainClass::Normal,
                    best_score: None,
                    source: RecordSource::SingleHostPrediction,
                    first_seen_ts: first_ts,
                    last_seen_ts: last_ts,
                },
            );
            None
        }
    }

    fn upsert_abnormal_group(&mut self, qname: &str, score: f64, first_ts: f64, last_ts: f64) {
        self.domains
            .entry(qname.to_string())
            .and_modify(|r| {
                let was_abnormal = r.class == DomainClass::Abnormal;
                r.class = DomainClass::Abnormal;
                r.best_score = Some(r.best_score.map_or(score, |s| s.max(score)));
                // Preserve single-host provenance on records that were
                // already abnormal before this group confirmation.
                if !was_abnormal {
                    r.source = RecordSource::GroupBehavior;
                }
                r.first_seen_ts = r.first_seen_ts.min(first_ts);
                r.last_seen_ts = r.last_seen_ts.max(last_ts);
            })
            .or_insert_with(|| DomainRecord {
                qname: qname.to_string(),
                class: DomainClass::Abnormal,
                best_score: Some(score),
                source: RecordSource::GroupBehavior,
                first_seen_ts: first_ts,
                last_seen_ts: last_ts,
            });
    }

    fn upsert_normal(&mut self, qname: &str, source: RecordSource, first_ts: f64, last_ts: f64) {
        self.domains
            .entry(qname.to_string())
            .and_modify(|r| {
                // Abnormal never silently reverts to Normal.
                r.first_seen_ts = r.first_seen_ts.min(first_ts);
                r.last_seen_ts = r.last_seen_ts.max(last_ts);
            })
            .or_insert_with(|| DomainRecord {
                qname: qname.to_string(),
                class: DomainClass::Normal,
                best_score: None,
                source,
                first_seen_ts: first_ts,
                last_seen_ts: last_ts,
            });
    }

    /// Writes the domain database and blacklist to `db_dir`
    /// atomically (write-new-then-rename). Alerts are not persisted
    /// here; see [`append_alerts`].
    pub fn persist(&self, db_dir: &Path) -> Result<(), DetectorError> {
        fs::create_dir_all(db_dir).map_err(|source| DetectorError::IoFailure {
            path: db_dir.to_path_buf(),
            source,
        })?;
        write_jsonl_atomic(&db_dir.join(DOMAINS_FILE), self.domains.values())?;
        write_jsonl_atomic(&db_dir.join(BLACKLIST_FILE), self.blacklist.values())?;
        Ok(())
    }

    /// Loads a state persisted by [`DetectorState::persist`]. Missing
    /// files mean an empty database.
    pub fn load(db_dir: &Path, config: DetectorConfig) -> Result<Self, DetectorError> {
        let mut state = DetectorState::new(config);
        let records: Vec<DomainRecord> = read_jsonl(&db_dir.join(DOMAINS_FILE), DOMAINS_FILE)?;
        for r in records {
            state.domains.insert(r.qname.clone(), r);
        }
        let entries: Vec<MacBlacklistEntry> =
            read_jsonl(&db_dir.join(BLACKLIST_FILE), BLACKLIST_FILE)?;
        for e in entries {
            state.blacklist.insert(e.mac, e);
        }
        Ok(state)
    }
}

/// Maximum-scoring consecutive pair of group blocks, gated by the
/// detection precondition.
fn best_consecutive_pair<'a>(
    group_blocks: &[&'a DomainIntervalBlock],
    dns_ratio: u64,
) -> Option<(SimilarityScore, &'a DomainIntervalBlock, &'a DomainIntervalBlock)> {
    let mut best: Option<(SimilarityScore, &DomainIntervalBlock, &DomainIntervalBlock)> = None;
    for pair in group_blocks.windows(2) {
        let (x, y) = (pair[0], pair[1]);
        if !detection_allowed(x.macs.len(), y.macs.len(), dns_ratio) {
            continue;
        }
        let score = jaccard(&x.macs, &y.macs).expect("group blocks are non-empty");
        let better = match &best {
            None => true,
            Some((b, _, _)) => score.cmp_value(b) == std::cmp::Ordering::Greater,
        };
        if better {
            best = Some((score, x, y));
        }
    }
    best
}

/// First and last query timestamps of a domain within the window.
fn seen_range(summary: &WindowSummary, qname: &str) -> (f64, f64) {
    let mut first = f64::INFINITY;
    let mut last = f64::NEG_INFINITY;
    if let Some(per_mac) = summary.host_queries.get(qname) {
        for times in per_mac.values() {
            if let (Some(&a), Some(&b)) = (times.first(), times.last()) {
                first = first.min(a);
                last = last.max(b);
            }
        }
    }
    (first, last)
}

/// Coefficient of variation of inter-arrival gaps. `None` when there
/// are fewer than two gaps or the mean gap is zero.
fn gap_coefficient_of_variation(timestamps: &[f64]) -> Option<f64> {
    if timestamps.len() < 3 {
        return None;
    }
    let gaps: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if mean <= 0.0 {
        return None;
    }
    let variance = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    Some(variance.sqrt() / mean)
}

/// Appends alerts to the append-only alert log in `db_dir`.
pub fn append_alerts(db_dir: &Path, alerts: &[Alert]) -> Result<(), DetectorError> {
    if alerts.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(db_dir).map_err(|source| DetectorError::IoFailure {
        path: db_dir.to_path_buf(),
        source,
    })?;
    let path = db_dir.join(ALERTS_FILE);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|source| DetectorError::IoFailure {
            path: path.clone(),
            source,
        })?;
    for alert in alerts {
        let line = serde_json::to_string(alert).expect("alerts serialize");
        writeln!(file, "{line}").map_err(|source| DetectorError::IoFailure {
            path: path.clone(),
            source,
        })?;
    }
    Ok(())
}

fn write_jsonl_atomic<T, I>(path: &Path, items: I) -> Result<(), DetectorError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let io_err = |source| DetectorError::IoFailure {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut file = File::create(&tmp).map_err(io_err)?;
        for item in items {
            let line = serde_json::to_string(&item).expect("records serialize");
            writeln!(file, "{line}").map_err(io_err)?;
        }
        file.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(
    path: &Path,
    file_name: &str,
) -> Result<Vec<T>, DetectorError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(DetectorError::IoFailure {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DetectorError::IoFailure {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| DetectorError::CorruptDatabase {
            file: file_name.to_string(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}
