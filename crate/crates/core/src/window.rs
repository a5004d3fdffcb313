//! Time-window segmentation and per-domain block aggregation.
//!
//! A monitoring period is divided into fixed-length, half-open
//! intervals. For every (domain, interval) pair with at least one
//! query, a block records the distinct querying MACs and the total
//! query count.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ingest::DnsQueryEvent;
use crate::mac::MacAddr;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("interval length {0} must be positive")]
    NonPositiveInterval(f64),
    #[error("monitoring duration {monitor} must be a positive integer multiple of the interval length {interval}")]
    BadDuration { monitor: f64, interval: f64 },
    #[error("timestamp {ts} lies outside the monitoring period [{start}, {end})")]
    OutOfWindow { ts: f64, start: f64, end: f64 },
}

/// Window layout: monitoring period, interval length, and the
/// timestamp at which interval 0 starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    monitor_duration_s: f64,
    interval_len_s: f64,
    origin_ts: f64,
}

impl WindowConfig {
    pub const DEFAULT_INTERVAL_S: f64 = 60.0;
    pub const DEFAULT_MONITOR_S: f64 = 600.0;

    pub fn new(
        monitor_duration_s: f64,
        interval_len_s: f64,
        origin_ts: f64,
    ) -> Result<Self, WindowError> {
        if !(interval_len_s > 0.0) {
            return Err(WindowError::NonPositiveInterval(interval_len_s));
        }
        if !(monitor_duration_s >= interval_len_s)
            || monitor_duration_s % interval_len_s != 0.0
        {
            return Err(WindowError::BadDuration {
                monitor: monitor_duration_s,
                interval: interval_len_s,
            });
        }
        Ok(WindowConfig {
            monitor_duration_s,
            interval_len_s,
            origin_ts,
        })
    }

    /// Origin aligned down to a whole interval multiple of the first
    /// event's timestamp, so replays are alignment-stable.
    pub fn aligned_to(
        monitor_duration_s: f64,
        interval_len_s: f64,
        first_ts: f64,
    ) -> Result<Self, WindowError> {
        let origin = (first_ts / interval_len_s).floor() * interval_len_s;
        Self::new(monitor_duration_s, interval_len_s, origin)
    }

    pub fn monitor_duration_s(&self) -> f64 {
        self.monitor_duration_s
    }

    pub fn interval_len_s(&self) -> f64 {
        self.interval_len_s
    }

    pub fn origin_ts(&self) -> f64 {
        self.origin_ts
    }

    pub fn end_ts(&self) -> f64 {
        self.origin_ts + self.monitor_duration_s
    }

    pub fn interval_count(&self) -> usize {
        (self.monitor_duration_s / self.interval_len_s).round() as usize
    }
}

/// The distinct MACs that queried one domain within one interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainIntervalBlock {
    pub qname: String,
    pub interval_index: usize,
    pub macs: BTreeSet<MacAddr>,
    pub query_count: u64,
}

/// All blocks of one monitoring period, plus per-host query times for
/// the single-host path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSummary {
    /// Per domain, blocks ordered by interval index.
    pub domains: BTreeMap<String, Vec<DomainIntervalBlock>>,
    /// Per domain, each MAC's query timestamps in ascending order.
    pub host_queries: BTreeMap<String, BTreeMap<MacAddr, Vec<f64>>>,
    /// Total retained query count over the monitoring period (R_DNS).
    pub dns_ratio: u64,
    /// Events outside the monitoring period, dropped.
    pub dropped: u64,
}

/// Maps a timestamp to its interval index within the window.
pub fn assign_interval(ts: f64, config: &WindowConfig) -> Result<usize, WindowError> {
    if ts < config.origin_ts || ts >= config.end_ts() {
        return Err(WindowError::OutOfWindow {
            ts,
            start: config.origin_ts,
            end: config.end_ts(),
        });
    }
    Ok(((ts - config.origin_ts) / config.interval_len_s).floor() as usize)
}

/// Aggregates events into per-domain interval blocks.
///
/// Out-of-window events are dropped and counted. The result is
/// independent of the input order.
pub fn build_blocks<'a, I>(events: I, config: &WindowConfig) -> WindowSummary
where
    I: IntoIterator<Item = &'a DnsQueryEvent>,
{
    let mut summary = WindowSummary::default();
    for event in events {
        let interval = match assign_interval(event.ts, config) {
            Ok(i) => i,
            Err(_) => {
                summary.dropped += 1;
                continue;
            }
        };
        let blocks = summary.domains.entry(event.qname.clone()).or_default();
        match blocks.binary_search_by_key(&interval, |b| b.interval_index) {
            Ok(idx) => {
                let block = &mut blocks[idx];
                block.macs.insert(event.mac);
                block.query_count += 1;
            }
            Err(idx) => blocks.insert(
                idx,
                DomainIntervalBlock {
                    qname: event.qname.clone(),
                    interval_index: interval,
                    macs: BTreeSet::from([event.mac]),
                    query_count: 1,
                },
            ),
        }
        summary
            .host_queries
            .entry(event.qname.clone())
            .or_default()
            .entry(event.mac)
            .or_default()
            .push(event.ts);
        summary.dns_ratio += 1;
    }
    for per_mac in summary.host_queries.values_mut() {
        for times in per_mac.values_mut() {
            times.sort_by(f64::total_cmp);
        }
    }
    summary
}
