//! Labeled DNS traffic simulator.
//!
//! Generates a bot group querying one domain periodically, legitimate
//! hosts querying random domains continuously, and an optional
//! botmaster pre-check host — with ground-truth labels for every
//! domain that appears. Identical configs yield byte-identical traces.

use std::net::Ipv4Addr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DnsQueryEvent;
use crate::mac::MacAddr;

/// Pre-check repeats before the host counts as periodic downstream.
const PRECHECK_REPEATS: usize = 3;
/// Nominal interval used to convert per-interval rates to totals.
const NOMINAL_INTERVAL_S: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub bot_count: usize,
    pub bot_domain: String,
    /// Seconds between bot query bursts.
    pub bot_period_s: f64,
    pub legit_count: usize,
    pub legit_domain_pool: Vec<String>,
    /// Mean queries per host per 60 s interval.
    pub legit_rate_per_host: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub precheck_host: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            bot_count: 10,
            bot_domain: "www.xxx.com".to_string(),
            bot_period_s: 60.0,
            legit_count: 20,
            legit_domain_pool: default_domain_pool(50),
            legit_rate_per_host: 0.5,
            duration_s: 600.0,
            seed: 0,
            precheck_host: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.bot_period_s > 0.0) {
            return Err(SimError::InvalidConfig("bot period must be positive".into()));
        }
        if !(self.duration_s > 0.0) {
            return Err(SimError::InvalidConfig("duration must be positive".into()));
        }
        if self.bot_count + self.legit_count == 0 && !self.precheck_host {
            return Err(SimError::InvalidConfig("empty host population".into()));
        }
        if self.legit_count > 0 && self.legit_domain_pool.is_empty() {
            return Err(SimError::InvalidConfig(
                "legitimate hosts need a non-empty domain pool".into(),
            ));
        }
        if self.legit_count > 0 && !(self.legit_rate_per_host >= 0.0) {
            return Err(SimError::InvalidConfig("legitimate rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// A pool of synthetic legitimate domain names.
pub fn default_domain_pool(size: usize) -> Vec<String> {
    (0..size).map(|i| format!("site-{i:03}.example.net")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Botnet,
    Legitimate,
}

/// Ground truth for one domain of the emitted trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub qname: String,
    pub truth: Truth,
}

fn bot_mac(index: usize) -> MacAddr {
    let n = index as u16 + 1;
    MacAddr::new([0xaa, 0xbb, 0xcc, 0x00, (n >> 8) as u8, n as u8])
}

fn legit_mac(index: usize) -> MacAddr {
    let n = index as u16 + 1;
    MacAddr::new([0xaa, 0xbb, 0xcc, 0x01, (n >> 8) as u8, n as u8])
}

fn precheck_mac() -> MacAddr {
    MacAddr::new([0xaa, 0xbb, 0xcc, 0x02, 0x00, 0x01])
}

fn host_ip(subnet: u8, index: usize) -> Ipv4Addr {
    let n = index as u16 + 1;
    Ipv4Addr::new(10, subnet, (n >> 8) as u8, n as u8)
}

/// Generates a labeled trace from the config.
///
/// Bots burst once per period, every bot in every burst, jittered
/// within the first second of the period so a burst never straddles an
/// interval boundary. Legitimate hosts query uniformly over the
/// duration from the domain pool. Events come back sorted by
/// timestamp.
pub fn generate_trace(
    config: &SimConfig,
) -> Result<(Vec<DnsQueryEvent>, Vec<GroundTruthLabel>), SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut events = Vec::new();

    let bursts = (config.duration_s / config.bot_period_s).floor() as usize;
    for k in 0..bursts {
        let base = k as f64 * config.bot_period_s;
        for b in 0..config.bot_count {
            let jitter: f64 = rng.random_range(0.0..1.0);
            events.push(DnsQueryEvent {
                ts: base + jitter,
                mac: bot_mac(b),
                src_ip: host_ip(0, b),
                qname: config.bot_domain.clone(),
                qtype: 1,
            });
        }
    }

    for h in 0..config.legit_count {
        let mean_total =
            config.legit_rate_per_host * config.duration_s / NOMINAL_INTERVAL_S;
        let count = if mean_total > 0.0 {
            Poisson::new(mean_total)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        for _ in 0..count {
            let ts: f64 = rng.random_range(0.0..config.duration_s);
            let domain_idx = rng.random_range(0..config.legit_domain_pool.len());
            events.push(DnsQueryEvent {
                ts,
                mac: legit_mac(h),
                src_ip: host_ip(1, h),
                qname: config.legit_domain_pool[domain_idx].clone(),
                qtype: 1,
            });
        }
    }

    if config.precheck_host {
        // The botmaster's validity check: periodic queries landing
        // exactly on the period boundary, just ahead of each jittered
        // bot burst.
        for k in 0..PRECHECK_REPEATS {
            let ts = k as f64 * config.bot_period_s;
            if ts >= config.duration_s {
                break;
            }
            events.push(DnsQueryEvent {
                ts,
                mac: precheck_mac(),
                src_ip: Ipv4Addr::new(10, 2, 0, 1),
                qname: config.bot_domain.clone(),
                qtype: 1,
            });
        }
    }

    events.sort_by(|a, b| {
        a.ts.total_cmp(&b.ts)
            .then_with(|| a.mac.cmp(&b.mac))
            .then_with(|| a.qname.cmp(&b.qname))
    });

    let mut labels = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for event in &events {
        if seen.insert(event.qname.clone()) {
            let truth = if event.qname == config.bot_domain && (config.bot_count > 0 || config.precheck_host) {
                Truth::Botnet
            } else {
                Truth::Legitimate
            };
            labels.push(GroundTruthLabel {
                qname: event.qname.clone(),
                truth,
            });
        }
    }
    labels.sort_by(|a, b| a.qname.cmp(&b.qname));

    Ok((events, labels))
}
