//! DNS query ingestion.
//!
//! Decodes DNS query traffic from classic pcap capture files and from a
//! line-oriented JSON event log into a canonical stream of
//! [`DnsQueryEvent`] records. Malformed packets are skipped and counted,
//! never fatal: real captures contain noise.

mod dns;
mod pcap;

pub use dns::{decode_dns_query, DnsDecodeError};
pub use pcap::{parse_pcap, parse_pcap_bytes, PcapError, SkipCounters};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::MacAddr;

/// Longest legal domain name in text form, per RFC 1035.
pub const MAX_DOMAIN_LEN: usize = 253;

/// One observed DNS query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnsQueryEvent {
    /// Seconds since the Unix epoch, fractional allowed.
    pub ts: f64,
    /// Hardware address of the querying host.
    pub mac: MacAddr,
    /// IPv4 source address of the query packet.
    pub src_ip: Ipv4Addr,
    /// Normalized domain name: lowercase, no trailing dot.
    pub qname: String,
    /// DNS query type code (1 = A, 28 = AAAA, ...).
    pub qtype: u16,
}

/// Where a capture comes from.
#[derive(Debug, Clone)]
pub enum CaptureSource {
    PcapFile(PathBuf),
    EventLog(PathBuf),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("every line of {path} failed validation ({failures} lines)")]
    AllLinesInvalid { path: PathBuf, failures: usize },
    #[error("domain name is empty")]
    EmptyDomain,
    #[error("domain name exceeds {MAX_DOMAIN_LEN} bytes")]
    DomainTooLong,
}

/// A rejected event-log line, reported by line number.
#[derive(Debug, Clone)]
pub struct SchemaViolation {
    pub line: usize,
    pub reason: String,
}

/// Lowercases a domain name and strips the trailing dot.
///
/// Idempotent; the name is otherwise unchanged.
pub fn normalize_domain(raw: &str) -> Result<String, IngestError> {
    let trimmed = raw.trim_end_matches('.');
    if trimmed.is_empty() {
        return Err(IngestError::EmptyDomain);
    }
    if trimmed.len() > MAX_DOMAIN_LEN {
        return Err(IngestError::DomainTooLong);
    }
    Ok(trimmed.to_ascii_lowercase())
}

/// Raw event-log line shape, before validation and canonicalization.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEventLine {
    ts: f64,
    mac: String,
    src_ip: String,
    qname: String,
    qtype: u16,
}

/// Parses a line-delimited JSON event log.
///
/// Returns the valid events in line order plus a report of rejected
/// lines. Fails outright only when the file is unreadable or every
/// non-empty line is invalid.
pub fn parse_event_log(
    path: &Path,
) -> Result<(Vec<DnsQueryEvent>, Vec<SchemaViolation>), IngestError> {
    let file = File::open(path).map_err(|source| IngestError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut events = Vec::new();
    let mut violations = Vec::new();
    let mut seen_lines = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IngestError::UnreadableFile {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        seen_lines += 1;
        match parse_event_line(&line) {
            Ok(event) => events.push(event),
            Err(reason) => violations.push(SchemaViolation {
                line: idx + 1,
                reason,
            }),
        }
    }
    if seen_lines > 0 && events.is_empty() {
        return Err(IngestError::AllLinesInvalid {
            path: path.to_path_buf(),
            failures: violations.len(),
        });
    }
    Ok((events, violations))
}

fn parse_event_line(line: &str) -> Result<DnsQueryEvent, String> {
    let raw: RawEventLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if raw.ts < 0.0 || !raw.ts.is_finite() {
        return Err(format!("ts {} is negative or non-finite", raw.ts));
    }
    let mac: MacAddr = raw.mac.parse().map_err(|e: crate::mac::InvalidMac| e.to_string())?;
    let src_ip: Ipv4Addr = raw
        .src_ip
        .parse()
        .map_err(|_| format!("invalid IPv4 address {:?}", raw.src_ip))?;
    let qname = normalize_domain(&raw.qname).map_err(|e| e.to_string())?;
    Ok(DnsQueryEvent {
        ts: raw.ts,
        mac,
        src_ip,
        qname,
        qtype: raw.qtype,
    })
}
