//! Offline DNS-traffic botnet detection.
//!
//! Bots resolve their command-and-control domain as a fixed group of
//! hosts, periodically and briefly; legitimate lookups come from
//! host sets of random size, continuously. This crate detects that
//! group signature: it ingests DNS queries from pcap captures or JSON
//! event logs, aggregates the distinct MACs querying each domain per
//! time interval, scores consecutive interval blocks with the Jaccard
//! similarity coefficient, and classifies domains as normal or
//! abnormal. Domains queried by a lone host are checked against the
//! MAC blacklist and for periodic repetition, which predicts
//! command-and-control domains before the group appears.
//!
//! A built-in simulator emits labeled traces for end-to-end
//! evaluation, and the metrics module computes false-positive and
//! detection rates from detector output plus ground truth.

pub mod detector;
pub mod ingest;
pub mod mac;
pub mod metrics;
pub mod sim;
pub mod similarity;
pub mod window;

pub use detector::{
    Alert, AlertKind, DetectorConfig, DetectorError, DetectorState, DomainClass, DomainRecord,
    MacBlacklistEntry, RecordSource,
};
pub use ingest::{
    decode_dns_query, normalize_domain, parse_event_log, parse_pcap, parse_pcap_bytes,
    CaptureSource, DnsQueryEvent, IngestError, SkipCounters,
};
pub use mac::MacAddr;
pub use metrics::{
    average_rate, count_outcomes, detection_rate, false_positive_rate, EvaluationCounts,
    MetricsError,
};
pub use sim::{generate_trace, GroundTruthLabel, SimConfig, SimError, Truth};
pub use similarity::{
    classify_score, detection_allowed, jaccard, Classification, SimilarityScore, Threshold,
};
pub use window::{assign_interval, build_blocks, DomainIntervalBlock, WindowConfig, WindowSummary};
