//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use bdm_core::detector::{append_alerts, ALERTS_FILE, BLACKLIST_FILE, DOMAINS_FILE};
use bdm_core::{
    average_rate, build_blocks, count_outcomes, detection_rate, false_positive_rate,
    generate_trace, parse_event_log, parse_pcap, sim, Alert, DetectorConfig, DetectorState,
    DnsQueryEvent, DomainClass, EvaluationCounts, GroundTruthLabel, MetricsError, SimConfig,
    Threshold, WindowConfig,
};

use crate::DetectorArgs;

impl DetectorArgs {
    fn to_config(&self) -> Result<DetectorConfig> {
        let threshold = Threshold::from_f64(self.threshold)
            .with_context(|| format!("bad --threshold {}", self.threshold))?;
        Ok(DetectorConfig {
            threshold,
            group_min: self.group_min,
            repeat_min: self.repeat_min,
            periodicity_tolerance: self.periodicity_tol,
            require_both_signals: self.strict_single_host,
        })
    }
}

pub fn analyze(
    pcap: Option<PathBuf>,
    events_path: Option<PathBuf>,
    db: PathBuf,
    args: DetectorArgs,
) -> Result<u8> {
    let config = args.to_config()?;
    // Validate the window shape before touching any file.
    WindowConfig::new(args.tm, args.interval, 0.0)?;

    let events = match (&pcap, &events_path) {
        (Some(path), None) => {
            let (events, skips) = parse_pcap(path)?;
            if skips.total() > 0 {
                println!(
                    "skipped packets: {} truncated, {} non-dns, {} bad-dns",
                    skips.truncated, skips.non_dns, skips.bad_dns
                );
            }
            events
        }
        (None, Some(path)) => {
            let (events, violations) = parse_event_log(path)?;
            for v in &violations {
                eprintln!("{}:{}: {}", path.display(), v.line, v.reason);
            }
            events
        }
        _ => bail!("exactly one of --pcap or --events is required"),
    };

    let mut state = DetectorState::load(&db, config)?;
    let domains_before = state.domains.len();

    let mut all_alerts: Vec<Alert> = Vec::new();
    let mut dropped = 0u64;
    if let Some(first_ts) = events.first().map(|e| e.ts) {
        let origin0 = (first_ts / args.interval).floor() * args.interval;
        // Each monitoring period is processed independently.
        let mut periods: BTreeMap<u64, Vec<&DnsQueryEvent>> = BTreeMap::new();
        for event in &events {
            let p = ((event.ts - origin0) / args.tm).floor();
            if p < 0.0 {
                dropped += 1;
                continue;
            }
            periods.entry(p as u64).or_default().push(event);
        }
        for (p, chunk) in periods {
            let window =
                WindowConfig::new(args.tm, args.interval, origin0 + p as f64 * args.tm)?;
            let summary = build_blocks(chunk.into_iter(), &window);
            dropped += summary.dropped;
            all_alerts.extend(state.process_window(&summary));
        }
    }

    state.persist(&db)?;
    append_alerts(&db, &all_alerts)?;

    let abnormal = state
        .domains
        .values()
        .filter(|r| r.class == DomainClass::Abnormal)
        .count();
    println!(
        "config: interval={}s tm={}s threshold={} group_min={} repeat_min={} periodicity_tol={}",
        args.interval,
        args.tm,
        config.threshold.value(),
        args.group_min,
        args.repeat_min,
        args.periodicity_tol
    );
    println!(
        "events={} dropped={} domains={} ({} new) abnormal={} alerts={}",
        events.len(),
        dropped,
        state.domains.len(),
        state.domains.len() - domains_before.min(state.domains.len()),
        abnormal,
        all_alerts.len()
    );
    for alert in &all_alerts {
        println!(
            "ALERT {:?} {} macs={} score={}",
            alert.kind,
            alert.qname,
            alert.macs.len(),
            alert
                .score
                .map_or_else(|| "-".to_string(), |s| format!("{s:.3}")),
        );
    }
    Ok(if all_alerts.is_empty() { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    bots: usize,
    legit: usize,
    period: f64,
    tm: f64,
    pool: usize,
    rate: f64,
    bot_domain: String,
    precheck: bool,
    seed: u64,
    out: PathBuf,
    labels_path: PathBuf,
) -> Result<u8> {
    let config = SimConfig {
        bot_count: bots,
        bot_domain,
        bot_period_s: period,
        legit_count: legit,
        legit_domain_pool: sim::default_domain_pool(pool),
        legit_rate_per_host: rate,
        duration_s: tm,
        seed,
        precheck_host: precheck,
    };
    let (events, labels) = generate_trace(&config)?;
    write_jsonl(&out, &events)?;
    write_jsonl(&labels_path, &labels)?;
    println!(
        "wrote {} events to {} and {} labels to {}",
        events.len(),
        out.display(),
        labels.len(),
        labels_path.display()
    );
    Ok(0)
}

#[derive(Serialize)]
struct RunReport {
    db: PathBuf,
    counts: EvaluationCounts,
    total_detected: u64,
    false_positive_rate: Option<f64>,
    detection_rate: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    labels: PathBuf,
    runs: Vec<RunReport>,
    average_false_positive_rate: Option<f64>,
    average_detection_rate: Option<f64>,
    /// The denominator of both rates is T_p + F_p (detected domains),
    /// not the count of all negatives.
    rate_denominator: &'static str,
}

pub fn report(dbs: Vec<PathBuf>, labels_path: PathBuf, out: PathBuf) -> Result<u8> {
    let labels = read_labels(&labels_path)?;
    let mut runs = Vec::new();
    let mut fprs = Vec::new();
    let mut drs = Vec::new();
    for db in dbs {
        let state = DetectorState::load(&db, DetectorConfig::default())?;

        let unlabeled: Vec<&str> = state
            .domains
            .values()
            .filter(|r| {
                r.class == DomainClass::Abnormal
                    && !labels.iter().any(|l| l.qname == r.qname)
            })
            .map(|r| r.qname.as_str())
            .collect();
        if !unlabeled.is_empty() {
            bail!(
                "abnormal domains without ground truth in {}: {}",
                db.display(),
                unlabeled.join(", ")
            );
        }

        let counts = count_outcomes(state.domains.values(), &labels)?;
        let (fpr, dr) = match (false_positive_rate(&counts), detection_rate(&counts)) {
            (Ok(f), Ok(d)) => {
                fprs.push(f);
                drs.push(d);
                (Some(f), Some(d))
            }
            (Err(MetricsError::NoDetections), _) | (_, Err(MetricsError::NoDetections)) => {
                println!("{}: no detections, rates undefined", db.display());
                (None, None)
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        if let (Some(f), Some(d)) = (fpr, dr) {
            println!(
                "{}: T_p={} F_p={} FPR {:.3} ({:.0}%) / DR {:.3} ({:.0}%)",
                db.display(),
                counts.true_positives,
                counts.false_positives,
                f,
                f * 100.0,
                d,
                d * 100.0
            );
        }
        runs.push(RunReport {
            db,
            counts,
            total_detected: counts.total_detected(),
            false_positive_rate: fpr,
            detection_rate: dr,
        });
    }

    let (avg_fpr, avg_dr) = if fprs.is_empty() {
        (None, None)
    } else {
        (Some(average_rate(&fprs)?), Some(average_rate(&drs)?))
    };
    if let (Some(f), Some(d)) = (avg_fpr, avg_dr) {
        println!(
            "average over {} run(s): FPR {:.0}% / DR {:.0}%",
            fprs.len(),
            f * 100.0,
            d * 100.0
        );
    }

    let report = Report {
        labels: labels_path,
        runs,
        average_false_positive_rate: avg_fpr,
        average_detection_rate: avg_dr,
        rate_denominator: "detected domains (T_p + F_p)",
    };
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(&out, json).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(0)
}

pub fn db_list(db: PathBuf) -> Result<u8> {
    let state = DetectorState::load(&db, DetectorConfig::default())?;
    if state.domains.is_empty() && state.blacklist.is_empty() {
        println!("empty database");
        return Ok(0);
    }
    for record in state.domains.values() {
        println!(
            "domain {} {:?} score={} source={:?} first={:.3} last={:.3}",
            record.qname,
            record.class,
            record
                .best_score
                .map_or_else(|| "-".to_string(), |s| format!("{s:.3}")),
            record.source,
            record.first_seen_ts,
            record.last_seen_ts
        );
    }
    for entry in state.blacklist.values() {
        println!(
            "blacklist {} via {} added={:.3}",
            entry.mac, entry.implicating_qname, entry.added_ts
        );
    }
    Ok(0)
}

pub fn db_clear(db: PathBuf, yes: bool) -> Result<u8> {
    if !yes {
        bail!("refusing to clear {} without --yes", db.display());
    }
    for name in [DOMAINS_FILE, BLACKLIST_FILE, ALERTS_FILE] {
        let path = db.join(name);
        match fs::remove_file(&path) {
            Ok(()) => println!("removed {}", path.display()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e).with_context(|| format!("removing {}", path.display())),
        }
    }
    Ok(0)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut file =
        File::create(path).with_context(|| format!("creating {}", path.display()))?;
    for item in items {
        let line = serde_json::to_string(item)?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<GroundTruthLabel>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let label: GroundTruthLabel = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        labels.push(label);
    }
    Ok(labels)
}
