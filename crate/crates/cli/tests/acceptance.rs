//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them).

use std::collections::BTreeSet;
use std::fs;
use std::net::Ipv4Addr;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bdm_core::{
    average_rate, build_blocks, classify_score, count_outcomes, detection_rate,
    false_positive_rate, generate_trace, jaccard, parse_pcap_bytes, Classification,
    DetectorConfig, DetectorState, DomainClass, EvaluationCounts, MacAddr, RecordSource,
    SimConfig, SimilarityScore, Threshold, WindowConfig,
};

fn mac(low: u8) -> MacAddr {
    MacAddr::new([0xaa, 0xbb, 0xcc, 0x00, 0x00, low])
}

fn run_pipeline(seed: u64) -> (DetectorState, Vec<bdm_core::GroundTruthLabel>) {
    let config = SimConfig {
        seed,
        ..SimConfig::default()
    };
    let (events, labels) = generate_trace(&config).unwrap();
    let window = WindowConfig::new(600.0, 60.0, 0.0).unwrap();
    let summary = build_blocks(&events, &window);
    let mut state = DetectorState::default();
    state.process_window(&summary);
    (state, labels)
}

#[test]
fn criterion_1_end_to_end_detection() {
    // 10 bots every 60 s over 600 s, 20 legitimate hosts, 50-domain
    // pool. The bot domain must score exactly 1.0; legitimate domains
    // must come out clean for at least 95 of 100 seeds.
    let started = Instant::now();
    let (state, _) = run_pipeline(42);
    let single_run = started.elapsed();
    let record = &state.domains["www.xxx.com"];
    assert_eq!(record.class, DomainClass::Abnormal);
    assert_eq!(record.best_score, Some(1.0));
    assert!(
        single_run.as_secs_f64() < 5.0,
        "single run took {single_run:?}"
    );

    let mut seeds_with_false_positives = 0;
    for seed in 1..=100u64 {
        let (state, labels) = run_pipeline(seed);
        let record = &state.domains["www.xxx.com"];
        assert_eq!(record.class, DomainClass::Abnormal, "seed {seed}");
        assert_eq!(record.best_score, Some(1.0), "seed {seed}");
        let counts = count_outcomes(state.domains.values(), &labels).unwrap();
        if counts.false_positives > 0 {
            seeds_with_false_positives += 1;
        }
    }
    assert!(
        seeds_with_false_positives <= 5,
        "{seeds_with_false_positives} of 100 seeds had false positives"
    );
    println!(
        "ACCEPTANCE PASS: criterion 1 — end-to-end detection (score 1.0, \
         {} / 100 clean seeds, run {:?})",
        100 - seeds_with_false_positives,
        single_run
    );
}

#[test]
fn criterion_2_metric_reproduction() {
    let second = EvaluationCounts::new(2, 1);
    assert!((false_positive_rate(&second).unwrap() - 0.333).abs() <= 0.001);
    assert!((detection_rate(&second).unwrap() - 0.667).abs() <= 0.001);

    let first = EvaluationCounts::new(3, 0);
    assert_eq!(false_positive_rate(&first).unwrap(), 0.0);
    assert_eq!(detection_rate(&first).unwrap(), 1.0);

    let avg_fpr = average_rate(&[0.0, 1.0 / 3.0, 0.0]).unwrap();
    assert_eq!((avg_fpr * 100.0).round() as i64, 11);
    let avg_dr = average_rate(&[1.0, 2.0 / 3.0, 1.0]).unwrap();
    assert_eq!((avg_dr * 100.0).round() as i64, 89);
    println!("ACCEPTANCE PASS: criterion 2 — metric reproduction (FPR 11%, DR 89%)");
}

#[test]
fn criterion_3_jaccard_oracle_suite() {
    let started = Instant::now();
    let universe: Vec<MacAddr> = (0..6).map(mac).collect();
    let subsets: Vec<BTreeSet<MacAddr>> = (1u32..64)
        .map(|bits| {
            universe
                .iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, m)| *m)
                .collect()
        })
        .collect();

    let mut pairs = 0;
    for a in &subsets {
        for b in &subsets {
            // Naive double-loop oracle.
            let mut inter = 0u64;
            let mut union = 0u64;
            for m in a {
                if b.contains(m) {
                    inter += 1;
                }
                union += 1;
            }
            for m in b {
                if !a.contains(m) {
                    union += 1;
                }
            }
            let expected = inter as f64 / union as f64;

            let score = jaccard(a, b).unwrap();
            assert_eq!(score.value(), expected);
            assert_eq!(score.value(), jaccard(b, a).unwrap().value()); // symmetry
            assert!(score.value() >= 0.0 && score.value() <= 1.0); // bounds
            pairs += 1;
        }
        assert_eq!(jaccard(a, a).unwrap().value(), 1.0); // identity
    }
    assert_eq!(pairs, 3969);
    // disjoint
    let x: BTreeSet<MacAddr> = [mac(0)].into();
    let y: BTreeSet<MacAddr> = [mac(1)].into();
    assert_eq!(jaccard(&x, &y).unwrap().value(), 0.0);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "oracle suite took {elapsed:?}");
    println!("ACCEPTANCE PASS: criterion 3 — Jaccard oracle suite (3969 pairs, {elapsed:?})");
}

#[test]
fn criterion_4_threshold_boundary() {
    let t = Threshold::default();
    // Exactly 0.8: z=4 of union 5.
    let exact = SimilarityScore::from_counts(4, 1, 0);
    assert_eq!(classify_score(&exact, t), Classification::Abnormal);
    // Just below: 79/100.
    let below = SimilarityScore::from_counts(79, 21, 0);
    assert_eq!(classify_score(&below, t), Classification::Normal);
    // More boundary neighbors, exact rationals on both sides.
    let above = SimilarityScore::from_counts(81, 19, 0);
    assert_eq!(classify_score(&above, t), Classification::Abnormal);
    let far_scale = SimilarityScore::from_counts(4000, 1000, 0); // 0.8 at scale
    assert_eq!(classify_score(&far_scale, t), Classification::Abnormal);
    let below_scale = SimilarityScore::from_counts(3999, 1001, 0);
    assert_eq!(classify_score(&below_scale, t), Classification::Normal);
    println!("ACCEPTANCE PASS: criterion 4 — threshold boundary exact at 0.8");
}

#[test]
fn criterion_5_single_host_prediction() {
    // Periodic clean host on a fresh domain.
    let mut state = DetectorState::default();
    state.process_single_host("fresh.example", mac(1), &[0.0, 60.0, 120.0, 180.0, 240.0]);
    let record = &state.domains["fresh.example"];
    assert_eq!(record.class, DomainClass::Abnormal);
    assert_eq!(record.source, RecordSource::SingleHostPrediction);

    // Single query stays normal.
    let mut state = DetectorState::default();
    state.process_single_host("once.example", mac(1), &[5.0]);
    assert_eq!(state.domains["once.example"].class, DomainClass::Normal);

    // Blacklisted MAC on a fresh domain.
    let mut state = DetectorState::default();
    state.blacklist.insert(
        mac(9),
        bdm_core::MacBlacklistEntry {
            mac: mac(9),
            implicating_qname: "old.bad".into(),
            added_ts: 0.0,
        },
    );
    state.process_single_host("next.example", mac(9), &[5.0]);
    let record = &state.domains["next.example"];
    assert_eq!(record.class, DomainClass::Abnormal);
    assert_eq!(record.source, RecordSource::SingleHostBlacklistedMac);
    println!("ACCEPTANCE PASS: criterion 5 — single-host prediction decision tree");
}

// Independent packet-crafting oracle, built straight from the wire
// formats; no parser code involved.
mod craft {
    use super::*;

    pub fn dns(qname: &str, qtype: u16, flags: u16) -> Vec<u8> {
        let mut msg = Vec::new();
        msg.extend_from_slice(&0x4242u16.to_be_bytes());
        msg.extend_from_slice(&flags.to_be_bytes());
        msg.extend_from_slice(&1u16.to_be_bytes());
        msg.extend_from_slice(&[0u8; 6]);
        for label in qname.split('.') {
            msg.push(label.len() as u8);
            msg.extend_from_slice(label.as_bytes());
        }
        msg.push(0);
        msg.extend_from_slice(&qtype.to_be_bytes());
        msg.extend_from_slice(&1u16.to_be_bytes());
        msg
    }

    pub fn packet(src_mac: MacAddr, src_ip: Ipv4Addr, dns: &[u8]) -> Vec<u8> {
        let mut pkt = Vec::new();
        pkt.extend_from_slice(&[0xff; 6]);
        pkt.extend_from_slice(&src_mac.octets());
        pkt.extend_from_slice(&0x0800u16.to_be_bytes());
        pkt.push(0x45);
        pkt.push(0);
        pkt.extend_from_slice(&((20 + 8 + dns.len()) as u16).to_be_bytes());
        pkt.extend_from_slice(&[0, 0, 0, 0]);
        pkt.push(64);
        pkt.push(17);
        pkt.extend_from_slice(&[0, 0]);
        pkt.extend_from_slice(&src_ip.octets());
        pkt.extend_from_slice(&Ipv4Addr::new(8, 8, 8, 8).octets());
        pkt.extend_from_slice(&5353u16.to_be_bytes());
        pkt.extend_from_slice(&53u16.to_be_bytes());
        pkt.extend_from_slice(&((8 + dns.len()) as u16).to_be_bytes());
        pkt.extend_from_slice(&[0, 0]);
        pkt.extend_from_slice(dns);
        pkt
    }

    pub fn pcap(records: &[(u32, Vec<u8>, Option<usize>)]) -> Vec<u8> {
        let mut data = Vec::new();
        data.extend_from_slice(&0xa1b2c3d4u32.to_le_bytes());
        data.extend_from_slice(&2u16.to_le_bytes());
        data.extend_from_slice(&4u16.to_le_bytes());
        data.extend_from_slice(&[0u8; 12]);
        data.extend_from_slice(&1u32.to_le_bytes());
        for (sec, packet, truncate_to) in records {
            data.extend_from_slice(&sec.to_le_bytes());
            data.extend_from_slice(&0u32.to_le_bytes());
            data.extend_from_slice(&(packet.len() as u32).to_le_bytes());
            data.extend_from_slice(&(packet.len() as u32).to_le_bytes());
            match truncate_to {
                Some(n) => data.extend_from_slice(&packet[..*n]),
                None => data.extend_from_slice(packet),
            }
        }
        data
    }
}

#[test]
fn criterion_6_ingest_oracle() {
    let query = |sec: u32, low: u8, qname: &str| {
        (
            sec,
            craft::packet(
                mac(low),
                Ipv4Addr::new(10, 0, 0, low),
                &craft::dns(qname, 1, 0x0100),
            ),
            None,
        )
    };
    let response = craft::packet(
        mac(9),
        Ipv4Addr::new(8, 8, 8, 8),
        &craft::dns("www.xxx.com", 1, 0x8180),
    );
    let truncated_query = craft::packet(
        mac(4),
        Ipv4Addr::new(10, 0, 0, 4),
        &craft::dns("cut.example", 1, 0x0100),
    );
    let half = truncated_query.len() / 2;
    let records = vec![
        query(10, 1, "www.xxx.com"),
        query(20, 2, "news.example.org"),
        (25, response, None),
        query(30, 3, "mail.example.org"),
        (40, truncated_query, Some(half)),
    ];
    let (events, skips) = parse_pcap_bytes(&craft::pcap(&records)).unwrap();
    assert_eq!(events.len(), 3);
    assert_eq!(
        events.iter().map(|e| e.qname.as_str()).collect::<Vec<_>>(),
        vec!["www.xxx.com", "news.example.org", "mail.example.org"]
    );
    assert_eq!(
        events.iter().map(|e| e.mac).collect::<Vec<_>>(),
        vec![mac(1), mac(2), mac(3)]
    );
    assert_eq!(skips.bad_dns, 1, "the response is one skip counter");
    assert_eq!(skips.truncated, 1, "the truncated packet is the other");
    assert_eq!(skips.total(), 2);
    println!("ACCEPTANCE PASS: criterion 6 — ingest oracle (3 events, 2 skips)");
}

#[test]
fn criterion_7_persistence_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (mut state, _) = run_pipeline(42);
    state.process_single_host("extra.example", mac(200), &[1.0]);
    state.persist(dir.path()).unwrap();
    let loaded = DetectorState::load(dir.path(), DetectorConfig::default()).unwrap();
    assert_eq!(loaded.domains, state.domains);
    assert_eq!(loaded.blacklist, state.blacklist);

    // Corrupt one line and the load must name it.
    let path = dir.path().join("domains.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[2] = lines[2].replace("\"class\":", "\"klass\":");
    fs::write(&path, lines.join("\n")).unwrap();
    let err = DetectorState::load(dir.path(), DetectorConfig::default()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("line 3"), "{msg}");
    assert!(msg.contains("domains.jsonl"), "{msg}");
    println!("ACCEPTANCE PASS: criterion 7 — persistence round-trip and corruption diagnostics");
}

#[test]
fn criterion_8_replay_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let bdm = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_bdm"))
            .current_dir(dir.path())
            .args(args)
            .output()
            .expect("bdm runs")
    };
    assert!(bdm(&[
        "simulate", "--seed", "42", "--out", "t.jsonl", "--labels", "l.jsonl"
    ])
    .status
    .success());
    let mut outputs = Vec::new();
    for db in ["db1", "db2"] {
        let out = bdm(&["analyze", "--events", "t.jsonl", "--db", db]);
        assert_eq!(out.status.code(), Some(2));
        let read = |name: &str| fs::read(Path::new(dir.path()).join(db).join(name)).unwrap();
        outputs.push((read("domains.jsonl"), read("alerts.jsonl")));
    }
    assert_eq!(outputs[0], outputs[1], "replays must be byte-identical");
    println!("ACCEPTANCE PASS: criterion 8 — replay determinism (byte-identical outputs)");
}
