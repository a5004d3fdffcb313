//! Classic pcap reader that extracts DNS queries.
//!
//! Only Ethernet II -> IPv4 -> UDP/53 query packets become events;
//! everything else is skipped and counted. pcapng is not supported.

use std::fs::File;
use std::io::Read;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{decode_dns_query, normalize_domain, DnsQueryEvent};
use crate::mac::MacAddr;

const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
const PCAP_MAGIC_SWAPPED: u32 = 0xd4c3_b2a1;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const LINKTYPE_ETHERNET: u32 = 1;
const ETHERTYPE_IPV4: u16 = 0x0800;
const IPPROTO_UDP: u8 = 17;
const DNS_PORT: u16 = 53;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad pcap global header: {0}")]
    MalformedPcapHeader(&'static str),
    #[error("unsupported link type {0}, expected Ethernet (1)")]
    UnsupportedLinkType(u32),
}

/// Counts of packets skipped during a pcap pass.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SkipCounters {
    /// Record header claimed more bytes than the file holds.
    pub truncated: u64,
    /// Not Ethernet II / IPv4 / UDP destination port 53.
    pub non_dns: u64,
    /// Reached the DNS payload but it is a response or malformed.
    pub bad_dns: u64,
}

impl SkipCounters {
    pub fn total(&self) -> u64 {
        self.truncated + self.non_dns + self.bad_dns
    }
}

/// Reads a classic pcap file and returns the DNS query events in
/// file order, plus counters for everything that was skipped.
pub fn parse_pcap(path: &Path) -> Result<(Vec<DnsQueryEvent>, SkipCounters), PcapError> {
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|source| PcapError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    parse_pcap_bytes(&data)
}

/// In-memory variant of [`parse_pcap`].
pub fn parse_pcap_bytes(data: &[u8]) -> Result<(Vec<DnsQueryEvent>, SkipCounters), PcapError> {
    if data.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::MalformedPcapHeader("truncated global header"));
    }
    let magic = u32::from_le_bytes(data[0..4].try_into().unwrap());
    let big_endian = match magic {
        PCAP_MAGIC => false,
        PCAP_MAGIC_SWAPPED => true,
        _ => return Err(PcapError::MalformedPcapHeader("unknown magic")),
    };
    let read_u32 = |bytes: &[u8]| -> u32 {
        let arr: [u8; 4] = bytes.try_into().unwrap();
        if big_endian {
            u32::from_be_bytes(arr)
        } else {
            u32::from_le_bytes(arr)
        }
    };
    let linktype = read_u32(&data[20..24]);
    if linktype != LINKTYPE_ETHERNET {
        return Err(PcapError::UnsupportedLinkType(linktype));
    }

    let mut events = Vec::new();
    let mut skips = SkipCounters::default();
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < data.len() {
        if pos + RECORD_HEADER_LEN > data.len() {
            skips.truncated += 1;
            break;
        }
        let ts_sec = read_u32(&data[pos..pos + 4]);
        let ts_usec = read_u32(&data[pos + 4..pos + 8]);
        let incl_len = read_u32(&data[pos + 8..pos + 12]) as usize;
        pos += RECORD_HEADER_LEN;
        if pos + incl_len > data.len() {
            skips.truncated += 1;
            break;
        }
        let packet = &data[pos..pos + incl_len];
        pos += incl_len;

        let ts = ts_sec as f64 + ts_usec as f64 / 1e6;
        match extract_dns_query(packet, ts) {
            Ok(event) => events.push(event),
            Err(Skip::NonDns) => skips.non_dns += 1,
            Err(Skip::BadDns) => skips.bad_dns += 1,
        }
    }
    Ok((events, skips))
}

enum Skip {
    NonDns,
    BadDns,
}

fn extract_dns_query(packet: &[u8], ts: f64) -> Result<DnsQueryEvent, Skip> {
    // Ethernet II
    if packet.len() < 14 {
        return Err(Skip::NonDns);
    }
    let ethertype = u16::from_be_bytes([packet[12], packet[13]]);
    if ethertype != ETHERTYPE_IPV4 {
        return Err(Skip::NonDns);
    }
    let mac = MacAddr::new(packet[6..12].try_into().unwrap());

    // IPv4
    let ip = &packet[14..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return Err(Skip::NonDns);
    }
    let ihl = (ip[0] & 0x0f) as usize * 4;
    if ihl < 20 || ip.len() < ihl {
        return Err(Skip::NonDns);
    }
    if ip[9] != IPPROTO_UDP {
        return Err(Skip::NonDns);
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);

    // UDP
    let udp = &ip[ihl..];
    if udp.len() < 8 {
        return Err(Skip::NonDns);
    }
    let dst_port = u16::from_be_bytes([udp[2], udp[3]]);
    if dst_port != DNS_PORT {
        return Err(Skip::NonDns);
    }

    let payload = &udp[8..];
    let (raw_qname, qtype) = decode_dns_query(payload).map_err(|_| Skip::BadDns)?;
    let qname = normalize_domain(&raw_qname).map_err(|_| Skip::BadDns)?;
    Ok(DnsQueryEvent {
        ts,
        mac,
        src_ip,
        qname,
        qtype,
    })
}
