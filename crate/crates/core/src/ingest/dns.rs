//! DNS wire-format decoding for the question section (RFC 1035).

use thiserror::Error;

/// DNS header is always 12 bytes.
const DNS_HEADER_LEN: usize = 12;
/// Maximum label length per RFC 1035.
const MAX_LABEL_LEN: usize = 63;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DnsDecodeError {
    #[error("message is a response, not a query")]
    NotAQuery,
    #[error("message carries no question")]
    NoQuestion,
    #[error("message truncated at offset {0}")]
    TruncatedMessage(usize),
    #[error("label of {0} bytes exceeds the 63-byte limit")]
    LabelTooLong(usize),
    #[error("compressed name in question section at offset {0}")]
    CompressedQname(usize),
}

/// Decodes the first question of a DNS query message.
///
/// `payload` must begin at the DNS header. Validates QR = 0 and
/// QDCOUNT >= 1, then walks the first question's label sequence.
/// Returns the dot-joined qname as it appears on the wire (no
/// normalization) plus the QTYPE.
///
/// Compression pointers are rejected: queries in practice never
/// compress the question section.
pub fn decode_dns_query(payload: &[u8]) -> Result<(String, u16), DnsDecodeError> {
    if payload.len() < DNS_HEADER_LEN {
        return Err(DnsDecodeError::TruncatedMessage(payload.len()));
    }
    let flags = u16::from_be_bytes([payload[2], payload[3]]);
    if flags & 0x8000 != 0 {
        return Err(DnsDecodeError::NotAQuery);
    }
    let qdcount = u16::from_be_bytes([payload[4], payload[5]]);
    if qdcount == 0 {
        return Err(DnsDecodeError::NoQuestion);
    }

    let mut pos = DNS_HEADER_LEN;
    let mut labels: Vec<&[u8]> = Vec::new();
    loop {
        let len = *payload
            .get(pos)
            .ok_or(DnsDecodeError::TruncatedMessage(pos))? as usize;
        if len & 0xc0 == 0xc0 {
            return Err(DnsDecodeError::CompressedQname(pos));
        }
        pos += 1;
        if len == 0 {
            break;
        }
        if len > MAX_LABEL_LEN {
            return Err(DnsDecodeError::LabelTooLong(len));
        }
        let end = pos + len;
        let label = payload
            .get(pos..end)
            .ok_or(DnsDecodeError::TruncatedMessage(payload.len()))?;
        labels.push(label);
        pos = end;
    }

    let qtype_bytes = payload
        .get(pos..pos + 2)
        .ok_or(DnsDecodeError::TruncatedMessage(payload.len()))?;
    let qtype = u16::from_be_bytes([qtype_bytes[0], qtype_bytes[1]]);

    let qname = labels
        .iter()
        .map(|l| String::from_utf8_lossy(l).into_owned())
        .collect::<Vec<_>>()
        .join(".");
    Ok((qname, qtype))
}
