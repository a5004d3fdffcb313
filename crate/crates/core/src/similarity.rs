//! Jaccard similarity between MAC-address blocks and the
//! abnormal/normal classification rule.
//!
//! Scores are kept as exact integer counts and compared against the
//! threshold by cross-multiplication, so a score of exactly 0.8 never
//! falls on the wrong side of the boundary through float rounding.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::mac::MacAddr;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("cannot compare an empty block of hosts")]
    EmptyBlock,
    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
}

/// Jaccard similarity between two host blocks, as exact counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimilarityScore {
    /// Hosts present in both blocks.
    pub z: u64,
    /// Hosts only in the first block.
    pub x_only: u64,
    /// Hosts only in the second block.
    pub y_only: u64,
}

impl SimilarityScore {
    pub fn from_counts(z: u64, x_only: u64, y_only: u64) -> Self {
        SimilarityScore { z, x_only, y_only }
    }

    /// Union size, the score's denominator.
    pub fn union(&self) -> u64 {
        self.z + self.x_only + self.y_only
    }

    /// The similarity coefficient z / (z + x + y) as a float.
    pub fn value(&self) -> f64 {
        if self.union() == 0 {
            0.0
        } else {
            self.z as f64 / self.union() as f64
        }
    }

    /// Exact comparison of two scores as rationals.
    pub fn cmp_value(&self, other: &SimilarityScore) -> Ordering {
        // z_a/u_a vs z_b/u_b  <=>  z_a*u_b vs z_b*u_a
        (self.z as u128 * other.union() as u128).cmp(&(other.z as u128 * self.union() as u128))
    }
}

/// Classification of a domain's group behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Abnormal,
    Normal,
}

/// Similarity threshold as an exact rational, default 0.8.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    num: u64,
    den: u64,
}

impl Threshold {
    const SCALE: u64 = 1_000_000;

    /// Converts a float threshold to num/1e6; exact for any threshold
    /// written with six or fewer decimal places.
    pub fn from_f64(t: f64) -> Result<Self, SimilarityError> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(SimilarityError::InvalidThreshold(t));
        }
        Ok(Threshold {
            num: (t * Self::SCALE as f64).round() as u64,
            den: Self::SCALE,
        })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Threshold {
    fn default() -> Self {
        // Table-driven default: 0.8
        Threshold {
            num: 4,
            den: 5,
        }
    }
}

/// Computes the Jaccard similarity between two non-empty MAC blocks.
pub fn jaccard(
    x_block: &BTreeSet<MacAddr>,
    y_block: &BTreeSet<MacAddr>,
) -> Result<SimilarityScore, SimilarityError> {
    if x_block.is_empty() || y_block.is_empty() {
        return Err(SimilarityError::EmptyBlock);
    }
    let z = x_block.intersection(y_block).count() as u64;
    let x_only = x_block.len() as u64 - z;
    let y_only = y_block.len() as u64 - z;
    Ok(SimilarityScore { z, x_only, y_only })
}

/// Maps a score to Abnormal (score >= threshold) or Normal, by exact
/// cross-multiplication.
pub fn classify_score(score: &SimilarityScore, threshold: Threshold) -> Classification {
    // z/union >= num/den  <=>  z*den >= num*union
    if score.z as u128 * threshold.den as u128 >= threshold.num as u128 * score.union() as u128 {
        Classification::Abnormal
    } else {
        Classification::Normal
    }
}

/// The detection precondition: both blocks non-empty and some DNS
/// traffic was observed during the monitoring period.
pub fn detection_allowed(x_size: usize, y_size: usize, dns_ratio: u64) -> bool {
    x_size > 0 && y_size > 0 && dns_ratio > 0
}
