//! Cover (COMP) decoding and the noisy threshold decoder.
//!
//! COMP returns every column whose support is contained in the outcome
//! vector; it never produces false negatives on noiseless outcomes. The
//! threshold decoder declares item `i` defective when its matched-positive
//! count reaches `w_i * (1 - p*(1 + tau))`; the comparison is carried out in
//! exact rational arithmetic and ties count as defective.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::bits::Bits;
use crate::designs::TestMatrix;
use crate::error::{Error, Result};

/// Length-t binary outcome vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Measurement {
    bits: Bits,
}

impl Measurement {
    pub fn zeros(len: usize) -> Self {
        Measurement {
            bits: Bits::zeros(len),
        }
    }

    pub fn ones(len: usize) -> Self {
        Measurement {
            bits: Bits::ones(len),
        }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut m = Measurement::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            if v {
                m.set(i);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.len() == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits.get(i)
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.bits.set(i)
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.bits.flip(i)
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    /// Indices of positive tests in increasing order.
    pub fn support(&self) -> Vec<usize> {
        self.bits.iter_ones().collect()
    }

    /// Copies the sub-vector covering `rows`.
    pub fn slice(&self, rows: std::ops::Range<usize>) -> Measurement {
        assert!(rows.end <= self.len());
        let mut out = Measurement::zeros(rows.len());
        for (o, i) in rows.enumerate() {
            if self.get(i) {
                out.set(o);
            }
        }
        out
    }
}

/// Threshold-decoder configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub p: f64,
    pub tau: f64,
}

impl DecoderConfig {
    pub fn new(p: f64, tau: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::BadNoise {
                reason: format!("p must lie in (0, 0.5), got {}", p),
            });
        }
        let cap = (0.75 - 1.5 * p) / p;
        if !(tau > 0.0 && tau < cap) {
            return Err(Error::BadNoise {
                reason: format!("tau must lie in (0, {:.4}) for p={}, got {}", cap, p, tau),
            });
        }
        Ok(DecoderConfig { p, tau })
    }

    pub fn with_default_tau(p: f64) -> Result<Self> {
        DecoderConfig::new(p, default_tau(p)?)
    }
}

/// Default threshold slack: `tau = 3(0.5 - p) / (4p)`.
pub fn default_tau(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::BadNoise {
            reason: format!("p must lie in (0, 0.5), got {}", p),
        });
    }
    Ok(3.0 * (0.5 - p) / (4.0 * p))
}

fn check_len(y: &Measurement, m: &TestMatrix) -> Result<()> {
    if y.len() != m.t() {
        return Err(Error::LengthMismatch {
            expected: m.t(),
            got: y.len(),
        });
    }
    Ok(())
}

/// Returns every item whose column support is contained in `y`, sorted.
///
/// Scans rows: a negative test eliminates all items it contains.
pub fn comp_decode(y: &Measurement, m: &TestMatrix) -> Result<Vec<usize>> {
    check_len(y, m)?;
    let mut candidates = Bits::ones(m.n_items());
    for row in 0..m.t() {
        if !y.get(row) {
            candidates.and_not_assign(m.row_words(row));
        }
    }
    Ok(candidates.iter_ones().collect())
}

/// Result of a candidate-restricted decode, with the number of columns the
/// decoder actually inspected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedDecode {
    pub items: Vec<usize>,
    pub columns_checked: usize,
}

/// COMP restricted to `candidates`; equals `comp_decode(y, m)` intersected
/// with the candidate set, at cost proportional to `|candidates| * t`.
pub fn comp_decode_restricted(
    y: &Measurement,
    m: &TestMatrix,
    candidates: &[usize],
) -> Result<RestrictedDecode> {
    check_len(y, m)?;
    let cands = normalize_candidates(candidates, m.n_items())?;
    let mut items = Vec::new();
    for &c in &cands {
        let covered = (0..m.t()).all(|r| !m.get(r, c) || y.get(r));
        if covered {
            items.push(c);
        }
    }
    Ok(RestrictedDecode {
        items,
        columns_checked: cands.len(),
    })
}

/// Threshold decode over all items: item `i` is defective iff
/// `w_hat_i >= w_i * (1 - p*(1 + tau))`. Zero-weight columns are never
/// declared defective.
pub fn ncomp_decode(y: &Measurement, m: &TestMatrix, cfg: &DecoderConfig) -> Result<Vec<usize>> {
    check_len(y, m)?;
    DecoderConfig::new(cfg.p, cfg.tau)?;
    let mut hits = vec![0u32; m.n_items()];
    for row in 0..m.t() {
        if y.get(row) {
            for item in m.row_ones(row) {
                hits[item] += 1;
            }
        }
    }
    let mut min_hits = MinHits::new(cfg);
    let mut items = Vec::new();
    for (item, (&w, &h)) in m.column_weights().iter().zip(&hits).enumerate() {
        if w > 0 && h >= min_hits.for_weight(w) {
            items.push(item);
        }
    }
    Ok(items)
}

/// Threshold decode restricted to `candidates`.
pub fn ncomp_decode_restricted(
    y: &Measurement,
    m: &TestMatrix,
    cfg: &DecoderConfig,
    candidates: &[usize],
) -> Result<RestrictedDecode> {
    check_len(y, m)?;
    DecoderConfig::new(cfg.p, cfg.tau)?;
    let cands = normalize_candidates(candidates, m.n_items())?;
    let mut min_hits = MinHits::new(cfg);
    let mut items = Vec::new();
    for &c in &cands {
        let w = m.column_weight(c);
        if w == 0 {
            continue;
        }
        let h = (0..m.t()).filter(|&r| m.get(r, c) && y.get(r)).count() as u32;
        if h >= min_hits.for_weight(w) {
            items.push(c);
        }
    }
    Ok(RestrictedDecode {
        items,
        columns_checked: cands.len(),
    })
}

fn normalize_candidates(candidates: &[usize], n_items: usize) -> Result<Vec<usize>> {
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    if let Some(&bad) = cands.iter().find(|&&c| c >= n_items) {
        return Err(Error::IndexOutOfRange {
            index: bad as u64,
            bound: n_items as u64,
        });
    }
    Ok(cands)
}

/// Exact per-weight acceptance threshold: the least integer number of hits
/// satisfying `hits >= w * (1 - p*(1 + tau))`, with `p` and `tau` treated as
/// the exact rationals their f64 bit patterns denote.
struct MinHits<'a> {
    cfg: &'a DecoderConfig,
    cache: HashMap<u32, u32>,
}

impl<'a> MinHits<'a> {
    fn new(cfg: &'a DecoderConfig) -> Self {
        MinHits {
            cfg,
            cache: HashMap::new(),
        }
    }

    fn for_weight(&mut self, w: u32) -> u32 {
        let cfg = self.cfg;
        *self.cache.entry(w).or_insert_with(|| {
            let p = BigRational::from_float(cfg.p).expect("finite p");
            let tau = BigRational::from_float(cfg.tau).expect("finite tau");
            let threshold = BigRational::from_integer(BigInt::from(w))
                * (BigRational::one() - p * (BigRational::one() + tau));
            if threshold.is_negative() || threshold.is_zero() {
                return 0;
            }
            threshold.ceil().to_integer().to_u32().unwrap_or(u32::MAX)
        })
    }
}
