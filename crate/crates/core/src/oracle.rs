//! Brute-force ground truth at desk scale: exact disjunctness, exact cover-
//! decoder error probability, and a census of polynomial root counts.
//!
//! Every operation enumerates exhaustively and returns exact counts or
//! rationals; the size guards are hard errors rather than sampling
//! fallbacks, so an oracle value can always be trusted as a test expectation.

use itertools::Itertools;
use num_rational::Ratio;

use crate::bits::Bits;
use crate::designs::TestMatrix;
use crate::error::{Error, Result};
use crate::gf::PrimeField;

const DISJUNCT_CHECK_GUARD: u128 = 100_000_000;
const ERROR_PROB_GUARD: u128 = 1_000_000;
const CENSUS_GUARD: u128 = 10_000_000;

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

fn column_masks(m: &TestMatrix) -> Vec<Bits> {
    (0..m.n_items())
        .map(|c| {
            let mut b = Bits::zeros(m.t());
            for r in m.column_support(c) {
                b.set(r);
            }
            b
        })
        .collect()
}

/// True iff no column is covered by the union of any `d` other columns,
/// checked by exhaustive enumeration of all d-subsets.
pub fn is_d_disjunct(m: &TestMatrix, d: usize) -> Result<bool> {
    let n = m.n_items() as u64;
    let checks = binomial(n, d as u64).saturating_mul(n as u128);
    if checks > DISJUNCT_CHECK_GUARD {
        return Err(Error::TooLarge {
            reason: format!(
                "{} cover checks exceed the {} guard",
                checks, DISJUNCT_CHECK_GUARD
            ),
        });
    }
    let masks = column_masks(m);
    for subset in (0..m.n_items()).combinations(d) {
        let mut union = Bits::zeros(m.t());
        for &c in &subset {
            union.or_assign(&masks[c]);
        }
        for (c, mask) in masks.iter().enumerate() {
            if !subset.contains(&c) && mask.is_subset_of(&union) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exact probability, over a uniform d-subset S, that the cover decoder
/// output differs from S on a noiseless outcome. Returned as a reduced
/// rational `failures / C(N, d)`.
pub fn exact_comp_error_prob(m: &TestMatrix, d: usize) -> Result<Ratio<u64>> {
    let n = m.n_items() as u64;
    if d as u64 > n {
        return Err(Error::BadSize {
            reason: format!("d={} exceeds N={}", d, n),
        });
    }
    let total = binomial(n, d as u64);
    if total > ERROR_PROB_GUARD {
        return Err(Error::TooLarge {
            reason: format!(
                "C({}, {}) = {} subsets exceed the {} guard",
                n, d, total, ERROR_PROB_GUARD
            ),
        });
    }
    let masks = column_masks(m);
    let mut failures: u64 = 0;
    for subset in (0..m.n_items()).combinations(d) {
        let mut union = Bits::zeros(m.t());
        for &c in &subset {
            union.or_assign(&masks[c]);
        }
        // the decoder errs exactly when some outside column is covered
        let errs = masks
            .iter()
            .enumerate()
            .any(|(c, mask)| !subset.contains(&c) && mask.is_subset_of(&union));
        if errs {
            failures += 1;
        }
    }
    Ok(Ratio::new(failures, total as u64))
}

/// Exact distribution of the number of distinct roots of a uniform nonzero
/// polynomial of degree at most `k - 1` over GF(q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootCensus {
    pub q: u64,
    pub k: usize,
    /// `counts[l]` = number of nonzero polynomials with exactly `l` distinct
    /// roots, for `l` in `0..k`.
    pub counts: Vec<u64>,
}

impl RootCensus {
    /// Number of nonzero polynomials, `q^k - 1`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `Pr(r = l)` over the uniform nonzero polynomial.
    pub fn prob_roots(&self, l: usize) -> Ratio<u64> {
        Ratio::new(self.counts.get(l).copied().unwrap_or(0), self.total())
    }

    /// `E[r]`.
    pub fn mean_roots(&self) -> Ratio<u64> {
        let num: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(l, &c)| l as u64 * c)
            .sum();
        Ratio::new(num, self.total())
    }

    /// `E[r^2]`.
    pub fn mean_square_roots(&self) -> Ratio<u64> {
        let num: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(l, &c)| (l * l) as u64 * c)
            .sum();
        Ratio::new(num, self.total())
    }
}

/// Enumerates every nonzero polynomial of degree at most `k - 1` over GF(q)
/// and counts its distinct roots by evaluating at all field points.
pub fn root_census(q: u64, k: usize) -> Result<RootCensus> {
    if k < 1 {
        return Err(Error::BadSize {
            reason: "census needs k >= 1".into(),
        });
    }
    let field = PrimeField::new(q)?;
    let mut space: u128 = 1;
    for _ in 0..k {
        space = space.saturating_mul(q as u128);
    }
    if space > CENSUS_GUARD {
        return Err(Error::TooLarge {
            reason: format!("q^k = {} exceeds the {} guard", space, CENSUS_GUARD),
        });
    }
    let mut counts = vec![0u64; k];
    let mut coeffs = vec![0u64; k];
    // odometer over all q^k coefficient vectors, skipping the zero polynomial
    loop {
        let mut i = 0;
        loop {
            coeffs[i] += 1;
            if coeffs[i] < q {
                break;
            }
            coeffs[i] = 0;
            i += 1;
            if i == k {
                return Ok(RootCensus { q, k, counts });
            }
        }
        let mut roots = 0usize;
        for x in 0..q {
            let mut acc = 0u64;
            for &c in coeffs.iter().rev() {
                acc = field.add(field.mul(acc, x), c);
            }
            if acc == 0 {
                roots += 1;
            }
        }
        debug_assert!(
            roots < k,
            "a nonzero polynomial of degree <= k-1 has at most k-1 roots"
        );
        counts[roots] += 1;
    }
}
