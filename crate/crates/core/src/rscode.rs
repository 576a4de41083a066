//! Reed-Solomon encoding and group-testing parameter selection.
//!
//! A `[n, k]_q` code is fixed by a prime field, a length `n`, a dimension
//! `k`, and the evaluation points `{0, 1, ..., n-1}`. Encoding evaluates the
//! degree-`(k-1)` message polynomial at every point. Parameter selection maps
//! `(N, d)` group-testing instances to a code: `q` is the least prime at or
//! above `c1 * d`, `n` grows with `log2 N` (scaled by `c2` in the noisy
//! regime), and `k` is minimal with `q^k >= N`.
//!
//! All sizing logarithms are base 2. The noisy-regime constant floor 40.57
//! is kept as given even though it originates from a natural-log bound; base
//! 2 is the conservative choice and is applied uniformly.

use crate::error::{Error, Result};
use crate::gf::{smallest_prime_at_least, PrimeField};

/// Noise regime of the measurement channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Noiseless,
    /// Each test outcome flips independently with probability `p`.
    Noisy {
        p: f64,
    },
}

impl Regime {
    pub fn flip_probability(&self) -> f64 {
        match self {
            Regime::Noiseless => 0.0,
            Regime::Noisy { p } => *p,
        }
    }
}

/// Group-testing instance parameters driving code selection.
#[derive(Debug, Clone)]
pub struct GtParams {
    /// Number of items N.
    pub n_items: u64,
    /// Defective-set size d.
    pub d: u64,
    pub regime: Regime,
    /// Error exponent delta > 0.
    pub delta: f64,
    /// Field-order constant: q = least prime >= c1 * d.
    pub c1: f64,
    /// Code-length constant for the noisy regime; unused when noiseless.
    pub c2: f64,
}

/// Noisy-regime floor for `c2`: max(8 / (9 (0.5 - p)^2), 40.57).
pub fn default_c2(p: f64) -> f64 {
    (8.0 / (9.0 * (0.5 - p) * (0.5 - p))).max(40.57)
}

impl GtParams {
    /// Noiseless defaults: delta = 0.2, c1 = 4.
    pub fn noiseless(n_items: u64, d: u64) -> Self {
        GtParams {
            n_items,
            d,
            regime: Regime::Noiseless,
            delta: 0.2,
            c1: 4.0,
            c2: 0.0,
        }
    }

    /// Noisy defaults: delta = 0.2, c1 = 24, c2 at its floor for `p`.
    pub fn noisy(n_items: u64, d: u64, p: f64) -> Self {
        GtParams {
            n_items,
            d,
            regime: Regime::Noisy { p },
            delta: 0.2,
            c1: 24.0,
            c2: default_c2(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.d >= self.n_items {
            return Err(Error::BadSize {
                reason: format!("need 1 <= d < N, got d={} N={}", self.d, self.n_items),
            });
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(Error::BadSize {
                reason: format!("delta must be positive, got {}", self.delta),
            });
        }
        match self.regime {
            Regime::Noiseless => {
                if self.c1 < 4.0 {
                    return Err(Error::BadSize {
                        reason: format!("noiseless c1 must be >= 4, got {}", self.c1),
                    });
                }
            }
            Regime::Noisy { p } => {
                if !(p > 0.0 && p < 0.5) {
                    return Err(Error::BadNoise {
                        reason: format!("p must lie in (0, 0.5), got {}", p),
                    });
                }
                if self.c1 < 24.0 {
                    return Err(Error::BadSize {
                        reason: format!("noisy c1 must be >= 24, got {}", self.c1),
                    });
                }
                let floor = default_c2(p);
                if self.c2 < floor - 1e-9 {
                    return Err(Error::BadSize {
                        reason: format!("noisy c2 must be >= {:.4}, got {}", floor, self.c2),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A Reed-Solomon code over a prime field with evaluation points `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsCode {
    field: PrimeField,
    n: usize,
    k: usize,
    eval_points: Vec<u64>,
}

impl RsCode {
    /// Explicit `[n, k]_q` code; requires `1 <= k <= n <= q`.
    pub fn new(field: PrimeField, n: usize, k: usize) -> Result<Self> {
        let q = field.order();
        if k < 1 || k > n || n as u64 > q {
            return Err(Error::Infeasible {
                reason: format!("need 1 <= k <= n <= q, got k={} n={} q={}", k, n, q),
            });
        }
        Ok(RsCode {
            field,
            n,
            k,
            eval_points: (0..n as u64).collect(),
        })
    }

    /// Selects `(q, n, k)` from the instance parameters.
    ///
    /// Fails with `Infeasible` when the code length would exceed the field
    /// order, i.e. there are not enough distinct evaluation points; this
    /// happens when d is too small relative to log2(N).
    pub fn select_params(params: &GtParams) -> Result<Self> {
        params.validate()?;
        let q_target = (params.c1 * params.d as f64).ceil() as u64;
        let q = smallest_prime_at_least(q_target.max(2));
        let field = PrimeField::new(q)?;
        let log2_n = (params.n_items as f64).log2();
        let n = match params.regime {
            Regime::Noiseless => ((1.0 + params.delta) * log2_n).ceil() as usize,
            Regime::Noisy { .. } => (params.c2 * (1.0 + params.delta) * log2_n).ceil() as usize,
        };
        let n = n.max(1);
        let k = min_dimension(q, params.n_items);
        if (n as u64) > q {
            return Err(Error::Infeasible {
                reason: format!(
                    "code length n = {} exceeds field order q = {}: the construction needs \
                     n <= q distinct evaluation points (d too small relative to log2 N)",
                    n, q
                ),
            });
        }
        RsCode::new(field, n, k)
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn q(&self) -> u64 {
        self.field.order()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eval_points(&self) -> &[u64] {
        &self.eval_points
    }

    /// Number of codewords `q^k`, saturating at `u64::MAX`.
    pub fn capacity(&self) -> u64 {
        let mut acc: u128 = 1;
        for _ in 0..self.k {
            acc = acc.saturating_mul(self.field.order() as u128);
            if acc > u64::MAX as u128 {
                return u64::MAX;
            }
        }
        acc as u64
    }

    /// Rows of the derived pooling matrix: `n * q`.
    pub fn tests(&self) -> usize {
        self.n * self.field.order() as usize
    }

    /// Evaluates the message polynomial at every evaluation point (Horner).
    pub fn encode(&self, message: &[u64]) -> Result<Vec<u64>> {
        if message.len() != self.k {
            return Err(Error::BadMessageLength {
                expected: self.k,
                got: message.len(),
            });
        }
        let q = self.field.order();
        for &m in message {
            if m >= q {
                return Err(Error::IndexOutOfRange { index: m, bound: q });
            }
        }
        Ok(self
            .eval_points
            .iter()
            .map(|&alpha| {
                let mut acc = 0u64;
                for &m in message.iter().rev() {
                    acc = self.field.add(self.field.mul(acc, alpha), m);
                }
                acc
            })
            .collect())
    }

    /// Base-q digits of `j`, least-significant first; bijective on `[0, q^k)`.
    pub fn index_to_message(&self, j: u64) -> Result<Vec<u64>> {
        if j >= self.capacity() {
            return Err(Error::IndexOutOfRange {
                index: j,
                bound: self.capacity(),
            });
        }
        let q = self.field.order();
        let mut digits = Vec::with_capacity(self.k);
        let mut rem = j;
        for _ in 0..self.k {
            digits.push(rem % q);
            rem /= q;
        }
        Ok(digits)
    }
}

/// Least `k >= 1` with `q^k >= n_items`.
fn min_dimension(q: u64, n_items: u64) -> usize {
    let mut k = 1usize;
    let mut acc = q as u128;
    while acc < n_items as u128 {
        acc *= q as u128;
        k += 1;
    }
    k
}
