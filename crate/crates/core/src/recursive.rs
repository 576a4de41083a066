//! Efficiently decodable construction: recursive half-index matrices stacked
//! on a Reed-Solomon pooling layer, decoded through a Cartesian candidate
//! set of at most d^2 items.
//!
//! The index space is split into high and low bit halves. Two copies of a
//! recursively built child matrix (columns replicated by high respectively
//! low bits) recover the two half-indices; their Cartesian product is then
//! screened by a restricted cover decode over the stacked pooling layer. The
//! error budget at a node splits as `eps/4` per child decode and `eps/2` for
//! the pooling layer.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use crate::decoders::{
    comp_decode_restricted, ncomp_decode_restricted, DecoderConfig, Measurement,
};
use crate::designs::{ks_build, stack, MatrixBuilder, TestMatrix};
use crate::error::{Error, Result};
use crate::gf::{smallest_prime_at_least, PrimeField};
use crate::rscode::{default_c2, Regime, RsCode};

/// One level of the recursive construction.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeNode {
    /// Every item tested `reps` times; decoded by strict majority vote.
    /// `reps = 1` in the noiseless regime.
    Individual { reps: usize },
    /// A single pooling layer decoded by a full restricted scan; used when
    /// the universe is at most d^2 items (or the bit split cannot shrink it).
    Direct,
    /// Half-index recursion.
    Split {
        high_bits: u32,
        low_bits: u32,
        /// Scheme for the `2^high_bits` half-index universe; shared by both
        /// the high and the low decode.
        child: Box<RecursiveScheme>,
        /// The pooling layer over the full item set.
        ks_layer: TestMatrix,
        f_rows: Range<usize>,
        l_rows: Range<usize>,
        ks_rows: Range<usize>,
    },
}

/// A recursively built, efficiently decodable test plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveScheme {
    n_items: usize,
    d: usize,
    epsilon: f64,
    regime: Regime,
    matrix: TestMatrix,
    node: SchemeNode,
}

/// Result of a scheme decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeDecode {
    pub items: Vec<usize>,
    /// Columns inspected by this scheme's final (restricted) stage; at most
    /// d^2 at a split node.
    pub final_stage_checks: usize,
}

impl RecursiveScheme {
    /// Builds the scheme for `n_items` items with at most `d` defectives and
    /// target error budget `epsilon`.
    pub fn build(n_items: usize, d: usize, epsilon: f64, regime: Regime) -> Result<Self> {
        if n_items < 1 || d < 1 {
            return Err(Error::BadSize {
                reason: format!("need N >= 1 and d >= 1, got N={} d={}", n_items, d),
            });
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::BadSize {
                reason: format!("epsilon must lie in (0, 1), got {}", epsilon),
            });
        }
        if let Regime::Noisy { p } = regime {
            if !(p > 0.0 && p < 0.5) {
                return Err(Error::BadNoise {
                    reason: format!("p must lie in (0, 0.5), got {}", p),
                });
            }
        }
        Self::build_inner(n_items, d, epsilon, regime)
    }

    fn build_inner(n_items: usize, d: usize, epsilon: f64, regime: Regime) -> Result<Self> {
        if n_items <= d {
            let reps = match regime {
                Regime::Noiseless => 1,
                Regime::Noisy { p } => {
                    let num = 8.0 * (2.0 * n_items as f64 / epsilon).ln();
                    (num / ((1.0 - 2.0 * p) * (1.0 - 2.0 * p))).ceil() as usize
                }
            };
            let mut b = MatrixBuilder::new(n_items * reps, n_items);
            for item in 0..n_items {
                for rep in 0..reps {
                    b.set(item * reps + rep, item);
                }
            }
            let matrix = b.build(format!("individual(reps={})", reps));
            return Ok(RecursiveScheme {
                n_items,
                d,
                epsilon,
                regime,
                matrix,
                node: SchemeNode::Individual { reps },
            });
        }

        let bit_width = (n_items - 1).ilog2() + 1;
        let high_bits = bit_width.div_ceil(2);
        let direct = d.checked_mul(d).map(|dd| n_items <= dd).unwrap_or(true)
            // a 2-item universe cannot shrink under the bit split
            || (1usize << high_bits) >= n_items;
        if direct {
            let matrix = ks_for_budget(n_items, d, epsilon, regime)?;
            return Ok(RecursiveScheme {
                n_items,
                d,
                epsilon,
                regime,
                matrix,
                node: SchemeNode::Direct,
            });
        }

        let low_bits = bit_width - high_bits;
        let child = Self::build_inner(1usize << high_bits, d, epsilon / 4.0, regime)?;
        let ks_layer = ks_for_budget(n_items, d, epsilon / 2.0, regime)?;
        let m_f = replicate_columns(child.matrix(), n_items, |i| i >> low_bits, "high");
        let m_l = replicate_columns(
            child.matrix(),
            n_items,
            |i| i & ((1 << low_bits) - 1),
            "low",
        );
        let stacked = stack(&[&m_f, &m_l, &ks_layer])?;
        let node = SchemeNode::Split {
            high_bits,
            low_bits,
            child: Box::new(child),
            ks_layer,
            f_rows: stacked.ranges[0].clone(),
            l_rows: stacked.ranges[1].clone(),
            ks_rows: stacked.ranges[2].clone(),
        };
        Ok(RecursiveScheme {
            n_items,
            d,
            epsilon,
            regime,
            matrix: stacked.matrix,
            node,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// The full stacked measurement matrix for this scheme.
    pub fn matrix(&self) -> &TestMatrix {
        &self.matrix
    }

    pub fn node(&self) -> &SchemeNode {
        &self.node
    }

    /// Total number of tests.
    pub fn predicted_tests(&self) -> usize {
        self.matrix.t()
    }

    /// Exact structural identity: at every split node the total row count
    /// equals twice the child's plus the pooling layer's.
    pub fn recursion_identity_holds(&self) -> bool {
        match &self.node {
            SchemeNode::Individual { .. } | SchemeNode::Direct => true,
            SchemeNode::Split {
                child,
                ks_layer,
                f_rows,
                l_rows,
                ks_rows,
                ..
            } => {
                let t_child = child.matrix().t();
                self.matrix.t() == 2 * t_child + ks_layer.t()
                    && f_rows.len() == t_child
                    && l_rows.len() == t_child
                    && ks_rows.len() == ks_layer.t()
                    && child.recursion_identity_holds()
            }
        }
    }

    /// Decodes an outcome vector for the whole scheme.
    pub fn decode(&self, y: &Measurement) -> Result<SchemeDecode> {
        if y.len() != self.matrix.t() {
            return Err(Error::LengthMismatch {
                expected: self.matrix.t(),
                got: y.len(),
            });
        }
        match &self.node {
            SchemeNode::Individual { reps } => {
                let mut items = Vec::new();
                for item in 0..self.n_items {
                    let hits = (0..*reps).filter(|rep| y.get(item * reps + rep)).count();
                    if 2 * hits > *reps {
                        items.push(item);
                    }
                }
                Ok(SchemeDecode {
                    items,
                    final_stage_checks: self.n_items,
                })
            }
            SchemeNode::Direct => {
                let all: Vec<usize> = (0..self.n_items).collect();
                let out = self.restricted_decode(y, &self.matrix, &all)?;
                Ok(SchemeDecode {
                    items: out.0,
                    final_stage_checks: out.1,
                })
            }
            SchemeNode::Split {
                low_bits,
                child,
                ks_layer,
                f_rows,
                l_rows,
                ks_rows,
                ..
            } => {
                let high = child.decode(&y.slice(f_rows.clone()))?;
                let low = child.decode(&y.slice(l_rows.clone()))?;
                if high.items.len() > self.d || low.items.len() > self.d {
                    return Ok(SchemeDecode {
                        items: Vec::new(),
                        final_stage_checks: 0,
                    });
                }
                let candidates =
                    combine_candidates(&high.items, &low.items, *low_bits, self.n_items);
                let out =
                    self.restricted_decode(&y.slice(ks_rows.clone()), ks_layer, &candidates)?;
                Ok(SchemeDecode {
                    items: out.0,
                    final_stage_checks: out.1,
                })
            }
        }
    }

    fn restricted_decode(
        &self,
        y: &Measurement,
        matrix: &TestMatrix,
        candidates: &[usize],
    ) -> Result<(Vec<usize>, usize)> {
        let out = match self.regime {
            Regime::Noiseless => comp_decode_restricted(y, matrix, candidates)?,
            Regime::Noisy { p } => {
                let cfg = DecoderConfig::with_default_tau(p)?;
                ncomp_decode_restricted(y, matrix, &cfg, candidates)?
            }
        };
        Ok((out.items, out.columns_checked))
    }

    /// Writes the stacked matrix (GTM1) and a key-value sidecar describing
    /// the node tree, row ranges, bit widths, and error budgets.
    pub fn write(&self, matrix_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<()> {
        crate::designs::write_matrix(&self.matrix, matrix_path)?;
        fs::write(meta_path, self.sidecar_text())?;
        Ok(())
    }

    /// Reads a scheme back: rebuilds it from the sidecar parameters (builds
    /// are deterministic) and verifies both the sidecar and the stored
    /// matrix match the rebuilt scheme exactly.
    pub fn read(matrix_path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<Self> {
        let meta = fs::read_to_string(meta_path.as_ref())?;
        let mut n_items = None;
        let mut d = None;
        let mut epsilon = None;
        let mut noise = None;
        for line in meta.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n_items" => n_items = value.parse::<usize>().ok(),
                "defectives" => d = value.parse::<usize>().ok(),
                "epsilon" => epsilon = value.parse::<f64>().ok(),
                "noise" => noise = value.parse::<f64>().ok(),
                _ => {}
            }
        }
        let (n_items, d, epsilon, noise) = match (n_items, d, epsilon, noise) {
            (Some(a), Some(b), Some(c), Some(e)) => (a, b, c, e),
            _ => {
                return Err(Error::Format {
                    reason: "sidecar missing n_items/defectives/epsilon/noise".into(),
                })
            }
        };
        let regime = if noise == 0.0 {
            Regime::Noiseless
        } else {
            Regime::Noisy { p: noise }
        };
        let scheme = Self::build(n_items, d, epsilon, regime)?;
        if scheme.sidecar_text() != meta {
            return Err(Error::Format {
                reason: "sidecar does not match the scheme rebuilt from its parameters".into(),
            });
        }
        let matrix = crate::designs::read_matrix(matrix_path)?;
        if matrix != scheme.matrix {
            return Err(Error::Format {
                reason: "stored matrix does not match the rebuilt scheme".into(),
            });
        }
        Ok(scheme)
    }

    pub fn sidecar_text(&self) -> String {
        let mut out = String::new();
        out.push_str("format = GTS1\n");
        let _ = writeln!(out, "n_items = {}", self.n_items);
        let _ = writeln!(out, "defectives = {}", self.d);
        let _ = writeln!(out, "epsilon = {}", self.epsilon);
        let _ = writeln!(out, "noise = {}", self.regime.flip_probability());
        let _ = writeln!(out, "tests = {}", self.matrix.t());
        self.describe_node("root", &mut out);
        out
    }

    fn describe_node(&self, path: &str, out: &mut String) {
        let _ = writeln!(out, "node.{}.n_items = {}", path, self.n_items);
        let _ = writeln!(out, "node.{}.epsilon = {}", path, self.epsilon);
        let _ = writeln!(out, "node.{}.tests = {}", path, self.matrix.t());
        match &self.node {
            SchemeNode::Individual { reps } => {
                let _ = writeln!(out, "node.{}.kind = individual", path);
                let _ = writeln!(out, "node.{}.reps = {}", path, reps);
            }
            SchemeNode::Direct => {
                let _ = writeln!(out, "node.{}.kind = direct", path);
            }
            SchemeNode::Split {
                high_bits,
                low_bits,
                child,
                f_rows,
                l_rows,
                ks_rows,
                ..
            } => {
                let _ = writeln!(out, "node.{}.kind = split", path);
                let _ = writeln!(out, "node.{}.high_bits = {}", path, high_bits);
                let _ = writeln!(out, "node.{}.low_bits = {}", path, low_bits);
                let _ = writeln!(
                    out,
                    "node.{}.rows_f = {}..{}",
                    path, f_rows.start, f_rows.end
                );
                let _ = writeln!(
                    out,
                    "node.{}.rows_l = {}..{}",
                    path, l_rows.start, l_rows.end
                );
                let _ = writeln!(
                    out,
                    "node.{}.rows_ks = {}..{}",
                    path, ks_rows.start, ks_rows.end
                );
                child.describe_node(&format!("{}.0", path), out);
            }
        }
    }
}

/// Pooling layer sized so the noiseless union bound (or its noisy analogue)
/// meets the budget: noiseless `n = ceil(log2(N/eps))` with `q` the least
/// prime at or above `4d`; noisy `n = ceil(c2 * log2(N/eps))` with `q` at or
/// above `24d`.
fn ks_for_budget(n_items: usize, d: usize, epsilon: f64, regime: Regime) -> Result<TestMatrix> {
    let (c1, n) = match regime {
        Regime::Noiseless => (4.0, (n_items as f64 / epsilon).log2().ceil() as usize),
        Regime::Noisy { p } => {
            let c2 = default_c2(p);
            (
                24.0,
                (c2 * (n_items as f64 / epsilon).log2()).ceil() as usize,
            )
        }
    };
    let q = smallest_prime_at_least(((c1 * d as f64).ceil() as u64).max(2));
    let field = PrimeField::new(q)?;
    let mut k = 1usize;
    let mut cap = q as u128;
    while cap < n_items as u128 {
        cap *= q as u128;
        k += 1;
    }
    let code = RsCode::new(field, n, k)?;
    ks_build(&code, n_items)
}

/// Expands a matrix over the half-index universe to `n_items` columns:
/// column `i` of the result equals column `key(i)` of `source`.
fn replicate_columns(
    source: &TestMatrix,
    n_items: usize,
    key: impl Fn(usize) -> usize,
    tag: &str,
) -> TestMatrix {
    let mut b = MatrixBuilder::new(source.t(), n_items);
    for row in 0..source.t() {
        let cols: Vec<usize> = source.row_ones(row).collect();
        for item in 0..n_items {
            if cols.binary_search(&key(item)).is_ok() {
                b.set(row, item);
            }
        }
    }
    b.build(format!("replicate-{}({})", tag, source.label()))
}

/// Cartesian product of the two half-index estimates, mapped back to item
/// indices; combinations at or beyond `n_items` are discarded.
pub fn combine_candidates(
    high: &[usize],
    low: &[usize],
    low_bits: u32,
    n_items: usize,
) -> Vec<usize> {
    let low_cap = 1usize << low_bits;
    let mut out = Vec::with_capacity(high.len() * low.len());
    for &h in high {
        for &l in low {
            if l < low_cap {
                let idx = (h << low_bits) | l;
                if idx < n_items {
                    out.push(idx);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
