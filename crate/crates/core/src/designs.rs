//! Binary measurement matrices: the Reed-Solomon pooling design, random
//! baselines, vertical stacking, and serialization.
//!
//! Matrices are stored row-major and bit-packed into 64-bit words; bit `c`
//! of a row covers column `c`. Column weights are computed once at build
//! time since the threshold decoder needs them on every call.

use std::fs;
use std::io::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{words_for, WORD_BITS};
use crate::error::{Error, Result};
use crate::rscode::RsCode;

/// Immutable t x N binary pooling matrix.
#[derive(Debug, Clone)]
pub struct TestMatrix {
    t: usize,
    n_items: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    col_weights: Vec<u32>,
    label: String,
}

/// Content equality; the provenance label is ignored.
impl PartialEq for TestMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.n_items == other.n_items && self.bits == other.bits
    }
}

impl Eq for TestMatrix {}

impl TestMatrix {
    /// Number of tests (rows).
    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of items (columns).
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.t && col < self.n_items);
        let w = self.bits[row * self.words_per_row + col / WORD_BITS];
        w >> (col % WORD_BITS) & 1 == 1
    }

    /// Packed words of one row; tail bits past `n_items` are always zero.
    pub(crate) fn row_words(&self, row: usize) -> &[u64] {
        let start = row * self.words_per_row;
        &self.bits[start..start + self.words_per_row]
    }

    /// Column indices set in `row`, in increasing order.
    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(row).iter().enumerate().flat_map(|(wi, &w)| {
            let base = wi * WORD_BITS;
            let mut rem = w;
            std::iter::from_fn(move || {
                if rem == 0 {
                    None
                } else {
                    let b = rem.trailing_zeros() as usize;
                    rem &= rem - 1;
                    Some(base + b)
                }
            })
        })
    }

    /// Row indices where column `col` has a 1.
    pub fn column_support(&self, col: usize) -> Vec<usize> {
        assert!(col < self.n_items);
        (0..self.t).filter(|&r| self.get(r, col)).collect()
    }

    pub fn column_weight(&self, col: usize) -> u32 {
        self.col_weights[col]
    }

    pub fn column_weights(&self) -> &[u32] {
        &self.col_weights
    }
}

/// Write-once builder for `TestMatrix`.
pub struct MatrixBuilder {
    t: usize,
    n_items: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl MatrixBuilder {
    pub fn new(t: usize, n_items: usize) -> Self {
        let words_per_row = words_for(n_items);
        MatrixBuilder {
            t,
            n_items,
            words_per_row,
            bits: vec![0; t * words_per_row],
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize) {
        assert!(row < self.t && col < self.n_items);
        self.bits[row * self.words_per_row + col / WORD_BITS] |= 1 << (col % WORD_BITS);
    }

    pub fn build(self, label: impl Into<String>) -> TestMatrix {
        let mut col_weights = vec![0u32; self.n_items];
        for row in 0..self.t {
            let start = row * self.words_per_row;
            for (wi, &w) in self.bits[start..start + self.words_per_row]
                .iter()
                .enumerate()
            {
                let mut rem = w;
                while rem != 0 {
                    let b = rem.trailing_zeros() as usize;
                    rem &= rem - 1;
                    col_weights[wi * WORD_BITS + b] += 1;
                }
            }
        }
        TestMatrix {
            t: self.t,
            n_items: self.n_items,
            words_per_row: self.words_per_row,
            bits: self.bits,
            col_weights,
            label: label.into(),
        }
    }
}

/// Reed-Solomon pooling matrix: `n` blocks of `q` rows; item `j` with
/// codeword `c` has a single 1 per block, at row `i*q + c_i`.
///
/// Every column has weight exactly `n`.
pub fn ks_build(code: &RsCode, n_items: usize) -> Result<TestMatrix> {
    if n_items as u64 > code.capacity() {
        return Err(Error::TooManyItems {
            n_items: n_items as u64,
            capacity: code.capacity(),
        });
    }
    let q = code.q() as usize;
    let n = code.n();
    let mut b = MatrixBuilder::new(n * q, n_items);
    for j in 0..n_items {
        let msg = code.index_to_message(j as u64)?;
        let word = code.encode(&msg)?;
        for (block, &sym) in word.iter().enumerate() {
            b.set(block * q + sym as usize, j);
        }
    }
    Ok(b.build(format!("ks(q={},n={},k={})", code.q(), n, code.k())))
}

/// Bernoulli design: each entry is 1 independently with probability `nu/d`.
pub fn bernoulli_build(
    t: usize,
    n_items: usize,
    d: usize,
    nu: f64,
    seed: u64,
) -> Result<TestMatrix> {
    check_positive_dims(t, n_items, d)?;
    let density = nu / d as f64;
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::BadDensity {
            reason: format!("nu/d must lie in (0, 1], got {}", density),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = MatrixBuilder::new(t, n_items);
    for row in 0..t {
        for col in 0..n_items {
            if rng.gen_bool(density) {
                b.set(row, col);
            }
        }
    }
    Ok(b.build(format!("bernoulli(t={},nu={})", t, nu)))
}

/// Near-constant column weight design: every column draws
/// `L = round(nu*t/d)` rows uniformly with replacement (duplicates collapse).
pub fn ncc_build(t: usize, n_items: usize, d: usize, nu: f64, seed: u64) -> Result<TestMatrix> {
    check_positive_dims(t, n_items, d)?;
    let draws = (nu * t as f64 / d as f64).round();
    if draws.is_nan() || draws < 1.0 {
        return Err(Error::BadDensity {
            reason: format!("round(nu*t/d) must be >= 1, got {}", draws),
        });
    }
    let draws = draws as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = MatrixBuilder::new(t, n_items);
    for col in 0..n_items {
        for _ in 0..draws {
            b.set(rng.gen_range(0..t), col);
        }
    }
    Ok(b.build(format!("ncc(t={},L={})", t, draws)))
}

fn check_positive_dims(t: usize, n_items: usize, d: usize) -> Result<()> {
    if t < 1 || n_items < 1 || d < 1 {
        return Err(Error::BadSize {
            reason: format!(
                "t, N, d must all be >= 1, got t={} N={} d={}",
                t, n_items, d
            ),
        });
    }
    Ok(())
}

/// Vertical stack of matrices over the same item set, with row provenance.
#[derive(Debug, Clone)]
pub struct Stacked {
    pub matrix: TestMatrix,
    /// Row range each part occupies in the stacked matrix, in input order.
    pub ranges: Vec<Range<usize>>,
}

impl Stacked {
    /// Maps a stacked row back to `(part index, local row)`.
    pub fn locate(&self, row: usize) -> Option<(usize, usize)> {
        self.ranges
            .iter()
            .position(|r| r.contains(&row))
            .map(|part| (part, row - self.ranges[part].start))
    }
}

/// Concatenates the rows of `parts` in order.
pub fn stack(parts: &[&TestMatrix]) -> Result<Stacked> {
    let first = parts.first().ok_or_else(|| Error::BadSize {
        reason: "stack needs at least one part".to_string(),
    })?;
    let n_items = first.n_items;
    let mut total = 0usize;
    let mut ranges = Vec::with_capacity(parts.len());
    for m in parts {
        if m.n_items != n_items {
            return Err(Error::WidthMismatch {
                expected: n_items,
                got: m.n_items,
            });
        }
        ranges.push(total..total + m.t);
        total += m.t;
    }
    let words_per_row = first.words_per_row;
    let mut bits = Vec::with_capacity(total * words_per_row);
    for m in parts {
        bits.extend_from_slice(&m.bits);
    }
    let mut col_weights = vec![0u32; n_items];
    for m in parts {
        for (w, &pw) in col_weights.iter_mut().zip(&m.col_weights) {
            *w += pw;
        }
    }
    Ok(Stacked {
        matrix: TestMatrix {
            t: total,
            n_items,
            words_per_row,
            bits,
            col_weights,
            label: format!("stack({} parts)", parts.len()),
        },
        ranges,
    })
}

const MAGIC: &[u8; 4] = b"GTM1";
const MAX_DIM: u64 = 1 << 32;

/// Writes the binary "GTM1" format: magic, `t` and `N` as little-endian
/// u64, then `ceil(N/8)` bytes per row, row-major, bit 0 of each byte being
/// the lowest column index.
pub fn write_matrix(m: &TestMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(20 + m.t * m.n_items.div_ceil(8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.t as u64).to_le_bytes());
    out.extend_from_slice(&(m.n_items as u64).to_le_bytes());
    let row_bytes = m.n_items.div_ceil(8);
    for row in 0..m.t {
        let mut bytes = Vec::with_capacity(m.words_per_row * 8);
        for w in m.row_words(row) {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&bytes[..row_bytes]);
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<TestMatrix> {
    let path = path.as_ref();
    let data = fs::read(path)?;
    if data.len() < 20 || &data[..4] != MAGIC {
        return Err(Error::Format {
            reason: format!("{}: bad or missing GTM1 magic", path.display()),
        });
    }
    let t = u64::from_le_bytes(data[4..12].try_into().unwrap());
    let n_items = u64::from_le_bytes(data[12..20].try_into().unwrap());
    if t >= MAX_DIM || n_items >= MAX_DIM {
        return Err(Error::Format {
            reason: format!("dimensions {}x{} overflow", t, n_items),
        });
    }
    let (t, n_items) = (t as usize, n_items as usize);
    let row_bytes = n_items.div_ceil(8);
    let expected = 20
        + t.checked_mul(row_bytes).ok_or_else(|| Error::Format {
            reason: "payload size overflow".to_string(),
        })?;
    if data.len() != expected {
        return Err(Error::Format {
            reason: format!(
                "expected {} bytes of payload, found {}",
                expected - 20,
                data.len() - 20
            ),
        });
    }
    let words_per_row = words_for(n_items);
    let mut bits = vec![0u64; t * words_per_row];
    for row in 0..t {
        let src = &data[20 + row * row_bytes..20 + (row + 1) * row_bytes];
        for (i, &byte) in src.iter().enumerate() {
            bits[row * words_per_row + i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        // tolerate (and drop) stray bits past column N-1
        let tail = n_items % WORD_BITS;
        if tail != 0 {
            bits[row * words_per_row + words_per_row - 1] &= (1u64 << tail) - 1;
        }
    }
    let b = MatrixBuilder {
        t,
        n_items,
        words_per_row,
        bits,
    };
    Ok(b.build(format!("file({})", path.display())))
}

/// Debug text format: a "t N" header line, then one line of `0`/`1`
/// characters per row.
pub fn write_matrix_text(m: &TestMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity((m.n_items + 1) * (m.t + 1));
    out.push_str(&format!("{} {}\n", m.t, m.n_items));
    for row in 0..m.t {
        for col in 0..m.n_items {
            out.push(if m.get(row, col) { '1' } else { '0' });
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_text(path: impl AsRef<Path>) -> Result<TestMatrix> {
    let path = path.as_ref();
    let data = fs::read_to_string(path)?;
    let mut lines = data.lines();
    let header = lines.next().ok_or_else(|| Error::Format {
        reason: "empty file".into(),
    })?;
    let mut dims = header.split_whitespace();
    let t: usize = dims
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format {
            reason: format!("bad header line {:?}", header),
        })?;
    let n_items: usize = dims
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format {
            reason: format!("bad header line {:?}", header),
        })?;
    let mut b = MatrixBuilder::new(t, n_items);
    for row in 0..t {
        let line = lines.next().ok_or_else(|| Error::Format {
            reason: format!("truncated at row {}", row),
        })?;
        if line.len() != n_items {
            return Err(Error::Format {
                reason: format!(
                    "row {} has {} characters, expected {}",
                    row,
                    line.len(),
                    n_items
                ),
            });
        }
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '1' => b.set(row, col),
                '0' => {}
                other => {
                    return Err(Error::Format {
                        reason: format!("row {} has invalid character {:?}", row, other),
                    })
                }
            }
        }
    }
    Ok(b.build(format!("file({})", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::PrimeField;
    use crate::rscode::RsCode;

    pub(crate) fn fig1_matrix() -> TestMatrix {
        let code = RsCode::new(PrimeField::new(3).unwrap(), 3, 1).unwrap();
        ks_build(&code, 3).unwrap()
    }

    #[test]
    fn ks_small_structure() {
        let m = fig1_matrix();
        assert_eq!((m.t(), m.n_items()), (9, 3));
        assert_eq!(m.column_support(0), vec![0, 3, 6]);
        assert_eq!(m.column_support(1), vec![1, 4, 7]);
        assert_eq!(m.column_support(2), vec![2, 5, 8]);
    }

    #[test]
    fn ks_linear_codeword_support() {
        let code = RsCode::new(PrimeField::new(3).unwrap(), 2, 2).unwrap();
        let m = ks_build(&code, 9).unwrap();
        // item 4 has message (1,1) -> codeword (1,2) -> rows 0*3+1 and 1*3+2
        assert_eq!(m.column_support(4), vec![1, 5]);
    }

    #[test]
    fn ks_column_weight_is_n_with_one_per_block() {
        let code = RsCode::new(PrimeField::new(5).unwrap(), 5, 2).unwrap();
        let m = ks_build(&code, 25).unwrap();
        for col in 0..25 {
            assert_eq!(m.column_weight(col), 5);
            for block in 0..5 {
                let ones = (0..5).filter(|&r| m.get(block * 5 + r, col)).count();
                assert_eq!(ones, 1, "column {} block {}", col, block);
            }
        }
    }

    #[test]
    fn ks_columns_share_at_most_k_minus_1_blocks() {
        let code = RsCode::new(PrimeField::new(5).unwrap(), 5, 2).unwrap();
        let m = ks_build(&code, 25).unwrap();
        for a in 0..25 {
            for b in (a + 1)..25 {
                let sa = m.column_support(a);
                let sb = m.column_support(b);
                let shared = sa.iter().filter(|r| sb.contains(r)).count();
                assert!(shared <= 1, "columns {} and {} share {} rows", a, b, shared);
            }
        }
    }

    #[test]
    fn ks_rejects_too_many_items() {
        let code = RsCode::new(PrimeField::new(3).unwrap(), 3, 1).unwrap();
        assert!(matches!(
            ks_build(&code, 4),
            Err(Error::TooManyItems { .. })
        ));
    }

    #[test]
    fn bernoulli_full_density_is_all_ones() {
        let m = bernoulli_build(4, 6, 3, 3.0, 1).unwrap();
        for col in 0..6 {
            assert_eq!(m.column_weight(col), 4);
        }
    }

    #[test]
    fn bernoulli_rejects_bad_density() {
        assert!(matches!(
            bernoulli_build(4, 6, 3, 4.0, 1),
            Err(Error::BadDensity { .. })
        ));
        assert!(matches!(
            bernoulli_build(4, 6, 3, 0.0, 1),
            Err(Error::BadDensity { .. })
        ));
    }

    #[test]
    fn bernoulli_mean_weight_within_3_sigma() {
        let (t, n, d) = (100usize, 500usize, 10usize);
        let nu = std::f64::consts::LN_2;
        let m = bernoulli_build(t, n, d, nu, 7).unwrap();
        let density = nu / d as f64;
        let total: u64 = m.column_weights().iter().map(|&w| w as u64).sum();
        let mean = total as f64 / n as f64;
        let expect = t as f64 * density;
        let sigma = ((t * n) as f64 * density * (1.0 - density)).sqrt() / n as f64;
        assert!(
            (mean - expect).abs() <= 3.0 * sigma,
            "mean column weight {} vs expected {} (3 sigma {})",
            mean,
            expect,
            3.0 * sigma
        );
    }

    #[test]
    fn random_builds_are_deterministic() {
        let a = bernoulli_build(50, 80, 10, 0.7, 42).unwrap();
        let b = bernoulli_build(50, 80, 10, 0.7, 42).unwrap();
        assert_eq!(a, b);
        let c = ncc_build(50, 80, 10, 0.7, 42).unwrap();
        let d = ncc_build(50, 80, 10, 0.7, 42).unwrap();
        assert_eq!(c, d);
        assert_ne!(a, bernoulli_build(50, 80, 10, 0.7, 43).unwrap());
    }

    #[test]
    fn ncc_single_draw_weight() {
        let m = ncc_build(10, 20, 7, 0.7, 3).unwrap(); // L = round(1) = 1
        for col in 0..20 {
            assert_eq!(m.column_weight(col), 1);
        }
    }

    #[test]
    fn ncc_weight_bounds() {
        // L = round(ln2 * 100 / 10) = 7
        let m = ncc_build(100, 200, 10, std::f64::consts::LN_2, 5).unwrap();
        for col in 0..200 {
            let w = m.column_weight(col);
            assert!((1..=7).contains(&w), "column {} weight {}", col, w);
        }
    }

    #[test]
    fn ncc_rejects_zero_draws() {
        assert!(matches!(
            ncc_build(10, 20, 100, 0.7, 3),
            Err(Error::BadDensity { .. })
        ));
    }

    #[test]
    fn stack_singleton_is_identity() {
        let m = fig1_matrix();
        let s = stack(&[&m]).unwrap();
        assert_eq!(s.matrix, m);
        assert_eq!(s.ranges, vec![0..9]);
    }

    #[test]
    fn stack_orders_rows_and_tracks_provenance() {
        let a = fig1_matrix();
        let b = fig1_matrix();
        let s = stack(&[&a, &b]).unwrap();
        assert_eq!(s.matrix.t(), 18);
        for row in 0..9 {
            for col in 0..3 {
                assert_eq!(s.matrix.get(row, col), a.get(row, col));
                assert_eq!(s.matrix.get(9 + row, col), b.get(row, col));
            }
        }
        assert_eq!(s.locate(0), Some((0, 0)));
        assert_eq!(s.locate(9), Some((1, 0)));
        assert_eq!(s.locate(17), Some((1, 8)));
        assert_eq!(s.locate(18), None);
    }

    #[test]
    fn stack_rejects_width_mismatch() {
        let a = fig1_matrix();
        let code = RsCode::new(PrimeField::new(3).unwrap(), 2, 2).unwrap();
        let b = ks_build(&code, 9).unwrap();
        assert!(matches!(stack(&[&a, &b]), Err(Error::WidthMismatch { .. })));
        assert!(matches!(stack(&[]), Err(Error::BadSize { .. })));
    }

    #[test]
    fn stack_supports_are_shifted_unions() {
        let a = fig1_matrix();
        let b = fig1_matrix();
        let s = stack(&[&a, &b]).unwrap();
        for col in 0..3 {
            let mut want = a.column_support(col);
            want.extend(b.column_support(col).iter().map(|r| r + 9));
            assert_eq!(s.matrix.column_support(col), want);
        }
    }

    #[test]
    fn binary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gtm");
        let m = fig1_matrix();
        write_matrix(&m, &path).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);

        // a wider matrix exercises multi-word rows and ragged tail bytes
        let wide = bernoulli_build(13, 201, 9, 2.0, 11).unwrap();
        let path2 = dir.path().join("wide.gtm");
        write_matrix(&wide, &path2).unwrap();
        assert_eq!(read_matrix(&path2).unwrap(), wide);
    }

    #[test]
    fn text_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = fig1_matrix();
        write_matrix_text(&m, &path).unwrap();
        assert_eq!(read_matrix_text(&path).unwrap(), m);
    }

    #[test]
    fn read_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let bad_magic = dir.path().join("bad.gtm");
        fs::write(&bad_magic, b"XXXX0000000000000000").unwrap();
        assert!(matches!(read_matrix(&bad_magic), Err(Error::Format { .. })));

        let empty = dir.path().join("empty.gtm");
        fs::write(&empty, b"").unwrap();
        assert!(matches!(read_matrix(&empty), Err(Error::Format { .. })));

        let truncated = dir.path().join("trunc.gtm");
        let m = fig1_matrix();
        write_matrix(&m, &truncated).unwrap();
        let mut data = fs::read(&truncated).unwrap();
        data.pop();
        fs::write(&truncated, data).unwrap();
        assert!(matches!(read_matrix(&truncated), Err(Error::Format { .. })));
    }
}
