//! Monte Carlo harness: defective-set sampling, the noisy OR channel,
//! trial batches, and parameter sweeps with CSV reporting.
//!
//! Success means exact recovery of the defective set. Every trial draws its
//! randomness from a stream derived by hashing (master seed, trial index),
//! so batches are reproducible bit-for-bit regardless of how many worker
//! threads run them.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::decoders::{comp_decode, default_tau, ncomp_decode, DecoderConfig, Measurement};
use crate::designs::{bernoulli_build, ks_build, TestMatrix};
use crate::error::{Error, Result};
use crate::gf::PrimeField;
use crate::recursive::RecursiveScheme;
use crate::rscode::RsCode;

/// Uniform random d-subset of `0..n_items`, sorted. Partial Fisher-Yates.
pub fn sample_defective_set(n_items: usize, d: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if d > n_items {
        return Err(Error::BadSize {
            reason: format!("d={} exceeds N={}", d, n_items),
        });
    }
    let mut pool: Vec<usize> = (0..n_items).collect();
    for i in 0..d {
        let j = rng.gen_range(i..n_items);
        pool.swap(i, j);
    }
    let mut s: Vec<usize> = pool[..d].to_vec();
    s.sort_unstable();
    Ok(s)
}

/// `d` draws with replacement; the defective set is the dedup of the draws.
pub fn sample_defective_multiset(
    n_items: usize,
    d: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if d > n_items {
        return Err(Error::BadSize {
            reason: format!("d={} exceeds N={}", d, n_items),
        });
    }
    let mut s: Vec<usize> = (0..d).map(|_| rng.gen_range(0..n_items)).collect();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// OR of the defective columns, then each bit flipped independently with
/// probability `p` (skipped entirely when `p = 0`).
pub fn measure(m: &TestMatrix, s: &[usize], p: f64, rng: &mut impl Rng) -> Result<Measurement> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::BadNoise {
            reason: format!("p must lie in [0, 0.5), got {}", p),
        });
    }
    let mut y = Measurement::zeros(m.t());
    for &item in s {
        if item >= m.n_items() {
            return Err(Error::IndexOutOfRange {
                index: item as u64,
                bound: m.n_items() as u64,
            });
        }
        for r in m.column_support(item) {
            y.set(r);
        }
    }
    if p > 0.0 {
        for i in 0..m.t() {
            if rng.gen_bool(p) {
                y.flip(i);
            }
        }
    }
    Ok(y)
}

/// Flat-matrix decoding rule for trial batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlatDecoder {
    Comp,
    Ncomp(DecoderConfig),
}

/// What a trial batch decodes against.
#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    Matrix {
        matrix: &'a TestMatrix,
        decoder: FlatDecoder,
    },
    Scheme(&'a RecursiveScheme),
}

impl<'a> Instance<'a> {
    fn matrix(&self) -> &TestMatrix {
        match self {
            Instance::Matrix { matrix, .. } => matrix,
            Instance::Scheme(s) => s.matrix(),
        }
    }
}

/// Trial batch parameters.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub n_items: usize,
    pub d: usize,
    /// Channel flip probability; 0 means noiseless.
    pub p: f64,
    pub trials: u64,
    pub seed: u64,
    /// Sample defectives with replacement (dedup forms the set).
    pub with_replacement: bool,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

impl TrialConfig {
    pub fn new(n_items: usize, d: usize, p: f64, trials: u64, seed: u64) -> Self {
        TrialConfig {
            n_items,
            d,
            p,
            trials,
            seed,
            with_replacement: false,
            threads: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::BadSize {
                reason: "trials must be >= 1".into(),
            });
        }
        if self.d > self.n_items {
            return Err(Error::BadSize {
                reason: format!("d={} exceeds N={}", self.d, self.n_items),
            });
        }
        if !(0.0..0.5).contains(&self.p) {
            return Err(Error::BadNoise {
                reason: format!("p must lie in [0, 0.5), got {}", self.p),
            });
        }
        Ok(())
    }
}

/// Outcome of a trial batch.
#[derive(Debug, Clone)]
pub struct TrialReport {
    /// Echo of the configuration the batch ran under.
    pub label: String,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub wall: Duration,
    /// Largest final-stage column-check count seen (recursive decoding only).
    pub max_final_checks: Option<usize>,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - half) / denom).max(0.0),
        ((center + half) / denom).min(1.0),
    )
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Per-trial stream: hash of (master seed, trial index).
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial)))
}

fn run_one(instance: &Instance<'_>, cfg: &TrialConfig, trial: u64) -> Result<(bool, usize)> {
    let mut rng = trial_rng(cfg.seed, trial);
    let s = if cfg.with_replacement {
        sample_defective_multiset(cfg.n_items, cfg.d, &mut rng)?
    } else {
        sample_defective_set(cfg.n_items, cfg.d, &mut rng)?
    };
    let y = measure(instance.matrix(), &s, cfg.p, &mut rng)?;
    match instance {
        Instance::Matrix { matrix, decoder } => {
            let decoded = match decoder {
                FlatDecoder::Comp => comp_decode(&y, matrix)?,
                FlatDecoder::Ncomp(cfg) => ncomp_decode(&y, matrix, cfg)?,
            };
            Ok((decoded == s, 0))
        }
        Instance::Scheme(scheme) => {
            let out = scheme.decode(&y)?;
            Ok((out.items == s, out.final_stage_checks))
        }
    }
}

/// Runs `cfg.trials` independent trials and reports the success rate.
///
/// The report is independent of the worker-thread count.
pub fn run_trials(instance: &Instance<'_>, cfg: &TrialConfig) -> Result<TrialReport> {
    cfg.validate()?;
    if cfg.n_items != instance.matrix().n_items() {
        return Err(Error::WidthMismatch {
            expected: instance.matrix().n_items(),
            got: cfg.n_items,
        });
    }
    let start = Instant::now();
    let body = || -> Result<(u64, usize)> {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_one(instance, cfg, trial).map(|(ok, checks)| (ok as u64, checks)))
            .try_reduce(|| (0u64, 0usize), |a, b| Ok((a.0 + b.0, a.1.max(b.1))))
    };
    let (successes, max_checks) = if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::BadSize {
                reason: format!("thread pool: {}", e),
            })?;
        pool.install(body)?
    } else {
        body()?
    };
    let success_rate = successes as f64 / cfg.trials as f64;
    let (ci_lo, ci_hi) = wilson_interval(successes, cfg.trials);
    let is_scheme = matches!(instance, Instance::Scheme(_));
    Ok(TrialReport {
        label: format!(
            "{} N={} d={} p={} trials={} seed={}",
            instance.matrix().label(),
            cfg.n_items,
            cfg.d,
            cfg.p,
            cfg.trials,
            cfg.seed
        ),
        trials: cfg.trials,
        successes,
        success_rate,
        ci_lo,
        ci_hi,
        wall: start.elapsed(),
        max_final_checks: if is_scheme { Some(max_checks) } else { None },
    })
}

/// Shared settings for a sweep.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub n_items: usize,
    pub d: usize,
    pub p: f64,
    /// Threshold decoding when true, plain COMP otherwise.
    pub ncomp: bool,
    /// Threshold slack; `None` takes the default for `p`.
    pub tau: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub with_replacement: bool,
    pub threads: usize,
}

/// One design point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepPoint {
    Ks { q: u64, n: usize },
    Bernoulli { t: usize, nu: f64 },
    Ncc { t: usize, nu: f64 },
}

impl SweepPoint {
    fn design(&self) -> &'static str {
        match self {
            SweepPoint::Ks { .. } => "ks",
            SweepPoint::Bernoulli { .. } => "bernoulli",
            SweepPoint::Ncc { .. } => "ncc",
        }
    }

    /// Row count implied by the point.
    pub fn tests(&self) -> usize {
        match self {
            SweepPoint::Ks { q, n } => *q as usize * n,
            SweepPoint::Bernoulli { t, .. } | SweepPoint::Ncc { t, .. } => *t,
        }
    }
}

/// One CSV row of a sweep; `error` is set when the point failed to run.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub design: String,
    pub n_items: usize,
    pub d: usize,
    pub q: Option<u64>,
    pub n: Option<usize>,
    pub t: usize,
    pub p: f64,
    pub tau: Option<f64>,
    pub trials: u64,
    pub report: Option<TrialReport>,
    pub error: Option<String>,
}

fn build_point_matrix(base: &SweepBase, point: &SweepPoint, index: usize) -> Result<TestMatrix> {
    let matrix_seed = splitmix64(base.seed ^ splitmix64(0x5eed_0000 + index as u64));
    match point {
        SweepPoint::Ks { q, n } => {
            let field = PrimeField::new(*q)?;
            let mut k = 1usize;
            let mut cap = *q as u128;
            while cap < base.n_items as u128 {
                cap *= *q as u128;
                k += 1;
            }
            let code = RsCode::new(field, *n, k)?;
            ks_build(&code, base.n_items)
        }
        SweepPoint::Bernoulli { t, nu } => {
            bernoulli_build(*t, base.n_items, base.d, *nu, matrix_seed)
        }
        SweepPoint::Ncc { t, nu } => {
            crate::designs::ncc_build(*t, base.n_items, base.d, *nu, matrix_seed)
        }
    }
}

/// Runs every point and returns one row each, ordered by test count.
///
/// A point that fails (for example infeasible code parameters) produces a
/// row carrying the error text; the sweep continues.
pub fn sweep(base: &SweepBase, points: &[SweepPoint]) -> Vec<SweepRow> {
    let tau = if base.ncomp {
        Some(
            base.tau
                .unwrap_or_else(|| default_tau(base.p).unwrap_or(0.0)),
        )
    } else {
        None
    };
    let mut rows: Vec<SweepRow> = points
        .iter()
        .enumerate()
        .map(|(idx, point)| {
            let (q, n) = match point {
                SweepPoint::Ks { q, n } => (Some(*q), Some(*n)),
                _ => (None, None),
            };
            let mut row = SweepRow {
                design: point.design().to_string(),
                n_items: base.n_items,
                d: base.d,
                q,
                n,
                t: point.tests(),
                p: base.p,
                tau,
                trials: base.trials,
                report: None,
                error: None,
            };
            let run = build_point_matrix(base, point, idx).and_then(|matrix| {
                let decoder = if base.ncomp {
                    FlatDecoder::Ncomp(DecoderConfig::new(base.p, tau.unwrap())?)
                } else {
                    FlatDecoder::Comp
                };
                let cfg = TrialConfig {
                    n_items: base.n_items,
                    d: base.d,
                    p: base.p,
                    trials: base.trials,
                    seed: splitmix64(base.seed ^ splitmix64(0x707 + idx as u64)),
                    with_replacement: base.with_replacement,
                    threads: base.threads,
                };
                run_trials(
                    &Instance::Matrix {
                        matrix: &matrix,
                        decoder,
                    },
                    &cfg,
                )
            });
            match run {
                Ok(report) => row.report = Some(report),
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    rows.sort_by_key(|r| r.t);
    rows
}

pub const SWEEP_CSV_HEADER: &str =
    "design,N,d,q,n,t,p,tau,trials,successes,success_rate,ci_lo,ci_hi,error";

fn opt_str<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Renders rows as CSV, header included. Wall time is deliberately omitted
/// so identical configurations produce identical bytes.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let (successes, rate, lo, hi) = match &r.report {
            Some(rep) => (
                rep.successes.to_string(),
                format!("{:.6}", rep.success_rate),
                format!("{:.6}", rep.ci_lo),
                format!("{:.6}", rep.ci_hi),
            ),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        let error = r.error.clone().unwrap_or_default().replace(',', ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.design,
            r.n_items,
            r.d,
            opt_str(&r.q),
            opt_str(&r.n),
            r.t,
            r.p,
            opt_str(&r.tau),
            r.trials,
            successes,
            rate,
            lo,
            hi,
            error
        ));
    }
    out
}
