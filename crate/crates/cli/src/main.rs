//! Command-line front end: build pooling matrices, decode outcome vectors,
//! run Monte Carlo batches and sweeps, and query the exact oracles.
//!
//! Exit codes: 0 on success, 2 on invalid configuration or I/O problems,
//! 3 when the requested parameters are infeasible.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use grouptest::decoders::{comp_decode, default_tau, ncomp_decode, DecoderConfig, Measurement};
use grouptest::designs::{
    bernoulli_build, ks_build, ncc_build, read_matrix, read_matrix_text, write_matrix,
    write_matrix_text, TestMatrix,
};
use grouptest::gf::PrimeField;
use grouptest::oracle;
use grouptest::recursive::{RecursiveScheme, SchemeNode};
use grouptest::rscode::{GtParams, Regime, RsCode};
use grouptest::sim::{
    self, FlatDecoder, Instance, SweepBase, SweepPoint, TrialConfig, TrialReport,
};
use grouptest::Error;

#[derive(Parser)]
#[command(
    name = "grouptest",
    version,
    about = "Pooling-design construction, decoding, and Monte Carlo experiments for group testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a measurement matrix and write it to a file
    Build(BuildArgs),
    /// Decode an outcome vector against a matrix file
    Decode(DecodeArgs),
    /// Estimate the success rate of one configuration by Monte Carlo
    Simulate(SimulateArgs),
    /// Run a grid of design points and emit CSV
    Sweep(SweepArgs),
    /// Exact brute-force computations on small instances
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Build (and optionally simulate) the recursive efficiently decodable scheme
    Recursive(RecursiveArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Design {
    Ks,
    Bernoulli,
    Ncc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Decoder {
    Comp,
    Ncomp,
}

/// Flags that pick or construct a matrix.
#[derive(Args)]
struct MatrixSource {
    /// Read the matrix from a file instead of building one
    #[arg(long, conflicts_with = "design")]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    design: Option<Design>,
    #[arg(long)]
    n_items: Option<usize>,
    #[arg(long)]
    defectives: Option<usize>,
    /// Explicit field order for the ks design (requires --rs-n)
    #[arg(long)]
    q: Option<u64>,
    /// Explicit code length for the ks design (requires --q)
    #[arg(long)]
    rs_n: Option<usize>,
    /// Error exponent used by ks parameter selection
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Field-order constant for ks parameter selection
    #[arg(long)]
    c1: Option<f64>,
    /// Code-length constant for noisy ks parameter selection
    #[arg(long)]
    c2: Option<f64>,
    /// Row count for the random designs
    #[arg(long)]
    tests: Option<usize>,
    /// Density constant for the random designs (default ln 2)
    #[arg(long)]
    nu: Option<f64>,
    /// Seed for the random designs
    #[arg(long, default_value_t = 0)]
    matrix_seed: u64,
}

impl MatrixSource {
    fn dims(&self) -> Result<(usize, usize), Error> {
        match (self.n_items, self.defectives) {
            (Some(n), Some(d)) => Ok((n, d)),
            _ => Err(invalid("--n-items and --defectives are required")),
        }
    }

    fn build(&self, noise: f64) -> Result<TestMatrix, Error> {
        if let Some(path) = &self.matrix {
            return load_matrix(path);
        }
        let design = self
            .design
            .ok_or_else(|| invalid("either --matrix or --design is required"))?;
        let (n_items, d) = self.dims()?;
        match design {
            Design::Ks => {
                let code = match (self.q, self.rs_n) {
                    (Some(q), Some(n)) => {
                        let field = PrimeField::new(q)?;
                        RsCode::new(field, n, min_dimension(q, n_items as u64))?
                    }
                    (None, None) => {
                        let mut params = if noise > 0.0 {
                            GtParams::noisy(n_items as u64, d as u64, noise)
                        } else {
                            GtParams::noiseless(n_items as u64, d as u64)
                        };
                        params.delta = self.delta;
                        if let Some(c1) = self.c1 {
                            params.c1 = c1;
                        }
                        if let Some(c2) = self.c2 {
                            params.c2 = c2;
                        }
                        RsCode::select_params(&params)?
                    }
                    _ => return Err(invalid("--q and --rs-n must be given together")),
                };
                ks_build(&code, n_items)
            }
            Design::Bernoulli => {
                let t = self
                    .tests
                    .ok_or_else(|| invalid("--tests is required for bernoulli"))?;
                bernoulli_build(t, n_items, d, self.nu_or_default(), self.matrix_seed)
            }
            Design::Ncc => {
                let t = self
                    .tests
                    .ok_or_else(|| invalid("--tests is required for ncc"))?;
                ncc_build(t, n_items, d, self.nu_or_default(), self.matrix_seed)
            }
        }
    }

    fn nu_or_default(&self) -> f64 {
        self.nu.unwrap_or(std::f64::consts::LN_2)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// Channel flip probability (drives noisy ks parameter selection)
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
    /// Write the debug text format instead of GTM1
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Outcome vector file: ASCII 0/1, whitespace ignored
    #[arg(long)]
    outcome: PathBuf,
    #[arg(long, value_enum, default_value = "comp")]
    decoder: Decoder,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Threshold slack (default 3(0.5-p)/(4p))
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: MatrixSource,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "comp")]
    decoder: Decoder,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample defectives with replacement
    #[arg(long)]
    with_replacement: bool,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON grid specification
    #[arg(long)]
    grid: PathBuf,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the grid's worker-thread count
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact cover-decoder error probability over all d-subsets
    Error {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        defectives: usize,
    },
    /// Exhaustive d-disjunctness check
    Disjunct {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        defectives: usize,
    },
    /// Root-count census of nonzero polynomials of degree < k over GF(q)
    Census {
        #[arg(long)]
        q: u64,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Args)]
struct RecursiveArgs {
    #[arg(long)]
    n_items: usize,
    #[arg(long)]
    defectives: usize,
    /// Target error budget
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Monte Carlo trials (0 skips simulation)
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Write the stacked matrix here (GTM1)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the scheme sidecar here (requires --out)
    #[arg(long)]
    meta: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::Infeasible { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn invalid(msg: &str) -> Error {
    Error::BadSize {
        reason: msg.to_string(),
    }
}

fn min_dimension(q: u64, n_items: u64) -> usize {
    let mut k = 1usize;
    let mut acc = q as u128;
    while acc < n_items as u128 {
        acc *= q as u128;
        k += 1;
    }
    k
}

/// Reads either format: GTM1 when the magic matches, the text layout otherwise.
fn load_matrix(path: &Path) -> Result<TestMatrix, Error> {
    let head = fs::read(path)?;
    if head.len() >= 4 && &head[..4] == b"GTM1" {
        read_matrix(path)
    } else {
        read_matrix_text(path)
    }
}

fn load_outcome(path: &Path) -> Result<Measurement, Error> {
    let text = fs::read_to_string(path)?;
    let mut bits = Vec::new();
    for ch in text.chars() {
        match ch {
            '0' => bits.push(false),
            '1' => bits.push(true),
            c if c.is_whitespace() => {}
            c => {
                return Err(Error::Format {
                    reason: format!("outcome file has invalid character {:?}", c),
                })
            }
        }
    }
    Ok(Measurement::from_bools(&bits))
}

fn decoder_config(p: f64, tau: Option<f64>) -> Result<DecoderConfig, Error> {
    match tau {
        Some(tau) => DecoderConfig::new(p, tau),
        None => DecoderConfig::with_default_tau(p),
    }
}

fn print_report(report: &TrialReport) {
    println!("config: {}", report.label);
    println!("trials: {}", report.trials);
    println!("successes: {}", report.successes);
    println!("success_rate: {:.6}", report.success_rate);
    println!("ci95: [{:.6}, {:.6}]", report.ci_lo, report.ci_hi);
    println!("wall_ms: {}", report.wall.as_millis());
    if let Some(checks) = report.max_final_checks {
        println!("max_final_stage_checks: {}", checks);
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Build(args) => {
            let m = args.source.build(args.noise)?;
            if args.text {
                write_matrix_text(&m, &args.out)?;
            } else {
                write_matrix(&m, &args.out)?;
            }
            println!(
                "wrote {}x{} matrix [{}] to {}",
                m.t(),
                m.n_items(),
                m.label(),
                args.out.display()
            );
            Ok(())
        }
        Command::Decode(args) => {
            let m = load_matrix(&args.matrix)?;
            let y = load_outcome(&args.outcome)?;
            let items = match args.decoder {
                Decoder::Comp => comp_decode(&y, &m)?,
                Decoder::Ncomp => {
                    let cfg = decoder_config(args.noise, args.tau)?;
                    ncomp_decode(&y, &m, &cfg)?
                }
            };
            for item in items {
                println!("{}", item);
            }
            Ok(())
        }
        Command::Simulate(args) => {
            let m = args.source.build(args.noise)?;
            let (n_items, d) = match (args.source.n_items, args.source.defectives) {
                (Some(n), Some(d)) => (n, d),
                _ => return Err(invalid("--n-items and --defectives are required")),
            };
            let decoder = match args.decoder {
                Decoder::Comp => FlatDecoder::Comp,
                Decoder::Ncomp => FlatDecoder::Ncomp(decoder_config(args.noise, args.tau)?),
            };
            let cfg = TrialConfig {
                n_items,
                d,
                p: args.noise,
                trials: args.trials,
                seed: args.seed,
                with_replacement: args.with_replacement,
                threads: args.threads,
            };
            let report = sim::run_trials(
                &Instance::Matrix {
                    matrix: &m,
                    decoder,
                },
                &cfg,
            )?;
            print_report(&report);
            Ok(())
        }
        Command::Sweep(args) => {
            let grid: GridFile =
                serde_json::from_str(&fs::read_to_string(&args.grid)?).map_err(|e| {
                    Error::Format {
                        reason: format!("grid file: {}", e),
                    }
                })?;
            let (base, points) = grid.into_parts(args.threads)?;
            let rows = sim::sweep(&base, &points);
            let csv = sim::sweep_csv(&rows);
            match args.out {
                Some(path) => fs::write(path, csv)?,
                None => print!("{}", csv),
            }
            Ok(())
        }
        Command::Oracle(cmd) => run_oracle(cmd),
        Command::Recursive(args) => run_recursive(args),
    }
}

fn run_oracle(cmd: OracleCommand) -> Result<(), Error> {
    match cmd {
        OracleCommand::Error { matrix, defectives } => {
            let m = load_matrix(&matrix)?;
            let p = oracle::exact_comp_error_prob(&m, defectives)?;
            let value = *p.numer() as f64 / (*p.denom()).max(1) as f64;
            println!("exact_error = {}/{} = {:.6}", p.numer(), p.denom(), value);
        }
        OracleCommand::Disjunct { matrix, defectives } => {
            let m = load_matrix(&matrix)?;
            println!(
                "{}_disjunct = {}",
                defectives,
                oracle::is_d_disjunct(&m, defectives)?
            );
        }
        OracleCommand::Census { q, k } => {
            let census = oracle::root_census(q, k)?;
            println!("nonzero_polynomials = {}", census.total());
            for (l, count) in census.counts.iter().enumerate() {
                println!("roots[{}] = {}", l, count);
            }
            let er = census.mean_roots();
            let er2 = census.mean_square_roots();
            println!("mean_roots = {}/{}", er.numer(), er.denom());
            println!("mean_square_roots = {}/{}", er2.numer(), er2.denom());
        }
    }
    Ok(())
}

fn describe_scheme(scheme: &RecursiveScheme, depth: usize) {
    let indent = "  ".repeat(depth);
    let kind = match scheme.node() {
        SchemeNode::Individual { reps } => format!("individual x{}", reps),
        SchemeNode::Direct => "direct".to_string(),
        SchemeNode::Split {
            high_bits,
            low_bits,
            ..
        } => {
            format!("split high={} low={}", high_bits, low_bits)
        }
    };
    println!(
        "{}{} N={} eps={} tests={}",
        indent,
        kind,
        scheme.n_items(),
        scheme.epsilon(),
        scheme.predicted_tests()
    );
    if let SchemeNode::Split {
        child, ks_layer, ..
    } = scheme.node()
    {
        describe_scheme(child, depth + 1);
        println!("{}  pooling layer tests={}", indent, ks_layer.t());
    }
}

fn run_recursive(args: RecursiveArgs) -> Result<(), Error> {
    let regime = if args.noise > 0.0 {
        Regime::Noisy { p: args.noise }
    } else {
        Regime::Noiseless
    };
    let scheme = RecursiveScheme::build(args.n_items, args.defectives, args.epsilon, regime)?;
    describe_scheme(&scheme, 0);
    println!("total_tests = {}", scheme.predicted_tests());
    println!("recursion_identity = {}", scheme.recursion_identity_holds());
    if let Some(out) = &args.out {
        let meta = args
            .meta
            .clone()
            .unwrap_or_else(|| out.with_extension("meta"));
        scheme.write(out, &meta)?;
        println!(
            "wrote matrix to {} and sidecar to {}",
            out.display(),
            meta.display()
        );
    } else if args.meta.is_some() {
        return Err(invalid("--meta requires --out"));
    }
    if args.trials > 0 {
        let cfg = TrialConfig {
            n_items: args.n_items,
            d: args.defectives,
            p: args.noise,
            trials: args.trials,
            seed: args.seed,
            with_replacement: false,
            threads: args.threads,
        };
        let report = sim::run_trials(&Instance::Scheme(&scheme), &cfg)?;
        print_report(&report);
    }
    Ok(())
}

/// JSON grid specification for the sweep subcommand.
#[derive(Deserialize)]
struct GridFile {
    n_items: usize,
    d: usize,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    decoder: Option<String>,
    #[serde(default)]
    tau: Option<f64>,
    trials: u64,
    seed: u64,
    #[serde(default)]
    with_replacement: bool,
    #[serde(default)]
    threads: usize,
    points: Vec<GridPoint>,
}

#[derive(Deserialize)]
#[serde(tag = "design", rename_all = "lowercase")]
enum GridPoint {
    Ks { q: u64, n: usize },
    Bernoulli { t: usize, nu: Option<f64> },
    Ncc { t: usize, nu: Option<f64> },
}

impl GridFile {
    fn into_parts(
        self,
        threads_override: Option<usize>,
    ) -> Result<(SweepBase, Vec<SweepPoint>), Error> {
        let ncomp = match self.decoder.as_deref() {
            None | Some("comp") => false,
            Some("ncomp") => true,
            Some(other) => {
                return Err(Error::Format {
                    reason: format!("unknown decoder {:?}", other),
                })
            }
        };
        let tau = match (ncomp, self.tau) {
            (true, None) => Some(default_tau(self.noise)?),
            (true, Some(t)) => Some(t),
            (false, _) => None,
        };
        let base = SweepBase {
            n_items: self.n_items,
            d: self.d,
            p: self.noise,
            ncomp,
            tau,
            trials: self.trials,
            seed: self.seed,
            with_replacement: self.with_replacement,
            threads: threads_override.unwrap_or(self.threads),
        };
        let ln2 = std::f64::consts::LN_2;
        let points = self
            .points
            .into_iter()
            .map(|p| match p {
                GridPoint::Ks { q, n } => SweepPoint::Ks { q, n },
                GridPoint::Bernoulli { t, nu } => SweepPoint::Bernoulli {
                    t,
                    nu: nu.unwrap_or(ln2),
                },
                GridPoint::Ncc { t, nu } => SweepPoint::Ncc {
                    t,
                    nu: nu.unwrap_or(ln2),
                },
            })
            .collect();
        Ok((base, points))
    }
}
