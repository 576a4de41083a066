//! Non-adaptive group testing with Reed-Solomon pooling designs.
//!
//! The crate builds Kautz-Singleton measurement matrices (Reed-Solomon
//! codewords expanded into unit-weight blocks) alongside Bernoulli and
//! near-constant-column-weight baselines, decodes pooled outcomes with the
//! cover (COMP) decoder or a noise-tolerant threshold rule, offers a
//! recursive stacked construction whose decoding cost is polynomial in the
//! number of tests, and ships exact brute-force oracles plus a reproducible
//! Monte Carlo harness for success-probability experiments.

mod bits;

pub mod decoders;
pub mod designs;
pub mod error;
pub mod gf;
pub mod oracle;
pub mod recursive;
pub mod rscode;
pub mod sim;

pub use decoders::{DecoderConfig, Measurement};
pub use designs::TestMatrix;
pub use error::{Error, Result};
pub use gf::PrimeField;
pub use recursive::RecursiveScheme;
pub use rscode::{GtParams, Regime, RsCode};
