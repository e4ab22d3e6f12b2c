//! Simulation of oscillator-to-oscillator bosonic codes under Gaussian
//! displacement noise.
//!
//! The crate works entirely at the phase-space level: a code is a symplectic
//! encoder S, noise is a Gaussian displacement ξ, and decoding is the
//! maximum-a-posteriori estimate of Sξ from its modulo-√(2π) reduced
//! syndrome block. Decoding is exact (lattice closest-vector search), and
//! [`montecarlo`] estimates success probabilities that [`bounds`] compares
//! against analytic upper bounds in terms of the squeezing of S.

pub mod bounds;
pub mod code;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod noise;
pub mod random;
pub mod symplectic;
pub mod unwrap;

pub use code::{centered_mod, CodeSpec, LogicalError, OscillatorCode, Syndrome, SQRT_2PI};
pub use error::{Error, Result};
pub use noise::{trial_stream, GaussianDensity, NoiseModel};
pub use symplectic::{validate_symplectic, EulerDecomposition, SymplecticMatrix};
pub use unwrap::{brute_force_estimate, decode_success, modulo_reduce, DecodeResult, SearchMode, UnwrapProblem};
