//! Independent ground truth for the kernel: exact rational convolution,
//! uniformization of the truncated generator, and direct simulation.

pub mod exact;
pub mod simulation;
pub mod uniformization;

pub use exact::{exact_rational_convolution, ln_rational, rational_from_f64, ExactComparison, ExactConvolution};
pub use simulation::{
    concordance, gillespie_sample, gillespie_sample_capped, replication_rng, simulate_terminal, ConcordanceEntry,
    SimulationConfig, TerminalHistogram,
};
pub use uniformization::{uniformized_kernel, UniformizedKernel};
