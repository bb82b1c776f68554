//! Certified transition kernels of the M/M/inf queue and numerical checks of
//! semi-log-convexity inequalities for its semigroup.
//!
//! The kernel `G_k(n) = P(X_t = n | X_0 = k)` is evaluated through the
//! decomposition `Law(X_t | X_0 = k) = B(k, p_t) * pi_{rho q_t}` entirely in
//! log domain, with explicit rounding and truncation budgets. Independent
//! oracles (exact rational convolution, uniformization, simulation) live in
//! [`oracle`].

pub mod bounds;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod kernel;
pub mod numeric;
pub mod oracle;

pub use bounds::{
    glmrs_bound, lemma_k, log_laplacian, remark_m, sharp_bound, sharpness_decay, verify_generalized,
    verify_kernel_lemma, verify_theorem, verify_theorem_with, CaseId, CaseResult, CaseStatus, SharpnessPoint,
    TheoremBound, Verdict, VerificationReport,
};
pub use distributions::{
    binomial_log_pmf, convolve, poisson_log_pmf, poisson_window, BinomialLaw, CertifiedPmf, LogValue, PoissonLaw,
    PoissonWindow,
};
pub use error::{Error, Result};
pub use kernel::{
    generator_apply, kernel_entry, mehler_row, reversibility_defect, semigroup_apply, Estimate, KernelRow, Observable,
    QueueParams, ReversibilityDefect,
};
