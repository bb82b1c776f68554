//! Direct stochastic simulation of the queue.
//!
//! Replication `i` of a run with seed `s` draws from a ChaCha8 stream seeded by
//! `seed_from_u64(s)` and switched to stream `i`, so results do not depend on
//! how replications are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::kernel::QueueParams;

pub const DEFAULT_STEP_CAP: u64 = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replications: u64,
    pub horizon: f64,
}

impl SimulationConfig {
    pub fn new(seed: u64, replications: u64, horizon: f64) -> Result<Self> {
        if replications < 1 {
            return Err(domain("replications must be >= 1"));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(domain(format!("horizon must be finite and >= 0, got {horizon}")));
        }
        Ok(Self { seed, replications, horizon })
    }
}

pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// `X_t` given `X_0 = k`, simulated event by event.
pub fn gillespie_sample<R: Rng + ?Sized>(params: &QueueParams, t: f64, k: u64, rng: &mut R) -> Result<u64> {
    gillespie_sample_capped(params, t, k, rng, DEFAULT_STEP_CAP)
}

pub fn gillespie_sample_capped<R: Rng + ?Sized>(
    params: &QueueParams,
    t: f64,
    k: u64,
    rng: &mut R,
    step_cap: u64,
) -> Result<u64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be finite and >= 0, got {t}")));
    }
    let (lambda, mu) = (params.lambda(), params.mu());
    let mut state = k;
    let mut clock = 0.0;
    for _ in 0..step_cap {
        let total = lambda + state as f64 * mu;
        let hold: f64 = rng.sample(Exp1);
        clock += hold / total;
        if clock > t {
            return Ok(state);
        }
        if rng.random::<f64>() * total < lambda {
            state += 1;
        } else {
            state -= 1;
        }
    }
    Err(Error::StepCap { cap: step_cap })
}

/// Counts of the terminal state over all replications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalHistogram {
    pub counts: Vec<u64>,
    pub replications: u64,
}

impl TerminalHistogram {
    pub fn frequency(&self, n: u64) -> f64 {
        self.counts.get(n as usize).copied().unwrap_or(0) as f64 / self.replications as f64
    }

    fn add(&mut self, n: u64) {
        let i = n as usize;
        if self.counts.len() <= i {
            self.counts.resize(i + 1, 0);
        }
        self.counts[i] += 1;
        self.replications += 1;
    }

    fn combine(mut self, other: Self) -> Self {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.replications += other.replications;
        self
    }
}

/// Runs `config.replications` independent samples from `X_0 = k` in parallel.
pub fn simulate_terminal(params: &QueueParams, k: u64, config: &SimulationConfig) -> Result<TerminalHistogram> {
    let empty = || TerminalHistogram { counts: Vec::new(), replications: 0 };
    (0..config.replications)
        .into_par_iter()
        .try_fold(empty, |mut hist, i| {
            let mut rng = replication_rng(config.seed, i);
            hist.add(gillespie_sample(params, config.horizon, k, &mut rng)?);
            Ok(hist)
        })
        .try_reduce(empty, |a, b| Ok(a.combine(b)))
}

/// Empirical frequency against a reference probability with its binomial
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcordanceEntry {
    pub n: u64,
    pub empirical: f64,
    pub expected: f64,
    pub sigma: f64,
}

impl ConcordanceEntry {
    pub fn z_score(&self) -> f64 {
        if self.sigma == 0.0 {
            if self.empirical == self.expected { 0.0 } else { f64::INFINITY }
        } else {
            (self.empirical - self.expected) / self.sigma
        }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score().abs() <= sigmas
    }
}

pub fn concordance(hist: &TerminalHistogram, expected: impl Fn(u64) -> f64, n_max: u64) -> Vec<ConcordanceEntry> {
    let r = hist.replications as f64;
    (0..=n_max)
        .map(|n| {
            let p = expected(n);
            ConcordanceEntry { n, empirical: hist.frequency(n), expected: p, sigma: (p * (1.0 - p) / r).sqrt() }
        })
        .collect()
}
