//! Transition probabilities of the queue truncated to `{0, ..., N}` via
//! uniformization: `e^{tQ} = sum_m e^{-L t} (L t)^m / m! P^m`, `P = I + Q/L`.
//!
//! Births out of state `N` are suppressed. The resulting bias is monitored by
//! the mass each row puts on `N`.

use crate::distributions::{poisson_window, PoissonLaw};
use crate::error::{domain, Result};
use crate::kernel::QueueParams;

/// Rows starting this far below the boundary are the ones reported against.
pub const BOUNDARY_MARGIN: usize = 20;

#[derive(Debug, Clone)]
pub struct UniformizedKernel {
    size: usize,
    probs: Vec<f64>,
    /// Number of Poisson terms summed, `M + 1`.
    pub terms: u64,
    /// Mass each row assigns to the boundary state `N`.
    pub boundary_mass: Vec<f64>,
    pub warnings: Vec<String>,
}

impl UniformizedKernel {
    /// Number of states, `N + 1`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.probs[from * self.size..(from + 1) * self.size]
    }
}

struct Chain {
    up: Vec<f64>,
    down: Vec<f64>,
    stay: Vec<f64>,
}

impl Chain {
    fn new(params: &QueueParams, n: usize, rate: f64) -> Self {
        let up: Vec<f64> = (0..=n).map(|i| if i < n { params.lambda() / rate } else { 0.0 }).collect();
        let down: Vec<f64> = (0..=n).map(|i| i as f64 * params.mu() / rate).collect();
        let stay = up.iter().zip(&down).map(|(u, d)| 1.0 - u - d).collect();
        Self { up, down, stay }
    }

    /// `out = v P` for a row vector `v`.
    fn step(&self, v: &[f64], out: &mut [f64]) {
        let last = v.len() - 1;
        for j in 0..=last {
            let mut acc = v[j] * self.stay[j];
            if j > 0 {
                acc += v[j - 1] * self.up[j - 1];
            }
            if j < last {
                acc += v[j + 1] * self.down[j + 1];
            }
            out[j] = acc;
        }
    }
}

/// `e^{t Q_N}` on `{0, ..., N}` with the Poisson(`L t`) series truncated at a
/// certified tail of at most `tol`.
pub fn uniformized_kernel(params: &QueueParams, t: f64, n: usize, tol: f64) -> Result<UniformizedKernel> {
    if n < 1 {
        return Err(domain("truncation level N must be >= 1"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be finite and > 0, got {t}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(domain(format!("tol must lie in (0, 1), got {tol}")));
    }
    let rate = params.lambda() + n as f64 * params.mu();
    let chain = Chain::new(params, n, rate);
    let mix = PoissonLaw::new(rate * t)?;
    let window = poisson_window(rate * t, tol)?;
    let weights: Vec<f64> = (0..=window.right).map(|m| mix.log_pmf(m).exp()).collect();

    let size = n + 1;
    let mut probs = vec![0.0; size * size];
    let mut v = vec![0.0; size];
    let mut next = vec![0.0; size];
    for from in 0..size {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[from] = 1.0;
        let acc = &mut probs[from * size..(from + 1) * size];
        for (m, w) in weights.iter().enumerate() {
            if m > 0 {
                chain.step(&v, &mut next);
                std::mem::swap(&mut v, &mut next);
            }
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += w * x;
            }
        }
    }
    let boundary_mass: Vec<f64> = (0..size).map(|i| probs[i * size + n]).collect();
    let mut warnings = Vec::new();
    let watched = size.saturating_sub(BOUNDARY_MARGIN).max(1);
    if let Some((row, mass)) = boundary_mass[..watched]
        .iter()
        .copied()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .filter(|(_, m)| *m > tol)
    {
        warnings.push(format!(
            "truncation N={n} too small: row {row} puts mass {mass:e} on the boundary (tol {tol:e})"
        ));
    }
    Ok(UniformizedKernel { size, probs, terms: window.right + 1, boundary_mass, warnings })
}
