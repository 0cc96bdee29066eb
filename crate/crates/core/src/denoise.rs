//! Penalty-augmented QUBO denoising.
//!
//! Given a trained RBM and a corrupted visible vector `x~`, the target
//! objective is the model energy plus a data-fidelity term
//! `rho * sum_i (x_i - x~_i)^2` over the visible units. Because the units are
//! binary, that penalty folds into the QUBO diagonal: the penalized matrix
//! equals the original except `Q_ii + rho * (1 - 2 x~_i)` on visible
//! diagonal entries, shifting all state energies by the constant
//! `rho * sum_i x~_i`. Minimizers are therefore identical.
//!
//! The penalty weight that makes the minimizer the MAP estimate under
//! independent flip noise of rate `sigma` is `log((1 - sigma) / sigma)`.
//! When `sigma` is only a guess, shrinking it by a bias factor `b < 1`
//! (i.e. `rho = log((1 - b s) / (b s))`) hedges toward trusting the model
//! less than an overconfident noise estimate would.
//!
//! [`denoise`] runs a solver `num_reads` times on the penalized QUBO with
//! per-read seeds, averages the returned states coordinate-wise, and
//! thresholds the visible means at 1/2 (ties resolve to 0).

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::rbm::RbmParams;
use crate::rng;
use crate::solvers::{QuboSolver, Solution};
use ndarray::Array2;
use rayon::prelude::*;

/// How a single denoising call picks its penalty and its effort.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DenoiseConfig {
    /// Estimated flip rate of the corruption, in (0, 0.5).
    pub sigma_estimate: f64,
    /// Multiplier applied to `sigma_estimate` before the penalty formula.
    pub bias_factor: f64,
    /// Fixed penalty that bypasses the formula entirely when set.
    pub rho_override: Option<f64>,
    /// Number of solver reads averaged into the answer.
    pub num_reads: usize,
    /// Cutoff for the per-pixel mean; exceeding it strictly yields a 1.
    pub threshold: f64,
    /// Master seed; each read draws from its own derived stream.
    pub seed: u64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            sigma_estimate: 0.1,
            bias_factor: 0.75,
            rho_override: None,
            num_reads: 100,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl DenoiseConfig {
    /// The penalty the call will use: the override if present, otherwise
    /// the bias-adjusted formula. Must come out positive and finite.
    pub fn effective_rho(&self) -> Result<f64> {
        let rho = match self.rho_override {
            Some(r) => r,
            None => robust_rho(self.sigma_estimate, self.bias_factor)?,
        };
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!(
                "penalty rho = {rho} must be positive and finite"
            )));
        }
        Ok(rho)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::invalid("num_reads must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        self.effective_rho()?;
        Ok(())
    }
}

/// Everything a denoising run produced, including per-read diagnostics.
#[derive(Debug, Clone)]
pub struct DenoiseResult {
    /// Thresholded visible reconstruction.
    pub denoised: BitVector,
    /// Mean of each visible unit across reads.
    pub per_pixel_mean: Vec<f64>,
    /// Mean of each hidden unit across reads.
    pub hidden_mean: Vec<f64>,
    /// Raw solver reads over the joint visible-plus-hidden state.
    pub reads: Vec<Solution>,
    /// Penalty actually applied.
    pub rho_used: f64,
}

/// MAP penalty for a known flip rate: `log((1 - sigma) / sigma)`.
/// Requires `0 < sigma < 0.5` so the result is positive.
pub fn optimal_rho(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 0.5) {
        return Err(Error::invalid(format!(
            "noise level {sigma} outside (0, 0.5)"
        )));
    }
    Ok(((1.0 - sigma) / sigma).ln())
}

/// Penalty for an estimated flip rate shrunk by `bias_factor`:
/// `optimal_rho(bias_factor * sigma_estimate)`.
pub fn robust_rho(sigma_estimate: f64, bias_factor: f64) -> Result<f64> {
    if !(bias_factor > 0.0 && bias_factor.is_finite()) {
        return Err(Error::invalid(format!(
            "bias factor {bias_factor} must be positive and finite"
        )));
    }
    optimal_rho(bias_factor * sigma_estimate)
}

/// Fold the fidelity penalty into the QUBO diagonal: entry `(i, i)` becomes
/// `Q_ii + rho * (1 - 2 noisy_i)` for each of the first `noisy.len()`
/// (visible) indices; everything else is untouched. The energy of every state
/// shifts from the explicit penalized objective by exactly
/// `rho * sum_i noisy_i`, so minimizers are preserved.
pub fn build_denoise_qubo(q: &QuboMatrix, noisy: &BitVector, rho: f64) -> Result<QuboMatrix> {
    if noisy.len() > q.n() {
        return Err(Error::LengthMismatch {
            expected: q.n(),
            got: noisy.len(),
        });
    }
    if noisy.is_empty() {
        return Err(Error::EmptyData("penalty over zero visible units"));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!(
            "penalty rho = {rho} must be non-negative and finite"
        )));
    }
    let mut entries: Array2<f64> = q.to_dense();
    for i in 0..noisy.len() {
        entries[[i, i]] += rho * (1.0 - 2.0 * noisy.get(i) as f64);
    }
    QuboMatrix::from_dense(entries)
}

/// Denoise `noisy` with the model `params` and the given solver.
pub fn denoise(
    params: &RbmParams,
    noisy: &BitVector,
    cfg: &DenoiseConfig,
    solver: &dyn QuboSolver,
) -> Result<DenoiseResult> {
    cfg.validate()?;
    let nv = params.num_visible();
    let nh = params.num_hidden();
    if noisy.len() != nv {
        return Err(Error::LengthMismatch {
            expected: nv,
            got: noisy.len(),
        });
    }
    let rho = cfg.effective_rho()?;
    let q = build_denoise_qubo(&params.to_qubo(), noisy, rho)?;

    let reads: Vec<Result<Solution>> = (0..cfg.num_reads)
        .into_par_iter()
        .map(|read| {
            let read_seed = rng::mix(&[0x7265616473, cfg.seed, read as u64]);
            solver.solve(&q, read_seed).map_err(|e| Error::Solver {
                read,
                message: e.to_string(),
            })
        })
        .collect();

    let mut per_pixel_mean = vec![0.0f64; nv];
    let mut hidden_mean = vec![0.0f64; nh];
    let mut collected = Vec::with_capacity(cfg.num_reads);
    for (read, sol) in reads.into_iter().enumerate() {
        let sol = sol?;
        if sol.state.len() != nv + nh {
            return Err(Error::Solver {
                read,
                message: format!(
                    "solver returned {} bits for a {} unit problem",
                    sol.state.len(),
                    nv + nh
                ),
            });
        }
        for (i, m) in per_pixel_mean.iter_mut().enumerate() {
            *m += sol.state.get(i) as f64;
        }
        for (j, m) in hidden_mean.iter_mut().enumerate() {
            *m += sol.state.get(nv + j) as f64;
        }
        collected.push(sol);
    }
    let scale = 1.0 / cfg.num_reads as f64;
    for m in per_pixel_mean.iter_mut().chain(hidden_mean.iter_mut()) {
        *m *= scale;
    }

    let denoised = BitVector::from_fn(nv, |i| u8::from(per_pixel_mean[i] > cfg.threshold))
        .expect("thresholded bits");
    Ok(DenoiseResult {
        denoised,
        per_pixel_mean,
        hidden_mean,
        reads: collected,
        rho_used: rho,
    })
}
