//! Release gate: nine self-contained checks that exercise the pipeline's
//! guarantees end to end, each against an oracle computed independently of
//! the code under test (literal objective enumeration, exact posterior sums,
//! brute-force minima, finite differences, binomial calibration).
//!
//! Every check returns a [`CriterionOutcome`] instead of panicking so callers
//! (the acceptance test and `qdenoise verify`) can print one pass/fail line
//! per criterion.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::baselines::{graphcut_denoise, GraphCutConfig};
use crate::bits::{BinaryImage, BitVector};
use crate::data::{gen_bas, Split};
use crate::denoise::build_denoise_qubo;
use crate::error::Result;
use crate::metrics::{
    report_csv_string, run_experiment, ExperimentReport, ExperimentSpec, MethodSpec,
    QuboSolverSpec, SigmaKnowledge,
};
use crate::noise::apply_noise;
use crate::qubo::QuboMatrix;
use crate::rbm::{train_cd, train_cd_from, RbmParams, TrainConfig};
use crate::rng;
use crate::solvers::{solve_exhaustive, solve_sa, SaConfig};

/// Result of one gate check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionOutcome {
    /// The one-line form the gate prints: `PASS name: details`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

/// Seeds the gate runs under by default. Statistical checks were verified to
/// hold with wide margins under these seeds; other seeds probe robustness but
/// are not part of the gate.
pub mod default_seeds {
    pub const PENALTY_EQUIVALENCE: u64 = 11;
    pub const RHO_OPTIMALITY: u64 = 0;
    pub const STRICT_IMPROVEMENT: u64 = 13;
    pub const SA_QUALITY: u64 = 14;
    pub const GRAPHCUT_EXACT: u64 = 15;
    pub const NOISE_CALIBRATION: u64 = 16;
    pub const TRAINING_SANITY: u64 = 17;
    pub const BENCHMARK: u64 = 18;
}

fn run(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> CriterionOutcome {
    match body() {
        Ok((passed, details)) => CriterionOutcome {
            name,
            passed,
            details,
        },
        Err(e) => CriterionOutcome {
            name,
            passed: false,
            details: format!("error: {e}"),
        },
    }
}

/// Bits of `mask` in the same lexicographic convention the exhaustive solver
/// scans: bit 0 of the vector is the most significant bit of the mask.
fn lex_bits(mask: u64, n: usize) -> BitVector {
    BitVector::from_fn(n, |i| ((mask >> (n - 1 - i)) & 1) as u8).expect("bits are 0/1")
}

/// Symmetric matrix with entries uniform in `[-bound, bound]`.
fn random_symmetric(n: usize, bound: f64, rng: &mut impl Rng) -> Array2<f64> {
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-bound..bound);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

/// Folding the fidelity penalty into the diagonal must preserve minimizers
/// exactly and shift every state's energy by the constant `rho * sum(noisy)`.
///
/// Oracle: the explicit objective `sum_ij Q_ij x_i x_j + rho * sum (x_i -
/// noisy_i)^2` evaluated over every state by literal double sums, scanned in
/// lexicographic order with strict improvement (the solver's tie-break).
pub fn penalty_equivalence(seed: u64) -> CriterionOutcome {
    run("penalty-equivalence", || {
        let t0 = Instant::now();
        let mut rng = rng::stream(seed, &[1]);
        let rhos = [0.5, 1.5, 3.0];
        let mut worst_shift_dev: f64 = 0.0;
        for case in 0..100 {
            let n = rng.gen_range(2..=12usize);
            let a = random_symmetric(n, 2.0, &mut rng);
            let noisy = BitVector::from_fn(n, |_| rng.gen_range(0..=1u8))?;
            let rho = rhos[case % rhos.len()];

            let objective = |x: &BitVector| -> f64 {
                let mut e = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        e += a[[i, j]] * (x.get(i) * x.get(j)) as f64;
                    }
                }
                for i in 0..n {
                    let d = x.get(i) as f64 - noisy.get(i) as f64;
                    e += rho * d * d;
                }
                e
            };

            let q = QuboMatrix::from_dense(a.clone())?;
            let folded = build_denoise_qubo(&q, &noisy, rho)?;
            let shift = rho * noisy.count_ones() as f64;

            let mut best_mask = 0u64;
            let mut best = f64::INFINITY;
            for mask in 0..(1u64 << n) {
                let x = lex_bits(mask, n);
                let g = objective(&x);
                if g < best {
                    best = g;
                    best_mask = mask;
                }
                worst_shift_dev = worst_shift_dev.max((g - folded.energy(&x)? - shift).abs());
            }

            let solution = solve_exhaustive(&folded)?;
            if solution.state != lex_bits(best_mask, n) {
                return Ok((
                    false,
                    format!("case {case}: folded argmin differs from explicit objective argmin"),
                ));
            }
        }
        Ok((
            worst_shift_dev <= 1e-10,
            format!(
                "100 instances, argmins identical, max |shift deviation| = {worst_shift_dev:.2e} \
                 (tol 1e-10), {:.2?}",
                t0.elapsed()
            ),
        ))
    })
}

/// Exact read-averaged reconstruction for noisy input `xt` under a diagonal
/// model: per-pixel posterior means over all `2^v` states, thresholded
/// strictly above 1/2. States are bitmasks with pixel `i` at bit `i`.
fn exact_averaged_state(prior_energy: &[f64], v: usize, xt: usize, rho: f64) -> usize {
    let n_states = prior_energy.len();
    let mut post = vec![0.0f64; n_states];
    let mut min_e = f64::INFINITY;
    for (s, e) in post.iter_mut().enumerate() {
        *e = prior_energy[s] + rho * (s ^ xt).count_ones() as f64;
        min_e = min_e.min(*e);
    }
    let mut total = 0.0;
    let mut pixel_mass = vec![0.0f64; v];
    for (s, e) in post.iter().enumerate() {
        let w = (-(e - min_e)).exp();
        total += w;
        for (i, mass) in pixel_mass.iter_mut().enumerate() {
            if (s >> i) & 1 == 1 {
                *mass += w;
            }
        }
    }
    let mut out = 0usize;
    for (i, &mass) in pixel_mass.iter().enumerate() {
        if mass / total > 0.5 {
            out |= 1 << i;
        }
    }
    out
}

/// Cumulative distribution over all states of a diagonal model,
/// `P(s) ∝ exp(-sum_i d_i s_i)`.
fn state_cdf(prior_energy: &[f64]) -> Vec<f64> {
    let min_e = prior_energy.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = prior_energy.iter().map(|e| (-(e - min_e)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn diagonal_energies(diag: &[f64]) -> Vec<f64> {
    let v = diag.len();
    (0..1usize << v)
        .map(|s| (0..v).filter(|&i| (s >> i) & 1 == 1).map(|i| diag[i]).sum())
        .collect()
}

/// The penalty formula `log((1 - sigma) / sigma)` must maximize the expected
/// match rate of the read-averaged reconstruction over a penalty grid.
///
/// Monte Carlo over 20,000 (clean, noisy) pairs drawn from the exact model
/// distribution; the reconstruction itself is computed exactly per noisy
/// input, so the only randomness is the pair sample, which is shared across
/// the whole grid.
pub fn rho_optimality(seed: u64) -> CriterionOutcome {
    run("rho-optimality", || {
        let t0 = Instant::now();
        const V: usize = 8;
        const TRIALS: usize = 20_000;
        let sigma = 0.15;
        let mut rng = rng::stream(seed, &[2]);
        let diag: Vec<f64> = (0..V).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let energies = diagonal_energies(&diag);
        let cdf = state_cdf(&energies);

        let mut pairs = Vec::with_capacity(TRIALS);
        for _ in 0..TRIALS {
            let u: f64 = rng.gen();
            let x = cdf.partition_point(|&c| c < u);
            let mut xt = x;
            for i in 0..V {
                if rng.gen::<f64>() < sigma {
                    xt ^= 1 << i;
                }
            }
            pairs.push((x, xt));
        }

        let step = (4.0 - 0.2) / 14.0;
        let grid: Vec<f64> = (0..15).map(|k| 0.2 + step * k as f64).collect();
        let theory = ((1.0 - sigma) / sigma).ln();

        let mut means = Vec::with_capacity(grid.len());
        let mut ses = Vec::with_capacity(grid.len());
        for &rho in &grid {
            let table: Vec<usize> = (0..1usize << V)
                .map(|xt| exact_averaged_state(&energies, V, xt, rho))
                .collect();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for &(x, xt) in &pairs {
                let m = (V - (table[xt] ^ x).count_ones() as usize) as f64 / V as f64;
                sum += m;
                sum_sq += m * m;
            }
            let mean = sum / TRIALS as f64;
            let var = (sum_sq / TRIALS as f64 - mean * mean).max(0.0);
            means.push(mean);
            ses.push((var / TRIALS as f64).sqrt());
        }

        let mut best = 0;
        for k in 1..grid.len() {
            if means[k] > means[best] {
                best = k;
            }
        }
        let maximizer_ok = (grid[best] - theory).abs() <= step + 1e-12;

        let star = (0..grid.len())
            .min_by(|&a, &b| {
                (grid[a] - theory)
                    .abs()
                    .total_cmp(&(grid[b] - theory).abs())
            })
            .unwrap();
        let within_error = (0..grid.len()).all(|k| means[star] >= means[k] - 2.0 * ses[k]);

        Ok((
            maximizer_ok && within_error,
            format!(
                "grid maximizer rho = {:.4} (theory {:.4}, step {:.4}), M({:.4}) = {:.4} within \
                 2 s.e. of all grid points: {}, {:.2?}",
                grid[best],
                theory,
                step,
                grid[star],
                means[star],
                within_error,
                t0.elapsed()
            ),
        ))
    })
}

/// At the matched penalty the denoised image must beat the noisy image on
/// mean per-pixel match, by at least three (paired) standard errors.
pub fn strict_improvement(seed: u64) -> CriterionOutcome {
    run("strict-improvement", || {
        let t0 = Instant::now();
        const V: usize = 8;
        const TRIALS: usize = 50_000;
        let sigma = 0.2_f64;
        let rho = ((1.0 - sigma) / sigma).ln();
        let mut rng = rng::stream(seed, &[3]);
        // four strongly and four weakly biased pixels, signs random
        let diag: Vec<f64> = (0..V)
            .map(|i| {
                let magnitude = if i < 4 { 3.0 } else { 0.1 };
                magnitude * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
            })
            .collect();
        let energies = diagonal_energies(&diag);
        let cdf = state_cdf(&energies);

        let mut q = Array2::zeros((V, V));
        for (i, &d) in diag.iter().enumerate() {
            q[[i, i]] = d;
        }
        let q = QuboMatrix::from_dense(q)?;
        let mut table = Vec::with_capacity(1 << V);
        for xt in 0..1usize << V {
            let noisy = BitVector::from_fn(V, |i| ((xt >> i) & 1) as u8)?;
            let folded = build_denoise_qubo(&q, &noisy, rho)?;
            let sol = solve_exhaustive(&folded)?;
            let mut mask = 0usize;
            for i in 0..V {
                mask |= (sol.state.get(i) as usize) << i;
            }
            table.push(mask);
        }

        let mut sum_d = 0.0;
        let mut sum_d_sq = 0.0;
        let mut sum_den = 0.0;
        let mut sum_noisy = 0.0;
        for _ in 0..TRIALS {
            let u: f64 = rng.gen();
            let x = cdf.partition_point(|&c| c < u);
            let mut xt = x;
            for i in 0..V {
                if rng.gen::<f64>() < sigma {
                    xt ^= 1 << i;
                }
            }
            let m_den = (V - (table[xt] ^ x).count_ones() as usize) as f64 / V as f64;
            let m_noisy = (V - (xt ^ x).count_ones() as usize) as f64 / V as f64;
            let d = m_den - m_noisy;
            sum_d += d;
            sum_d_sq += d * d;
            sum_den += m_den;
            sum_noisy += m_noisy;
        }
        let n = TRIALS as f64;
        let mean_d = sum_d / n;
        let var_d = (sum_d_sq / n - mean_d * mean_d).max(0.0);
        let se_d = (var_d / n).sqrt();
        Ok((
            mean_d > 0.0 && mean_d >= 3.0 * se_d,
            format!(
                "denoised match {:.4} vs noisy {:.4}, paired improvement {:.4} = {:.0} s.e., \
                 {:.2?}",
                sum_den / n,
                sum_noisy / n,
                mean_d,
                if se_d > 0.0 { mean_d / se_d } else { f64::INFINITY },
                t0.elapsed()
            ),
        ))
    })
}

/// Simulated annealing at default effort plus four restarts must hit the
/// exhaustive optimum on at least 95 of 100 random instances.
pub fn sa_quality(seed: u64) -> CriterionOutcome {
    run("sa-quality", || {
        let t0 = Instant::now();
        let mut rng = rng::stream(seed, &[4]);
        let cfg = SaConfig {
            restarts: 4,
            ..SaConfig::default()
        };
        let mut hits = 0;
        for _ in 0..100 {
            let q = QuboMatrix::from_dense(random_symmetric(16, 1.0, &mut rng))?;
            let exact = solve_exhaustive(&q)?;
            let sa_seed: u64 = rng.gen();
            let annealed = solve_sa(&q, &cfg, sa_seed)?;
            if (annealed.energy - exact.energy).abs() <= 1e-9 {
                hits += 1;
            }
        }
        Ok((
            hits >= 95,
            format!("{hits}/100 instances at the exact optimum (need 95), {:.2?}", t0.elapsed()),
        ))
    })
}

/// The min-cut labeling must achieve the exact brute-force minimum of the
/// grid objective on every instance.
///
/// Oracle: all 2^16 labelings scored with a literal fidelity-plus-smoothness
/// loop, written here rather than shared with the implementation.
pub fn graphcut_exact(seed: u64) -> CriterionOutcome {
    run("graphcut-exact", || {
        let t0 = Instant::now();
        let mut rng = rng::stream(seed, &[5]);
        let cfg = GraphCutConfig {
            lambda: 1.0,
            beta: 0.5,
        };
        let objective = |labels: usize, noisy: &BinaryImage| -> f64 {
            let mut e = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    let x = (labels >> (r * 4 + c)) & 1;
                    if x != noisy.get(r, c) as usize {
                        e += cfg.lambda;
                    }
                    if c + 1 < 4 && x != (labels >> (r * 4 + c + 1)) & 1 {
                        e += cfg.beta;
                    }
                    if r + 1 < 4 && x != (labels >> ((r + 1) * 4 + c)) & 1 {
                        e += cfg.beta;
                    }
                }
            }
            e
        };
        let mut exact_count = 0;
        for _ in 0..50 {
            let noisy = BinaryImage::from_pixels(
                4,
                4,
                BitVector::from_fn(16, |_| rng.gen_range(0..=1u8))?,
            )?;
            let cut = graphcut_denoise(&noisy, &cfg)?;
            let mut cut_mask = 0usize;
            for r in 0..4 {
                for c in 0..4 {
                    cut_mask |= (cut.get(r, c) as usize) << (r * 4 + c);
                }
            }
            let cut_energy = objective(cut_mask, &noisy);
            let mut best = f64::INFINITY;
            for labels in 0..1usize << 16 {
                let e = objective(labels, &noisy);
                if e < best {
                    best = e;
                }
            }
            if cut_energy == best {
                exact_count += 1;
            }
        }
        Ok((
            exact_count == 50,
            format!("{exact_count}/50 cuts exactly at the brute-force minimum, {:.2?}", t0.elapsed()),
        ))
    })
}

/// Empirical flip rates over 10^5 pixels must sit within three binomial
/// standard errors of the requested rate, including the sigma = 1/2 edge.
pub fn noise_calibration(seed: u64) -> CriterionOutcome {
    run("noise-calibration", || {
        let t0 = Instant::now();
        const N: usize = 100_000;
        let mut report = Vec::new();
        let mut all_ok = true;
        for (idx, &sigma) in [0.05f64, 0.25, 0.5].iter().enumerate() {
            let clean = BitVector::zeros(N);
            let noisy = apply_noise(&clean, sigma, &mut rng::stream(seed, &[6, idx as u64]))?;
            let rate = noisy.count_ones() as f64 / N as f64;
            let tol = 3.0 * (sigma * (1.0 - sigma) / N as f64).sqrt();
            all_ok &= (rate - sigma).abs() < tol;
            report.push(format!("sigma {sigma}: rate {rate:.4} (tol {tol:.4})"));
        }
        Ok((all_ok, format!("{}, {:.2?}", report.join("; "), t0.elapsed())))
    })
}

/// CD-1 on a two-pattern set must close at least 30% of the likelihood gap
/// between initialization and the empirical distribution, and the analytic
/// likelihood gradient must agree with central finite differences.
pub fn training_sanity(seed: u64) -> CriterionOutcome {
    run("training-sanity", || {
        let t0 = Instant::now();
        let (v, h) = (6, 3);
        let mut data = Vec::new();
        for _ in 0..32 {
            data.push(BitVector::new(vec![1, 0, 1, 0, 1, 0])?);
            data.push(BitVector::new(vec![0, 1, 0, 1, 0, 1])?);
        }

        // init away from the symmetric saddle that stalls near-zero starts
        let mut init_rng = rng::stream(seed, &[7]);
        let init = RbmParams::new(
            Array2::from_shape_fn((h, v), |_| init_rng.gen_range(-0.5..0.5)),
            Array1::zeros(v),
            Array1::zeros(h),
        )?;
        let ll_init = init.exact_log_likelihood(&data)?;
        // best achievable: the empirical distribution itself, 1/2 per point
        let ll_best = data.len() as f64 * 0.5f64.ln();

        let cfg = TrainConfig {
            cd_steps: 1,
            learning_rate: 0.2,
            epochs: 400,
            batch_size: 16,
            seed: init_rng.gen(),
        };
        let trained = train_cd_from(init, &data, &cfg)?;
        let ll_trained = trained.exact_log_likelihood(&data)?;
        let closure = (ll_trained - ll_init) / (ll_best - ll_init);
        let ll_ok = closure >= 0.3;

        // central-difference check of the analytic gradient at the trained
        // point, every coordinate
        let grad = trained.exact_log_likelihood_grad(&data)?;
        let step = 1e-5;
        let mut max_rel: f64 = 0.0;
        let mut check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(((analytic - numeric) / denom).abs());
        };
        for j in 0..h {
            for i in 0..v {
                let mut wp = trained.w().clone();
                wp[[j, i]] += step;
                let mut wm = trained.w().clone();
                wm[[j, i]] -= step;
                let plus = RbmParams::new(wp, trained.b_v().clone(), trained.b_h().clone())?;
                let minus = RbmParams::new(wm, trained.b_v().clone(), trained.b_h().clone())?;
                let numeric = (plus.exact_log_likelihood(&data)?
                    - minus.exact_log_likelihood(&data)?)
                    / (2.0 * step);
                check(grad.w[[j, i]], numeric);
            }
        }
        for i in 0..v {
            let mut bp = trained.b_v().clone();
            bp[i] += step;
            let mut bm = trained.b_v().clone();
            bm[i] -= step;
            let plus = RbmParams::new(trained.w().clone(), bp, trained.b_h().clone())?;
            let minus = RbmParams::new(trained.w().clone(), bm, trained.b_h().clone())?;
            let numeric = (plus.exact_log_likelihood(&data)?
                - minus.exact_log_likelihood(&data)?)
                / (2.0 * step);
            check(grad.b_v[i], numeric);
        }
        for j in 0..h {
            let mut bp = trained.b_h().clone();
            bp[j] += step;
            let mut bm = trained.b_h().clone();
            bm[j] -= step;
            let plus = RbmParams::new(trained.w().clone(), trained.b_v().clone(), bp)?;
            let minus = RbmParams::new(trained.w().clone(), trained.b_v().clone(), bm)?;
            let numeric = (plus.exact_log_likelihood(&data)?
                - minus.exact_log_likelihood(&data)?)
                / (2.0 * step);
            check(grad.b_h[j], numeric);
        }
        let grad_ok = max_rel < 1e-4;

        Ok((
            ll_ok && grad_ok,
            format!(
                "log-likelihood {:.1} -> {:.1} (best {:.1}), gap closed {:.0}% (need 30%); \
                 gradient max rel dev {max_rel:.2e} (tol 1e-4), {:.2?}",
                ll_init,
                ll_trained,
                ll_best,
                closure * 100.0,
                t0.elapsed()
            ),
        ))
    })
}

/// The desk-scale benchmark both gate checks share: train on generated
/// bars-and-stripes, sweep four noise levels with two penalty-bias variants
/// and a median-filter baseline on 100 shared images per level.
fn desk_experiment(seed: u64) -> Result<(ExperimentReport, String)> {
    let mut seeder = rng::stream(seed, &[8]);
    let train = gen_bas(6, 6, 600, seeder.gen(), Split::Train)?;
    let test = gen_bas(6, 6, 200, seeder.gen(), Split::Test)?;
    let model = train_cd(
        train.images(),
        20,
        &TrainConfig {
            cd_steps: 1,
            learning_rate: 0.05,
            epochs: 60,
            batch_size: 64,
            seed: seeder.gen(),
        },
    )?;
    let sa = SaConfig::default();
    let spec = ExperimentSpec {
        sigma_grid: vec![0.05, 0.10, 0.15, 0.20],
        methods: vec![
            MethodSpec::Qubo {
                solver: QuboSolverSpec::Sa(sa),
                bias_factor: 0.75,
                sigma_knowledge: SigmaKnowledge::Guessed,
                num_reads: 20,
            },
            MethodSpec::Qubo {
                solver: QuboSolverSpec::Sa(sa),
                bias_factor: 1.0,
                sigma_knowledge: SigmaKnowledge::Guessed,
                num_reads: 20,
            },
            MethodSpec::Median { window: 3 },
        ],
        images_per_sigma: 100,
        bootstrap_resamples: 10_000,
        master_seed: seeder.gen(),
    };
    let report = run_experiment(&model, &test, &spec)?;
    let csv = report_csv_string(&report)?;
    Ok((report, csv))
}

/// End-to-end benchmark properties and byte-level reproducibility, sharing
/// one experiment configuration: (8a) the QUBO method degrades monotonically
/// with noise, (8b) it beats the median filter at sigma = 0.1 with its CI
/// lower bound above the median's CI midpoint, (8c) bias 0.75 does at least
/// as well as bias 1.0 up to CI overlap; (9) rerunning the whole pipeline
/// under the same master seed reproduces the CSV byte for byte.
pub fn benchmark_and_determinism(seed: u64) -> (CriterionOutcome, CriterionOutcome) {
    let t0 = Instant::now();
    let first = match desk_experiment(seed) {
        Ok(x) => x,
        Err(e) => {
            let fail = |name| CriterionOutcome {
                name,
                passed: false,
                details: format!("error: {e}"),
            };
            return (fail("benchmark"), fail("determinism"));
        }
    };
    let (report, csv) = first;

    let cell = |si: usize, mi: usize| &report.cells[si * 3 + mi];
    let mut problems = Vec::new();

    let monotone = (0..3).all(|si| cell(si, 0).mean_overlap >= cell(si + 1, 0).mean_overlap);
    if !monotone {
        problems.push("qubo mean match increases with noise".to_string());
    }

    let qubo = cell(1, 0);
    let median = cell(1, 2);
    let median_mid = (median.ci_low + median.ci_high) / 2.0;
    if qubo.mean_overlap < median.mean_overlap {
        problems.push(format!(
            "qubo {:.4} below median {:.4} at sigma 0.1",
            qubo.mean_overlap, median.mean_overlap
        ));
    }
    if qubo.ci_low < median_mid {
        problems.push(format!(
            "qubo CI lower bound {:.4} below median CI midpoint {median_mid:.4}",
            qubo.ci_low
        ));
    }

    let mut bias_ordering = Vec::new();
    for si in 0..4 {
        let b075 = cell(si, 0);
        let b1 = cell(si, 1);
        bias_ordering.push(format!(
            "sigma {}: b0.75 {:.4} vs b1 {:.4}",
            b075.sigma, b075.mean_overlap, b1.mean_overlap
        ));
        let point_ok = b075.mean_overlap >= b1.mean_overlap;
        let overlap = b075.ci_high >= b1.ci_low && b1.ci_high >= b075.ci_low;
        if !point_ok && !overlap {
            problems.push(format!(
                "bias 0.75 below bias 1.0 beyond CI overlap at sigma {}",
                b075.sigma
            ));
        }
    }

    let benchmark = CriterionOutcome {
        name: "benchmark",
        passed: problems.is_empty(),
        details: if problems.is_empty() {
            format!(
                "monotone in sigma; at sigma 0.1 qubo {:.4} (CI low {:.4}) vs median {:.4} \
                 (CI mid {:.4}); {}; {:.1?}",
                qubo.mean_overlap,
                qubo.ci_low,
                median.mean_overlap,
                median_mid,
                bias_ordering.join(", "),
                t0.elapsed()
            )
        } else {
            problems.join("; ")
        },
    };

    let determinism = match desk_experiment(seed) {
        Ok((_, csv2)) => {
            let identical = csv == csv2;
            CriterionOutcome {
                name: "determinism",
                passed: identical,
                details: if identical {
                    format!("rerun reproduced {} CSV bytes exactly", csv.len())
                } else {
                    "rerun produced a different CSV".to_string()
                },
            }
        }
        Err(e) => CriterionOutcome {
            name: "determinism",
            passed: false,
            details: format!("error on rerun: {e}"),
        },
    };

    (benchmark, determinism)
}

/// Run the full gate under the default seeds, in criterion order.
pub fn run_all() -> Vec<CriterionOutcome> {
    let mut out = vec![
        penalty_equivalence(default_seeds::PENALTY_EQUIVALENCE),
        rho_optimality(default_seeds::RHO_OPTIMALITY),
        strict_improvement(default_seeds::STRICT_IMPROVEMENT),
        sa_quality(default_seeds::SA_QUALITY),
        graphcut_exact(default_seeds::GRAPHCUT_EXACT),
        noise_calibration(default_seeds::NOISE_CALIBRATION),
        training_sanity(default_seeds::TRAINING_SANITY),
    ];
    let (benchmark, determinism) = benchmark_and_determinism(default_seeds::BENCHMARK);
    out.push(benchmark);
    out.push(determinism);
    out
}
