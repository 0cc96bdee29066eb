//! Experiment runner: noise sweeps over a test set, method comparison on
//! shared noisy batches, bootstrap confidence intervals, and report emission
//! as CSV, SVG, and a JSON sidecar.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{
    gaussian_filter, gibbs_denoise, graphcut_denoise, median_filter, GibbsDenoiseConfig,
    GraphCutConfig,
};
use crate::bits::{hamming, BinaryImage, BitVector};
use crate::data::Dataset;
use crate::denoise::{denoise, DenoiseConfig};
use crate::error::{Error, Result};
use crate::noise::apply_noise;
use crate::rbm::RbmParams;
use crate::rng;
use crate::solvers::{ExhaustiveSolver, SaConfig, SaSolver};

const TAG_SELECT: u64 = 0x73656c656374;
const TAG_NOISE: u64 = 0x6e6f697365;
const TAG_METHOD: u64 = 0x6d657468;
const TAG_BOOT: u64 = 0x626f6f74;
const TAG_GUESS: u64 = 0x6775657373;

/// Fraction of pixels on which the two vectors agree.
pub fn pixel_match_rate(denoised: &BitVector, original: &BitVector) -> Result<f64> {
    if denoised.is_empty() {
        return Err(Error::EmptyData("match rate of empty vectors"));
    }
    let d = hamming(denoised, original)?;
    Ok(1.0 - d as f64 / denoised.len() as f64)
}

/// Percentile bootstrap interval for the mean of `values`.
///
/// Resamples the values with replacement `resamples` times and returns the
/// `(1 - level) / 2` and `(1 + level) / 2` quantiles of the resampled means.
/// Deterministic given `seed`.
pub fn bootstrap_ci(
    values: &[f64],
    resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyData("bootstrap over no values"));
    }
    if resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least 1 resample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {bad} in sample")));
    }
    let n = values.len();
    let mut rng = rng::stream(seed, &[TAG_BOOT]);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile(&means, alpha), quantile(&means, 1.0 - alpha)))
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Simulate an imperfect noise estimate: a uniform draw from the interval of
/// width `sigma / 2` centered at the true rate, clipped into (0, 0.5).
pub fn guess_sigma(true_sigma: f64, rng: &mut impl Rng) -> Result<f64> {
    if !(true_sigma > 0.0 && true_sigma < 0.5) {
        return Err(Error::invalid(format!(
            "noise level {true_sigma} outside (0, 0.5)"
        )));
    }
    let draw = rng.gen_range(true_sigma * 0.75..true_sigma * 1.25);
    Ok(draw.clamp(f64::MIN_POSITIVE, 0.5 - 1e-9))
}

/// Whether a QUBO method sees the true flip rate or an imperfect guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaKnowledge {
    /// Penalty computed from the exact rate the sweep applied.
    Oracle,
    /// Penalty computed from a per-image draw of [`guess_sigma`].
    Guessed,
}

/// Which optimizer a QUBO method runs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum QuboSolverSpec {
    Exhaustive,
    Sa(SaConfig),
}

/// One competitor in an experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum MethodSpec {
    /// Returns the noisy input unchanged; calibrates the noise floor.
    Identity,
    Qubo {
        solver: QuboSolverSpec,
        bias_factor: f64,
        sigma_knowledge: SigmaKnowledge,
        num_reads: usize,
    },
    GibbsChain {
        iterations: usize,
        decay: f64,
    },
    Median {
        window: usize,
    },
    Gaussian {
        sigma: f64,
    },
    GraphCut {
        lambda: f64,
        beta: f64,
    },
}

impl MethodSpec {
    /// Stable identifier used in report rows and plot legends.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Identity => "identity".into(),
            MethodSpec::Qubo {
                solver,
                bias_factor,
                sigma_knowledge,
                ..
            } => {
                let s = match solver {
                    QuboSolverSpec::Exhaustive => "exact",
                    QuboSolverSpec::Sa(_) => "sa",
                };
                let suffix = match sigma_knowledge {
                    SigmaKnowledge::Oracle => "-oracle",
                    SigmaKnowledge::Guessed => "",
                };
                format!("qubo-{s}-b{bias_factor}{suffix}")
            }
            MethodSpec::GibbsChain { iterations, decay } => {
                format!("gibbs-i{iterations}-d{decay}")
            }
            MethodSpec::Median { window } => format!("median{window}"),
            MethodSpec::Gaussian { sigma } => format!("gaussian{sigma}"),
            MethodSpec::GraphCut { lambda, beta } => format!("graphcut-l{lambda}-b{beta}"),
        }
    }

    pub fn needs_model(&self) -> bool {
        matches!(
            self,
            MethodSpec::Qubo { .. } | MethodSpec::GibbsChain { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MethodSpec::Identity => Ok(()),
            MethodSpec::Qubo {
                solver,
                bias_factor,
                num_reads,
                ..
            } => {
                if !(*bias_factor > 0.0 && bias_factor.is_finite()) {
                    return Err(Error::invalid("bias factor must be positive and finite"));
                }
                if *num_reads == 0 {
                    return Err(Error::invalid("num_reads must be at least 1"));
                }
                if let QuboSolverSpec::Sa(sa) = solver {
                    sa.validate()?;
                }
                Ok(())
            }
            MethodSpec::GibbsChain { iterations, decay } => GibbsDenoiseConfig {
                iterations: *iterations,
                decay: *decay,
                ..GibbsDenoiseConfig::default()
            }
            .validate(),
            MethodSpec::Median { window } => {
                if window % 2 == 0 || *window == 0 {
                    return Err(Error::invalid("median window must be odd"));
                }
                Ok(())
            }
            MethodSpec::Gaussian { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid("gaussian sigma must be positive and finite"));
                }
                Ok(())
            }
            MethodSpec::GraphCut { lambda, beta } => GraphCutConfig {
                lambda: *lambda,
                beta: *beta,
            }
            .validate(),
        }
    }

    /// Denoise one image. `seed` is already unique to the
    /// (sigma, method, image) cell.
    fn apply(
        &self,
        model: &RbmParams,
        noisy: &BitVector,
        width: usize,
        height: usize,
        true_sigma: f64,
        seed: u64,
    ) -> Result<BitVector> {
        match self {
            MethodSpec::Identity => Ok(noisy.clone()),
            MethodSpec::Qubo {
                solver,
                bias_factor,
                sigma_knowledge,
                num_reads,
            } => {
                let sigma_estimate = match sigma_knowledge {
                    SigmaKnowledge::Oracle => true_sigma,
                    SigmaKnowledge::Guessed => {
                        guess_sigma(true_sigma, &mut rng::stream(seed, &[TAG_GUESS]))?
                    }
                };
                let cfg = DenoiseConfig {
                    sigma_estimate,
                    bias_factor: *bias_factor,
                    num_reads: *num_reads,
                    seed,
                    ..DenoiseConfig::default()
                };
                let result = match solver {
                    QuboSolverSpec::Exhaustive => denoise(model, noisy, &cfg, &ExhaustiveSolver),
                    QuboSolverSpec::Sa(sa) => denoise(model, noisy, &cfg, &SaSolver { cfg: *sa }),
                }?;
                Ok(result.denoised)
            }
            MethodSpec::GibbsChain { iterations, decay } => gibbs_denoise(
                model,
                noisy,
                &GibbsDenoiseConfig {
                    iterations: *iterations,
                    decay: *decay,
                    seed,
                    ..GibbsDenoiseConfig::default()
                },
            ),
            MethodSpec::Median { window } => {
                let img = BinaryImage::from_pixels(width, height, noisy.clone())?;
                Ok(median_filter(&img, *window)?.pixels().clone())
            }
            MethodSpec::Gaussian { sigma } => {
                let img = BinaryImage::from_pixels(width, height, noisy.clone())?;
                Ok(gaussian_filter(&img, *sigma)?.pixels().clone())
            }
            MethodSpec::GraphCut { lambda, beta } => {
                let img = BinaryImage::from_pixels(width, height, noisy.clone())?;
                let cfg = GraphCutConfig {
                    lambda: *lambda,
                    beta: *beta,
                };
                Ok(graphcut_denoise(&img, &cfg)?.pixels().clone())
            }
        }
    }
}

/// Full description of a sweep: which noise levels, which competitors, how
/// many images per level, and the master seed everything derives from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentSpec {
    pub sigma_grid: Vec<f64>,
    pub methods: Vec<MethodSpec>,
    pub images_per_sigma: usize,
    pub bootstrap_resamples: usize,
    pub master_seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            sigma_grid: vec![0.05, 0.10, 0.15, 0.20, 0.25],
            methods: Vec::new(),
            images_per_sigma: 200,
            bootstrap_resamples: 10_000,
            master_seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self, test_set_size: usize) -> Result<()> {
        if self.sigma_grid.is_empty() {
            return Err(Error::EmptyData("experiment with empty sigma grid"));
        }
        for &s in &self.sigma_grid {
            if !(s > 0.0 && s <= 0.5) {
                return Err(Error::invalid(format!(
                    "noise level {s} outside (0, 0.5]"
                )));
            }
        }
        if self.images_per_sigma == 0 {
            return Err(Error::invalid("images_per_sigma must be at least 1"));
        }
        if self.images_per_sigma > test_set_size {
            return Err(Error::invalid(format!(
                "images_per_sigma {} exceeds test set size {test_set_size}",
                self.images_per_sigma
            )));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::invalid("bootstrap_resamples must be at least 1"));
        }
        let mut labels = Vec::new();
        for m in &self.methods {
            m.validate()?;
            let label = m.label();
            if labels.contains(&label) {
                return Err(Error::invalid(format!(
                    "duplicate method label {label:?}"
                )));
            }
            labels.push(label);
        }
        Ok(())
    }
}

/// Aggregate result for one (sigma, method) cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CellReport {
    pub sigma: f64,
    pub method: String,
    pub mean_overlap: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Per-image match rates, in selection order, successes only.
    pub overlaps: Vec<f64>,
    /// Per-image failures as "image k: message".
    pub failures: Vec<String>,
    /// Fingerprint of the noisy batch this cell consumed; equal hashes across
    /// methods prove they saw identical inputs.
    pub noisy_hash: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ReportMeta {
    pub master_seed: u64,
    pub images_per_sigma: usize,
    pub bootstrap_resamples: usize,
    pub sigma_grid: Vec<f64>,
    pub methods: Vec<String>,
    pub dataset: String,
    pub model_units: (usize, usize),
    /// Wall-clock stamp; excluded from [`determinism_hash`].
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellReport>,
    pub meta: ReportMeta,
}

/// FNV-1a fingerprint of everything reproducible in the report: cells plus
/// metadata with the timestamp removed.
pub fn determinism_hash(report: &ExperimentReport) -> u64 {
    let canon = serde_json::to_vec(&(
        &report.cells,
        report.meta.master_seed,
        report.meta.images_per_sigma,
        report.meta.bootstrap_resamples,
        &report.meta.sigma_grid,
        &report.meta.methods,
        &report.meta.dataset,
        report.meta.model_units,
    ))
    .expect("report serializes");
    fnv_bytes(&canon)
}

fn fnv_bytes(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn hash_batch(batch: &[BitVector]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for bits in batch {
        for &b in bits.as_slice() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0xff; // separator so batch boundaries matter
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Run the full sweep: per noise level, select `images_per_sigma` test
/// images, corrupt each once, and hand the identical noisy batch to every
/// method. Per-image failures are recorded, not fatal. Fully reproducible
/// from `spec.master_seed`.
pub fn run_experiment(
    model: &RbmParams,
    test: &Dataset,
    spec: &ExperimentSpec,
) -> Result<ExperimentReport> {
    spec.validate(test.len())?;
    if model.num_visible() != test.width() * test.height() {
        return Err(Error::LengthMismatch {
            expected: model.num_visible(),
            got: test.width() * test.height(),
        });
    }
    let seed = spec.master_seed;
    let mut cells = Vec::with_capacity(spec.sigma_grid.len() * spec.methods.len());
    for (si, &sigma) in spec.sigma_grid.iter().enumerate() {
        let mut select_rng = rng::stream(seed, &[TAG_SELECT, si as u64]);
        let indices =
            rand::seq::index::sample(&mut select_rng, test.len(), spec.images_per_sigma)
                .into_vec();
        let noisy: Vec<BitVector> = indices
            .iter()
            .enumerate()
            .map(|(k, &idx)| {
                let mut nrng = rng::stream(seed, &[TAG_NOISE, si as u64, k as u64]);
                apply_noise(test.bits(idx), sigma, &mut nrng)
            })
            .collect::<Result<_>>()?;
        let noisy_hash = hash_batch(&noisy);

        for (mi, method) in spec.methods.iter().enumerate() {
            let outcomes: Vec<Result<f64>> = noisy
                .par_iter()
                .enumerate()
                .map(|(k, nb)| {
                    let image_seed: u64 = rng::stream(
                        seed,
                        &[TAG_METHOD, si as u64, mi as u64, k as u64],
                    )
                    .gen();
                    method
                        .apply(model, nb, test.width(), test.height(), sigma, image_seed)
                        .and_then(|den| pixel_match_rate(&den, test.bits(indices[k])))
                })
                .collect();
            let mut overlaps = Vec::new();
            let mut failures = Vec::new();
            for (k, res) in outcomes.into_iter().enumerate() {
                match res {
                    Ok(v) => overlaps.push(v),
                    Err(e) => failures.push(format!("image {k}: {e}")),
                }
            }
            let (mean_overlap, ci_low, ci_high) = if overlaps.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                let mean = overlaps.iter().sum::<f64>() / overlaps.len() as f64;
                let boot_seed: u64 =
                    rng::stream(seed, &[TAG_BOOT, si as u64, mi as u64]).gen();
                let (lo, hi) =
                    bootstrap_ci(&overlaps, spec.bootstrap_resamples, 0.95, boot_seed)?;
                (mean, lo, hi)
            };
            cells.push(CellReport {
                sigma,
                method: method.label(),
                mean_overlap,
                ci_low,
                ci_high,
                overlaps,
                failures,
                noisy_hash,
            });
        }
    }
    Ok(ExperimentReport {
        cells,
        meta: ReportMeta {
            master_seed: seed,
            images_per_sigma: spec.images_per_sigma,
            bootstrap_resamples: spec.bootstrap_resamples,
            sigma_grid: spec.sigma_grid.clone(),
            methods: spec.methods.iter().map(MethodSpec::label).collect(),
            dataset: test.name().to_string(),
            model_units: (model.num_visible(), model.num_hidden()),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        },
    })
}

/// One row per (sigma, method) cell:
/// `sigma,method,mean_overlap,ci_low,ci_high,n_images,seed`.
pub fn report_csv_string(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sigma", "method", "mean_overlap", "ci_low", "ci_high", "n_images", "seed"])
        .map_err(csv_io)?;
    for cell in &report.cells {
        w.write_record([
            cell.sigma.to_string(),
            cell.method.clone(),
            cell.mean_overlap.to_string(),
            cell.ci_low.to_string(),
            cell.ci_high.to_string(),
            cell.overlaps.len().to_string(),
            report.meta.master_seed.to_string(),
        ])
        .map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

fn csv_io(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line plot of mean match rate against noise level, one polyline per method
/// with 95% error bars.
pub fn report_svg_string(report: &ExperimentReport) -> String {
    use std::fmt::Write;

    let (width, height) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, width - 180.0, 30.0, height - 50.0);

    let sigmas = &report.meta.sigma_grid;
    let (x_min, x_max) = sigmas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let finite: Vec<f64> = report
        .cells
        .iter()
        .flat_map(|c| [c.ci_low, c.ci_high])
        .filter(|v| v.is_finite())
        .collect();
    let (mut y_min, mut y_max) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !y_min.is_finite() || !y_max.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.05;
        y_max += 0.05;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let x_of = |s: f64| left + (s - x_min) / x_span * (right - left);
    let y_of = |v: f64| bottom - (v - y_min) / (y_max - y_min) * (bottom - top);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">noise level</text>"#,
        (left + right) / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">mean pixel match rate</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );
    for &s in sigmas {
        let x = x_of(s);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            bottom + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-size="11">{s}</text>"#,
            bottom + 18.0
        );
    }
    for k in 0..=4 {
        let v = y_min + (y_max - y_min) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#,
            left - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{v:.3}</text>"#,
            left - 8.0,
            y + 4.0
        );
    }
    // one polyline with error bars per method
    for (mi, method) in report.meta.methods.iter().enumerate() {
        let color = PALETTE[mi % PALETTE.len()];
        let points: Vec<(f64, f64, f64, f64)> = report
            .cells
            .iter()
            .filter(|c| &c.method == method && c.mean_overlap.is_finite())
            .map(|c| (x_of(c.sigma), y_of(c.mean_overlap), y_of(c.ci_low), y_of(c.ci_high)))
            .collect();
        for &(x, _, lo, hi) in &points {
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{color}"/>"#
            );
            for y in [lo, hi] {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}"/>"#,
                    x - 3.0,
                    x + 3.0
                );
            }
        }
        if points.len() > 1 {
            let path: Vec<String> = points
                .iter()
                .map(|&(x, y, _, _)| format!("{x:.2},{y:.2}"))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
        for &(x, y, _, _) in &points {
            let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
        }
        let ly = top + 16.0 * mi as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly:.2}" x2="{}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            right + 10.0,
            right + 30.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-size="11">{}</text>"#,
            right + 36.0,
            ly + 4.0,
            xml_escape(method)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub metadata: PathBuf,
}

/// Write `report.csv`, `report.svg`, and a JSON sidecar with the full report
/// (per-image overlaps included) under `dir`.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<ReportFiles> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles {
        csv: dir.join("report.csv"),
        svg: dir.join("report.svg"),
        metadata: dir.join("report.json"),
    };
    std::fs::write(&files.csv, report_csv_string(report)?)?;
    std::fs::write(&files.svg, report_svg_string(report))?;
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::invalid(format!("report serialization: {e}")))?;
    std::fs::write(&files.metadata, json)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_bas, Split};
    use ndarray::{Array1, Array2};

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::new(bits.to_vec()).unwrap()
    }

    fn tiny_model(nv: usize, nh: usize, seed: u64) -> RbmParams {
        let mut r = rng::seeded(seed);
        RbmParams::new(
            Array2::from_shape_fn((nh, nv), |_| r.gen_range(-0.5..0.5)),
            Array1::from_shape_fn(nv, |_| r.gen_range(-0.5..0.5)),
            Array1::from_shape_fn(nh, |_| r.gen_range(-0.5..0.5)),
        )
        .unwrap()
    }

    #[test]
    fn match_rate_boundary_values() {
        let a = bv(&[1, 0, 1, 0]);
        assert_eq!(pixel_match_rate(&a, &a).unwrap(), 1.0);
        let comp = bv(&[0, 1, 0, 1]);
        assert_eq!(pixel_match_rate(&a, &comp).unwrap(), 0.0);
        assert!(pixel_match_rate(&a, &bv(&[1, 0])).is_err());
        assert!(pixel_match_rate(&bv(&[]), &bv(&[])).is_err());
    }

    #[test]
    fn match_rate_arithmetic() {
        // 144 pixels, 18 mismatches -> 0.875
        let orig = BitVector::zeros(144);
        let den = BitVector::from_fn(144, |i| u8::from(i < 18)).unwrap();
        assert_eq!(pixel_match_rate(&den, &orig).unwrap(), 0.875);
    }

    #[test]
    fn bootstrap_on_constant_list_is_degenerate() {
        let values = vec![0.7; 40];
        let (lo, hi) = bootstrap_ci(&values, 500, 0.95, 1).unwrap();
        // every resampled mean is the constant (up to summation rounding)
        assert_eq!(lo, hi);
        assert!((lo - 0.7).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_contains_mean_and_narrows_with_n() {
        let small: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let big: Vec<f64> = (0..10_000).map(|i| (i % 2) as f64).collect();
        let (lo_s, hi_s) = bootstrap_ci(&small, 2000, 0.95, 3).unwrap();
        let (lo_b, hi_b) = bootstrap_ci(&big, 2000, 0.95, 3).unwrap();
        assert!(lo_s <= 0.5 && 0.5 <= hi_s);
        assert!(lo_b <= 0.5 && 0.5 <= hi_b);
        // width scales like 1/sqrt(n): 100x the data, ~10x narrower
        assert!(hi_b - lo_b < (hi_s - lo_s) / 2.0);
    }

    #[test]
    fn bootstrap_is_deterministic_and_validates() {
        let values = vec![0.1, 0.9, 0.4, 0.6, 0.5];
        assert_eq!(
            bootstrap_ci(&values, 1000, 0.95, 9).unwrap(),
            bootstrap_ci(&values, 1000, 0.95, 9).unwrap()
        );
        assert!(bootstrap_ci(&[], 100, 0.95, 0).is_err());
        assert!(bootstrap_ci(&values, 0, 0.95, 0).is_err());
        assert!(bootstrap_ci(&values, 100, 1.0, 0).is_err());
        assert!(bootstrap_ci(&[f64::NAN], 100, 0.95, 0).is_err());
    }

    #[test]
    fn sigma_guess_stays_in_the_centered_interval() {
        let mut r = rng::seeded(5);
        for _ in 0..2000 {
            let g = guess_sigma(0.2, &mut r).unwrap();
            assert!((0.15..=0.25).contains(&g), "{g}");
        }
        for _ in 0..2000 {
            let g = guess_sigma(0.04, &mut r).unwrap();
            assert!((0.03..=0.05).contains(&g), "{g}");
            assert!(g > 0.0);
        }
        // near the top of the range the clip keeps draws below 1/2
        for _ in 0..2000 {
            assert!(guess_sigma(0.45, &mut r).unwrap() < 0.5);
        }
        assert!(guess_sigma(0.0, &mut r).is_err());
        assert!(guess_sigma(0.5, &mut r).is_err());
    }

    #[test]
    fn sigma_guess_is_unbiased() {
        let mut r = rng::seeded(11);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| guess_sigma(0.2, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        // uniform on width 0.1: sd = 0.1/sqrt(12), se = sd/sqrt(n)
        let se = 0.1 / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.2).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn method_labels_are_stable() {
        assert_eq!(MethodSpec::Identity.label(), "identity");
        let qubo = MethodSpec::Qubo {
            solver: QuboSolverSpec::Sa(SaConfig::default()),
            bias_factor: 0.75,
            sigma_knowledge: SigmaKnowledge::Guessed,
            num_reads: 10,
        };
        assert_eq!(qubo.label(), "qubo-sa-b0.75");
        let oracle = MethodSpec::Qubo {
            solver: QuboSolverSpec::Exhaustive,
            bias_factor: 1.0,
            sigma_knowledge: SigmaKnowledge::Oracle,
            num_reads: 10,
        };
        assert_eq!(oracle.label(), "qubo-exact-b1-oracle");
        assert_eq!(MethodSpec::Median { window: 3 }.label(), "median3");
        assert_eq!(
            MethodSpec::GraphCut { lambda: 1.0, beta: 0.5 }.label(),
            "graphcut-l1-b0.5"
        );
    }

    fn small_spec(methods: Vec<MethodSpec>) -> ExperimentSpec {
        ExperimentSpec {
            sigma_grid: vec![0.2],
            methods,
            images_per_sigma: 100,
            bootstrap_resamples: 300,
            master_seed: 4,
        }
    }

    #[test]
    fn identity_method_tracks_one_minus_sigma() {
        let test = gen_bas(4, 4, 150, 8, Split::Test).unwrap();
        let model = tiny_model(16, 4, 1);
        let report =
            run_experiment(&model, &test, &small_spec(vec![MethodSpec::Identity])).unwrap();
        let cell = &report.cells[0];
        assert_eq!(cell.overlaps.len(), 100);
        assert!(cell.failures.is_empty());
        // per-pixel agreement is Bernoulli(1 - sigma) over v * m pixels
        let se = (0.2_f64 * 0.8 / (16.0 * 100.0)).sqrt();
        assert!(
            (cell.mean_overlap - 0.8).abs() < 3.0 * se,
            "mean {}",
            cell.mean_overlap
        );
        assert!(cell.ci_low <= cell.mean_overlap && cell.mean_overlap <= cell.ci_high);
    }

    #[test]
    fn methods_share_identical_noisy_batches() {
        let test = gen_bas(3, 3, 120, 2, Split::Test).unwrap();
        let model = tiny_model(9, 3, 2);
        let spec = ExperimentSpec {
            sigma_grid: vec![0.1, 0.3],
            methods: vec![
                MethodSpec::Identity,
                MethodSpec::Median { window: 3 },
                MethodSpec::GraphCut { lambda: 1.0, beta: 0.5 },
            ],
            images_per_sigma: 40,
            bootstrap_resamples: 200,
            master_seed: 77,
        };
        let report = run_experiment(&model, &test, &spec).unwrap();
        assert_eq!(report.cells.len(), 6);
        for chunk in report.cells.chunks(3) {
            assert_eq!(chunk[0].noisy_hash, chunk[1].noisy_hash);
            assert_eq!(chunk[0].noisy_hash, chunk[2].noisy_hash);
        }
        // different sigma -> different batch
        assert_ne!(report.cells[0].noisy_hash, report.cells[3].noisy_hash);
    }

    #[test]
    fn experiment_is_deterministic_given_the_master_seed() {
        let test = gen_bas(3, 3, 60, 5, Split::Test).unwrap();
        let model = tiny_model(9, 3, 6);
        let methods = vec![
            MethodSpec::Identity,
            MethodSpec::Qubo {
                solver: QuboSolverSpec::Exhaustive,
                bias_factor: 0.75,
                sigma_knowledge: SigmaKnowledge::Guessed,
                num_reads: 3,
            },
        ];
        let spec = ExperimentSpec {
            images_per_sigma: 20,
            bootstrap_resamples: 100,
            ..small_spec(methods)
        };
        let a = run_experiment(&model, &test, &spec).unwrap();
        let b = run_experiment(&model, &test, &spec).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(determinism_hash(&a), determinism_hash(&b));
        let c = run_experiment(
            &model,
            &test,
            &ExperimentSpec {
                master_seed: 5,
                ..spec
            },
        )
        .unwrap();
        assert_ne!(determinism_hash(&a), determinism_hash(&c));
    }

    #[test]
    fn spec_validation_rejects_bad_configs() {
        let ok = small_spec(vec![MethodSpec::Identity]);
        assert!(ok.validate(200).is_ok());
        assert!(ok.validate(50).is_err()); // fewer test images than requested
        let bad_sigma = ExperimentSpec {
            sigma_grid: vec![0.6],
            ..ok.clone()
        };
        assert!(bad_sigma.validate(200).is_err());
        let empty_grid = ExperimentSpec {
            sigma_grid: vec![],
            ..ok.clone()
        };
        assert!(empty_grid.validate(200).is_err());
        let dupes = ExperimentSpec {
            methods: vec![MethodSpec::Identity, MethodSpec::Identity],
            ..ok.clone()
        };
        assert!(dupes.validate(200).is_err());
        let bad_method = ExperimentSpec {
            methods: vec![MethodSpec::Median { window: 4 }],
            ..ok
        };
        assert!(bad_method.validate(200).is_err());
    }

    #[test]
    fn csv_round_trips_report_values() {
        let test = gen_bas(3, 3, 50, 5, Split::Test).unwrap();
        let model = tiny_model(9, 3, 6);
        let spec = ExperimentSpec {
            images_per_sigma: 10,
            bootstrap_resamples: 50,
            ..small_spec(vec![MethodSpec::Identity, MethodSpec::Median { window: 3 }])
        };
        let report = run_experiment(&model, &test, &spec).unwrap();
        let csv_text = report_csv_string(&report).unwrap();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        assert_eq!(
            rdr.headers().unwrap(),
            &csv::StringRecord::from(vec![
                "sigma",
                "method",
                "mean_overlap",
                "ci_low",
                "ci_high",
                "n_images",
                "seed"
            ])
        );
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), report.cells.len());
        for (row, cell) in rows.iter().zip(&report.cells) {
            assert_eq!(row[0].parse::<f64>().unwrap(), cell.sigma);
            assert_eq!(&row[1], cell.method.as_str());
            assert_eq!(row[2].parse::<f64>().unwrap(), cell.mean_overlap);
            assert_eq!(row[3].parse::<f64>().unwrap(), cell.ci_low);
            assert_eq!(row[4].parse::<f64>().unwrap(), cell.ci_high);
            assert_eq!(row[5].parse::<usize>().unwrap(), cell.overlaps.len());
            assert_eq!(row[6].parse::<u64>().unwrap(), report.meta.master_seed);
        }
    }

    #[test]
    fn empty_method_list_yields_header_only_csv() {
        let test = gen_bas(3, 3, 120, 5, Split::Test).unwrap();
        let model = tiny_model(9, 3, 6);
        let report = run_experiment(&model, &test, &small_spec(vec![])).unwrap();
        let csv_text = report_csv_string(&report).unwrap();
        assert_eq!(
            csv_text.trim(),
            "sigma,method,mean_overlap,ci_low,ci_high,n_images,seed"
        );
    }

    /// Minimal well-formedness check: tags balance, attributes quoted.
    fn assert_well_formed_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            rest = &rest[start + 1..];
            let end = rest.find('>').expect("unclosed tag");
            let tag = &rest[..end];
            rest = &rest[end + 1..];
            if tag.starts_with('?') {
                assert!(tag.ends_with('?'), "bad declaration");
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                assert_eq!(stack.pop().as_deref(), Some(name), "mismatched close");
                continue;
            }
            if tag.ends_with('/') {
                continue; // self-closing
            }
            let name = tag.split_whitespace().next().unwrap().to_string();
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes");
            stack.push(name);
        }
        assert!(stack.is_empty(), "unclosed tags {stack:?}");
    }

    #[test]
    fn svg_is_well_formed_xml() {
        let test = gen_bas(3, 3, 60, 5, Split::Test).unwrap();
        let model = tiny_model(9, 3, 6);
        let spec = ExperimentSpec {
            sigma_grid: vec![0.1, 0.2, 0.3],
            images_per_sigma: 15,
            bootstrap_resamples: 50,
            master_seed: 3,
            methods: vec![MethodSpec::Identity, MethodSpec::Median { window: 3 }],
        };
        let report = run_experiment(&model, &test, &spec).unwrap();
        let svg = report_svg_string(&report);
        assert!(svg.contains("<svg"));
        assert!(svg.contains("polyline"));
        assert_well_formed_xml(&svg);
    }

    #[test]
    fn emit_report_writes_all_three_files() {
        let test = gen_bas(3, 3, 30, 5, Split::Test).unwrap();
        let model = tiny_model(9, 3, 6);
        let spec = ExperimentSpec {
            images_per_sigma: 10,
            bootstrap_resamples: 50,
            ..small_spec(vec![MethodSpec::Identity])
        };
        let report = run_experiment(&model, &test, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, dir.path().join("out")).unwrap();
        assert!(files.csv.exists());
        assert!(files.svg.exists());
        assert!(files.metadata.exists());
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&files.metadata).unwrap()).unwrap();
        assert_eq!(json["meta"]["master_seed"], 4);
        assert!(json["cells"].as_array().unwrap().len() == 1);
    }

    #[test]
    fn per_image_failures_are_recorded_not_fatal() {
        let test = gen_bas(4, 4, 30, 5, Split::Test).unwrap();
        // 16 visible + 12 hidden = 28 units exceeds the exhaustive guard
        let model = tiny_model(16, 12, 6);
        let spec = ExperimentSpec {
            images_per_sigma: 5,
            bootstrap_resamples: 50,
            ..small_spec(vec![MethodSpec::Qubo {
                solver: QuboSolverSpec::Exhaustive,
                bias_factor: 0.75,
                sigma_knowledge: SigmaKnowledge::Oracle,
                num_reads: 1,
            }])
        };
        let report = run_experiment(&model, &test, &spec).unwrap();
        let cell = &report.cells[0];
        assert_eq!(cell.failures.len(), 5);
        assert!(cell.overlaps.is_empty());
        assert!(cell.mean_overlap.is_nan());
    }
}
