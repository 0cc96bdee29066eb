//! `qdenoise`: generate datasets, train models, denoise images, run sweeps.
//!
//! Every subcommand is deterministic under a fixed `--seed`; worker threads
//! (`--threads`) change wall time, never results. Default output locations
//! live under `--output-dir`, which also honors the `QDENOISE_OUTPUT_DIR`
//! environment variable; paths given explicitly are used verbatim.
//!
//! Exit codes: 0 success, 2 bad configuration or unparseable input files,
//! 3 runtime failure (I/O, network, solver), 4 verification criteria failed.

use clap::{Args, Parser, Subcommand, ValueEnum};
use qdenoise_core::data::DEFAULT_BINARIZE_THRESHOLD;
use qdenoise_core::metrics::determinism_hash;
use qdenoise_core::rbm::EXACT_MAX_UNITS;
use qdenoise_core::solvers::{ExhaustiveSolver, RemoteConfig, RemoteSolver, SaSolver};
use qdenoise_core::verify::{self, CriterionOutcome};
use qdenoise_core::{
    binarize, denoise, downscale_nn, gen_bas, load_idx, pixel_match_rate, read_pbm, rng,
    run_experiment, train_cd, write_pbm, BinaryImage, Dataset, DenoiseConfig, Error,
    ExperimentSpec, MethodSpec, QuboSolver, QuboSolverSpec, RbmParams, Result, SaConfig,
    SigmaKnowledge, Split, TrainConfig,
};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Bad inputs (validation, parsing) are the caller's problem; broken
/// environments (I/O, network, solver) are not.
fn exit_class(e: &Error) -> u8 {
    match e {
        Error::LengthMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::SizeGuard { .. }
        | Error::EmptyData(_)
        | Error::Parse { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Protocol(_) | Error::Solver { .. } => EXIT_RUNTIME,
    }
}

#[derive(Parser)]
#[command(
    name = "qdenoise",
    version,
    about = "Binary image denoising with RBM-derived QUBO objectives",
    propagate_version = true
)]
struct Cli {
    /// Master seed; every subcommand derives its randomness from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Cap on worker threads (default: all cores). Results never depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Base directory for default output locations.
    #[arg(long, global = true, env = "QDENOISE_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write dataset files, either sampled Bars-and-Stripes or ingested IDX.
    GenData(GenDataArgs),
    /// Train an RBM on a dataset file and save the model.
    Train(TrainArgs),
    /// Denoise one PBM image with a trained model.
    Denoise(DenoiseArgs),
    /// Sweep noise levels and methods over a test set; write CSV/SVG reports.
    Bench(BenchArgs),
    /// Run the statistical verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[command(subcommand)]
    source: GenSource,
}

#[derive(Subcommand)]
enum GenSource {
    /// Sample Bars-and-Stripes images.
    Bas {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Training images to generate (0 skips the split).
        #[arg(long, default_value_t = 0)]
        train: usize,
        /// Test images to generate (0 skips the split).
        #[arg(long, default_value_t = 0)]
        test: usize,
        /// Also dump the first K images of each split as PBM files.
        #[arg(long, value_name = "K")]
        dump_pbm: Option<usize>,
    },
    /// Convert an IDX image file (optionally downscaled) into a dataset.
    Idx {
        /// IDX file holding 8-bit grayscale images.
        #[arg(long)]
        images: PathBuf,
        /// Which split the resulting dataset file is labeled as.
        #[arg(long, value_enum)]
        split: SplitArg,
        /// Dataset name stem; the file becomes {name}-{split}.qds.
        #[arg(long, default_value = "idx")]
        name: String,
        /// Downscale to this width (requires --target-height).
        #[arg(long, requires = "target_height")]
        target_width: Option<usize>,
        /// Downscale to this height (requires --target-width).
        #[arg(long, requires = "target_width")]
        target_height: Option<usize>,
        /// Gray levels at or above this become 1-pixels.
        #[arg(long, default_value_t = DEFAULT_BINARIZE_THRESHOLD)]
        threshold: u8,
        /// Keep only the first N images.
        #[arg(long)]
        limit: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file to train on.
    #[arg(long)]
    data: PathBuf,
    /// Number of hidden units.
    #[arg(long)]
    hidden: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Gibbs steps per contrastive-divergence update.
    #[arg(long, default_value_t = 1)]
    cd_steps: usize,
    /// Model file to write (default: {output-dir}/model.qrbm).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exhaustive,
    Sa,
    Remote,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Noisy input image (PBM, P4).
    #[arg(long)]
    input: PathBuf,
    /// Denoised output image (default: {output-dir}/denoised.pbm).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Clean reference image; when given, match rates are printed.
    #[arg(long)]
    original: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SolverArg::Sa)]
    solver: SolverArg,
    /// Remote solver address (host:port) for --solver remote.
    #[arg(long, default_value = "127.0.0.1:7464")]
    remote_addr: String,
    #[arg(long, default_value_t = 10_000)]
    remote_timeout_ms: u64,
    /// Estimated flip rate of the corruption.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Shrink factor applied to --sigma before the penalty formula.
    #[arg(long, default_value_t = 0.75)]
    bias_factor: f64,
    /// Fixed penalty weight; overrides the formula entirely.
    #[arg(long)]
    rho: Option<f64>,
    /// Solver reads averaged into the answer.
    #[arg(long, default_value_t = 100)]
    num_reads: usize,
    /// Per-pixel mean above this becomes a 1.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Annealing sweeps per read (--solver sa).
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// Extra annealing chains per read, best taken (--solver sa).
    #[arg(long, default_value_t = 0)]
    restarts: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Test dataset file.
    #[arg(long)]
    data: PathBuf,
    /// TOML file with experiment knobs; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    /// Comma-separated methods: identity, qubo-sa, qubo-sa-oracle,
    /// qubo-exact, qubo-exact-oracle, gibbs, median, gaussian, graphcut.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Images sampled per noise level.
    #[arg(long)]
    images: Option<usize>,
    /// Bootstrap resamples per confidence interval.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Solver reads per image for QUBO methods.
    #[arg(long)]
    num_reads: Option<usize>,
    /// Bias factor for QUBO methods.
    #[arg(long)]
    bias_factor: Option<f64>,
    /// Expand each qubo-* method into bias factors {1.25, 1.0, 0.75, 0.5}.
    #[arg(long)]
    bias_sweep: bool,
    #[arg(long)]
    median_window: Option<usize>,
    #[arg(long)]
    gaussian_sigma: Option<f64>,
    #[arg(long)]
    gibbs_iterations: Option<usize>,
    #[arg(long)]
    gibbs_decay: Option<f64>,
    #[arg(long)]
    graphcut_lambda: Option<f64>,
    #[arg(long)]
    graphcut_beta: Option<f64>,
    /// Directory for report files (default: {output-dir}/report).
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

/// The same knobs as the bench flags, loadable from a TOML file so figure
/// reproductions can live in the repository as config files.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    sigma_grid: Option<Vec<f64>>,
    methods: Option<Vec<String>>,
    images: Option<usize>,
    bootstrap: Option<usize>,
    num_reads: Option<usize>,
    bias_factor: Option<f64>,
    bias_sweep: Option<bool>,
    median_window: Option<usize>,
    gaussian_sigma: Option<f64>,
    gibbs_iterations: Option<usize>,
    gibbs_decay: Option<f64>,
    graphcut_lambda: Option<f64>,
    graphcut_beta: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated criterion names to run (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    /// List criterion names and exit.
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        // Ignore the error: the pool can already exist in test harnesses.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_class(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::GenData(args) => cmd_gen_data(cli, args)?,
        Command::Train(args) => cmd_train(cli, args)?,
        Command::Denoise(args) => cmd_denoise(cli, args)?,
        Command::Bench(args) => cmd_bench(cli, args)?,
        Command::Verify(args) => return cmd_verify(cli, args),
    }
    Ok(0)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

fn dump_pbm_files(dir: &Path, ds: &Dataset, count: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for i in 0..count.min(ds.len()) {
        let path = dir.join(format!("{}-{i:04}.pbm", ds.split()));
        write_pbm(&ds.image(i), &path)?;
    }
    Ok(())
}

fn cmd_gen_data(cli: &Cli, args: &GenDataArgs) -> Result<()> {
    std::fs::create_dir_all(&cli.output_dir)?;
    match &args.source {
        GenSource::Bas {
            width,
            height,
            train,
            test,
            dump_pbm,
        } => {
            if *train == 0 && *test == 0 {
                return Err(Error::InvalidParameter(
                    "nothing to do: both --train and --test are 0".into(),
                ));
            }
            // One derived seed per split so adding a test split never
            // changes the training images.
            for (idx, (count, split)) in [(*train, Split::Train), (*test, Split::Test)]
                .into_iter()
                .enumerate()
            {
                let split_seed = rng::mix(&[cli.seed, 0x67656e64, idx as u64]);
                if count == 0 {
                    continue;
                }
                let ds = gen_bas(*width, *height, count, split_seed, split)?;
                let path = cli.output_dir.join(format!("{}.qds", ds.name()));
                ds.save(&path)?;
                println!(
                    "wrote {} images ({}x{}) to {}",
                    ds.len(),
                    ds.width(),
                    ds.height(),
                    path.display()
                );
                if let Some(k) = dump_pbm {
                    dump_pbm_files(&cli.output_dir.join("pbm"), &ds, *k)?;
                }
            }
        }
        GenSource::Idx {
            images,
            split,
            name,
            target_width,
            target_height,
            threshold,
            limit,
        } => {
            let mut gray = load_idx(images)?;
            if let Some(n) = limit {
                gray.truncate(*n);
            }
            if gray.is_empty() {
                return Err(Error::EmptyData("IDX file holds no images"));
            }
            let binary: Vec<BinaryImage> = gray
                .par_iter()
                .map(|g| {
                    let g = match (target_width, target_height) {
                        (Some(w), Some(h)) => downscale_nn(g, *w, *h)?,
                        _ => g.clone(),
                    };
                    Ok(binarize(&g, *threshold))
                })
                .collect::<Result<_>>()?;
            let split: Split = (*split).into();
            let ds = Dataset::from_images(format!("{name}-{split}"), split, binary)?;
            let path = cli.output_dir.join(format!("{}.qds", ds.name()));
            ds.save(&path)?;
            println!(
                "wrote {} images ({}x{}) to {}",
                ds.len(),
                ds.width(),
                ds.height(),
                path.display()
            );
        }
    }
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let ds = Dataset::load(&args.data)?;
    let cfg = TrainConfig {
        cd_steps: args.cd_steps,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: cli.seed,
    };
    let model = train_cd(ds.images(), args.hidden, &cfg)?;

    let out = match &args.out {
        Some(p) => p.clone(),
        None => cli.output_dir.join("model.qrbm"),
    };
    ensure_parent(&out)?;
    model.save(&out)?;
    println!(
        "trained {} visible x {} hidden on {} images ({} epochs)",
        model.num_visible(),
        model.num_hidden(),
        ds.len(),
        args.epochs
    );
    // The exact likelihood sums over the smaller layer's configurations;
    // past the guard we fall back to a cheap reconstruction proxy.
    if model.num_visible() + model.num_hidden() <= EXACT_MAX_UNITS {
        println!(
            "exact log-likelihood: {}",
            model.exact_log_likelihood(ds.images())?
        );
    } else {
        println!(
            "reconstruction error (one-step mean field): {}",
            model.reconstruction_error(ds.images())?
        );
    }
    println!("saved model to {}", out.display());
    Ok(())
}

fn cmd_denoise(cli: &Cli, args: &DenoiseArgs) -> Result<()> {
    let model = RbmParams::load(&args.model)?;
    let noisy = read_pbm(&args.input)?;
    if noisy.width() * noisy.height() != model.num_visible() {
        return Err(Error::LengthMismatch {
            expected: model.num_visible(),
            got: noisy.width() * noisy.height(),
        });
    }

    let solver: Box<dyn QuboSolver> = match args.solver {
        SolverArg::Exhaustive => Box::new(ExhaustiveSolver),
        SolverArg::Sa => Box::new(SaSolver {
            cfg: SaConfig {
                sweeps: args.sweeps,
                restarts: args.restarts,
                ..SaConfig::default()
            },
        }),
        SolverArg::Remote => Box::new(RemoteSolver {
            cfg: RemoteConfig {
                addr: args.remote_addr.clone(),
                timeout_ms: args.remote_timeout_ms,
                ..RemoteConfig::default()
            },
        }),
    };
    let cfg = DenoiseConfig {
        sigma_estimate: args.sigma,
        bias_factor: args.bias_factor,
        rho_override: args.rho,
        num_reads: args.num_reads,
        threshold: args.threshold,
        seed: cli.seed,
    };
    let result = denoise(&model, noisy.pixels(), &cfg, solver.as_ref())?;

    let out = match &args.output {
        Some(p) => p.clone(),
        None => cli.output_dir.join("denoised.pbm"),
    };
    ensure_parent(&out)?;
    let img = BinaryImage::from_pixels(noisy.width(), noisy.height(), result.denoised.clone())?;
    write_pbm(&img, &out)?;

    let best = result
        .reads
        .iter()
        .map(|r| r.energy)
        .fold(f64::INFINITY, f64::min);
    println!("penalty rho = {}", result.rho_used);
    println!(
        "solver {}: {} reads, best energy {best}",
        solver.name(),
        result.reads.len()
    );
    if let Some(orig_path) = &args.original {
        let orig = read_pbm(orig_path)?;
        let before = pixel_match_rate(noisy.pixels(), orig.pixels())?;
        let after = pixel_match_rate(&result.denoised, orig.pixels())?;
        println!("match vs original: input {before:.6} -> denoised {after:.6}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// flag > config file > built-in default.
fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

struct MethodKnobs {
    num_reads: usize,
    bias_factor: f64,
    bias_sweep: bool,
    median_window: usize,
    gaussian_sigma: f64,
    gibbs_iterations: usize,
    gibbs_decay: f64,
    graphcut_lambda: f64,
    graphcut_beta: f64,
}

fn parse_methods(names: &[String], knobs: &MethodKnobs) -> Result<Vec<MethodSpec>> {
    let qubo = |solver: QuboSolverSpec, knowledge: SigmaKnowledge, bias: f64| MethodSpec::Qubo {
        solver,
        bias_factor: bias,
        sigma_knowledge: knowledge,
        num_reads: knobs.num_reads,
    };
    let mut out = Vec::new();
    for name in names {
        let qubo_variant = |knowledge| {
            let solver = if name.starts_with("qubo-sa") {
                QuboSolverSpec::Sa(SaConfig::default())
            } else {
                QuboSolverSpec::Exhaustive
            };
            if knobs.bias_sweep {
                [1.25, 1.0, 0.75, 0.5]
                    .iter()
                    .map(|&b| qubo(solver.clone(), knowledge, b))
                    .collect()
            } else {
                vec![qubo(solver.clone(), knowledge, knobs.bias_factor)]
            }
        };
        match name.as_str() {
            "identity" => out.push(MethodSpec::Identity),
            "qubo-sa" | "qubo-exact" => out.extend(qubo_variant(SigmaKnowledge::Guessed)),
            "qubo-sa-oracle" | "qubo-exact-oracle" => {
                out.extend(qubo_variant(SigmaKnowledge::Oracle))
            }
            "gibbs" => out.push(MethodSpec::GibbsChain {
                iterations: knobs.gibbs_iterations,
                decay: knobs.gibbs_decay,
            }),
            "median" => out.push(MethodSpec::Median {
                window: knobs.median_window,
            }),
            "gaussian" => out.push(MethodSpec::Gaussian {
                sigma: knobs.gaussian_sigma,
            }),
            "graphcut" => out.push(MethodSpec::GraphCut {
                lambda: knobs.graphcut_lambda,
                beta: knobs.graphcut_beta,
            }),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown method '{other}'; expected one of identity, qubo-sa, \
                     qubo-sa-oracle, qubo-exact, qubo-exact-oracle, gibbs, median, \
                     gaussian, graphcut"
                )))
            }
        }
    }
    Ok(out)
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<()> {
    let file: BenchFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Parse {
                offset: e.span().map(|s| s.start as u64).unwrap_or(0),
                message: format!("{path}: {msg}", path = path.display(), msg = e.message()),
            })?
        }
        None => BenchFile::default(),
    };

    let knobs = MethodKnobs {
        num_reads: pick(&args.num_reads, &file.num_reads, 20),
        bias_factor: pick(&args.bias_factor, &file.bias_factor, 0.75),
        bias_sweep: args.bias_sweep || file.bias_sweep.unwrap_or(false),
        median_window: pick(&args.median_window, &file.median_window, 3),
        gaussian_sigma: pick(&args.gaussian_sigma, &file.gaussian_sigma, 0.8),
        gibbs_iterations: pick(&args.gibbs_iterations, &file.gibbs_iterations, 20),
        gibbs_decay: pick(&args.gibbs_decay, &file.gibbs_decay, 0.8),
        graphcut_lambda: pick(&args.graphcut_lambda, &file.graphcut_lambda, 1.0),
        graphcut_beta: pick(&args.graphcut_beta, &file.graphcut_beta, 0.5),
    };
    let method_names = pick(
        &args.methods,
        &file.methods,
        vec!["qubo-sa".into(), "median".into()],
    );
    let spec = ExperimentSpec {
        sigma_grid: pick(
            &args.sigma_grid,
            &file.sigma_grid,
            vec![0.05, 0.10, 0.15, 0.20, 0.25],
        ),
        methods: parse_methods(&method_names, &knobs)?,
        images_per_sigma: pick(&args.images, &file.images, 200),
        bootstrap_resamples: pick(&args.bootstrap, &file.bootstrap, 10_000),
        master_seed: cli.seed,
    };

    let model = RbmParams::load(&args.model)?;
    let test = Dataset::load(&args.data)?;
    let report = run_experiment(&model, &test, &spec)?;

    println!("sigma    method                       mean     95% CI");
    for cell in &report.cells {
        println!(
            "{:<8} {:<28} {:.4}   [{:.4}, {:.4}]",
            cell.sigma, cell.method, cell.mean_overlap, cell.ci_low, cell.ci_high
        );
        for failure in &cell.failures {
            eprintln!("warning: sigma {} {}: {failure}", cell.sigma, cell.method);
        }
    }

    let dir = match &args.report_dir {
        Some(p) => p.clone(),
        None => cli.output_dir.join("report"),
    };
    let files = qdenoise_core::emit_report(&report, &dir)?;
    println!("report hash: {:016x}", determinism_hash(&report));
    println!(
        "wrote {}, {}, {}",
        files.csv.display(),
        files.svg.display(),
        files.metadata.display()
    );
    Ok(())
}

const CRITERIA: [&str; 9] = [
    "penalty-equivalence",
    "rho-optimality",
    "strict-improvement",
    "sa-quality",
    "graphcut-exact",
    "noise-calibration",
    "training-sanity",
    "benchmark",
    "determinism",
];

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<u8> {
    if args.list {
        for name in CRITERIA {
            println!("{name}");
        }
        return Ok(0);
    }
    let selected: Vec<&str> = match &args.only {
        Some(names) => {
            let mut picked = Vec::new();
            for name in names {
                match CRITERIA.iter().find(|c| **c == name.as_str()) {
                    Some(c) => picked.push(*c),
                    None => {
                        return Err(Error::InvalidParameter(format!(
                            "unknown criterion '{name}'; expected one of {}",
                            CRITERIA.join(", ")
                        )))
                    }
                }
            }
            picked
        }
        None => CRITERIA.to_vec(),
    };

    // Seed 0 means the pinned per-criterion defaults the acceptance suite
    // uses; anything else derives fresh seeds to probe robustness.
    let seed_for = |idx: u64, pinned: u64| -> u64 {
        if cli.seed == 0 {
            pinned
        } else {
            rng::mix(&[cli.seed, 0x766572, idx])
        }
    };
    use verify::default_seeds as ds;

    let mut outcomes: Vec<CriterionOutcome> = Vec::new();
    let mut bench_pair: Option<(CriterionOutcome, CriterionOutcome)> = None;
    for name in &selected {
        let outcome = match *name {
            "penalty-equivalence" => verify::penalty_equivalence(seed_for(0, ds::PENALTY_EQUIVALENCE)),
            "rho-optimality" => verify::rho_optimality(seed_for(1, ds::RHO_OPTIMALITY)),
            "strict-improvement" => verify::strict_improvement(seed_for(2, ds::STRICT_IMPROVEMENT)),
            "sa-quality" => verify::sa_quality(seed_for(3, ds::SA_QUALITY)),
            "graphcut-exact" => verify::graphcut_exact(seed_for(4, ds::GRAPHCUT_EXACT)),
            "noise-calibration" => verify::noise_calibration(seed_for(5, ds::NOISE_CALIBRATION)),
            "training-sanity" => verify::training_sanity(seed_for(6, ds::TRAINING_SANITY)),
            pair @ ("benchmark" | "determinism") => {
                // Both come from one experiment; run it once even if both
                // names are selected.
                if bench_pair.is_none() {
                    bench_pair = Some(verify::benchmark_and_determinism(seed_for(7, ds::BENCHMARK)));
                }
                let (benchmark, determinism) = bench_pair.clone().unwrap();
                if pair == "benchmark" {
                    benchmark
                } else {
                    determinism
                }
            }
            _ => unreachable!("validated against CRITERIA"),
        };
        println!("{}", outcome.line());
        outcomes.push(outcome);
    }

    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    Ok(if passed == outcomes.len() {
        0
    } else {
        EXIT_VERIFY
    })
}
