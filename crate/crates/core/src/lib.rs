//! Binary image denoising with restricted Boltzmann machines and QUBO solvers.
//!
//! The pipeline: train an RBM on clean binary images ([`rbm`]), map its energy
//! to a QUBO cost matrix ([`qubo`]), add a data-fidelity penalty tied to the
//! noise level ([`denoise`]), and minimize with an exhaustive, simulated
//! annealing, or remote solver ([`solvers`]). Classical filters and RBM Gibbs
//! sampling ([`baselines`]), dataset handling ([`data`]), and a benchmark
//! harness with bootstrap confidence intervals ([`metrics`]) round out the
//! toolkit. [`verify`] re-runs the statistical checks that pin the method's
//! claimed behavior.

pub mod baselines;
pub mod bits;
pub mod data;
pub mod denoise;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod qubo;
pub mod verify;
pub mod rbm;
pub mod solvers;
pub mod rng;

pub use baselines::{gaussian_filter, gibbs_denoise, graphcut_denoise, median_filter, GibbsDenoiseConfig, GraphCutConfig};
pub use bits::{hamming, overlap, BinaryImage, BitVector};
pub use data::{binarize, downscale_nn, gen_bas, is_bars_or_stripes, load_idx, read_pbm, write_pbm, Dataset, GrayImage, Split};
pub use denoise::{denoise, DenoiseConfig, DenoiseResult};
pub use error::{Error, Result};
pub use metrics::{bootstrap_ci, emit_report, guess_sigma, pixel_match_rate, run_experiment, CellReport, ExperimentReport, ExperimentSpec, MethodSpec, QuboSolverSpec, SigmaKnowledge};
pub use qubo::QuboMatrix;
pub use rbm::{train_cd, RbmParams, TrainConfig};
pub use verify::{run_all, CriterionOutcome};
pub use solvers::{solve_exhaustive, solve_sa, QuboSolver, SaConfig, Solution};
