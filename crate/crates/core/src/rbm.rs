//! Restricted Boltzmann machines over binary units.
//!
//! The joint energy of visible `v` and hidden `h` is
//!
//! ```text
//! f(v, h) = h^T W v + b_v . v + b_h . h
//! ```
//!
//! with `W` stored hidden-major (`h x v`), and the model assigns
//! `P(v, h) ~ exp(-f(v, h))`. Under that convention the conditional of a
//! hidden unit is `P(h_j = 1 | v) = 1 / (1 + exp(b_h[j] + (W v)_j))`, i.e. a
//! logistic of the *negated* activation; visible units are symmetric with
//! `W^T`. Lower energy means higher probability everywhere in this crate.
//!
//! Training is contrastive divergence: the data term uses exact hidden
//! conditionals, the model term is approximated by `cd_steps` sweeps of Gibbs
//! sampling started at the data vector, and parameters move along the
//! resulting estimate of the exact log-likelihood gradient.
//!
//! # Model file format
//!
//! [`RbmParams::save`] writes a little-endian binary layout:
//!
//! ```text
//! offset            size   field
//! 0                 4      magic "QRBM"
//! 4                 4      format version, u32 (currently 1)
//! 8                 4      num_visible v, u32
//! 12                4      num_hidden h, u32
//! 16                8*h*v  W row-major (h rows of v columns), f64
//! 16 + 8*h*v        8*v    b_v, f64
//! 16 + 8*h*(v+1)    8*h    b_h, f64
//! ```
//!
//! All floats are raw IEEE-754 bits, so a save/load round trip is lossless.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::rng;
use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;

/// Largest `v + h` for which exact likelihood enumeration is allowed.
pub const EXACT_MAX_UNITS: usize = 24;

const MODEL_MAGIC: &[u8; 4] = b"QRBM";
const MODEL_VERSION: u32 = 1;

/// Weights and biases of an RBM. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    w: Array2<f64>,
    b_v: Array1<f64>,
    b_h: Array1<f64>,
}

/// Gradient of the exact log-likelihood, in the same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct RbmGrad {
    pub w: Array2<f64>,
    pub b_v: Array1<f64>,
    pub b_h: Array1<f64>,
}

/// Contrastive-divergence hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub cd_steps: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            cd_steps: 1,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cd_steps == 0 {
            return Err(Error::invalid("cd_steps must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive and finite",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln(1 + e^x) without overflow for large |x|.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut m = Array2::zeros((a.len(), b.len()));
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            m[[i, j]] = ai * bj;
        }
    }
    m
}

impl RbmParams {
    /// `w` must be `h x v`; bias lengths must match. All values finite.
    pub fn new(w: Array2<f64>, b_v: Array1<f64>, b_h: Array1<f64>) -> Result<Self> {
        let (h, v) = w.dim();
        if v == 0 || h == 0 {
            return Err(Error::invalid("RBM needs at least one unit per layer"));
        }
        if b_v.len() != v {
            return Err(Error::LengthMismatch {
                expected: v,
                got: b_v.len(),
            });
        }
        if b_h.len() != h {
            return Err(Error::LengthMismatch {
                expected: h,
                got: b_h.len(),
            });
        }
        if w.iter().chain(b_v.iter()).chain(b_h.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("RBM parameters must be finite"));
        }
        Ok(RbmParams { w, b_v, b_h })
    }

    pub fn zeros(num_visible: usize, num_hidden: usize) -> Result<Self> {
        RbmParams::new(
            Array2::zeros((num_hidden, num_visible)),
            Array1::zeros(num_visible),
            Array1::zeros(num_hidden),
        )
    }

    /// Standard starting point for training: weights uniform in
    /// (-0.01, 0.01), biases zero.
    pub fn random_init(num_visible: usize, num_hidden: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[0x696e6974]);
        let w = Array2::from_shape_fn((num_hidden, num_visible), |_| rng.gen_range(-0.01..0.01));
        RbmParams::new(w, Array1::zeros(num_visible), Array1::zeros(num_hidden))
    }

    pub fn num_visible(&self) -> usize {
        self.w.ncols()
    }

    pub fn num_hidden(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn b_v(&self) -> &Array1<f64> {
        &self.b_v
    }

    pub fn b_h(&self) -> &Array1<f64> {
        &self.b_h
    }

    fn check_visible(&self, v: &BitVector) -> Result<()> {
        if v.len() != self.num_visible() {
            return Err(Error::LengthMismatch {
                expected: self.num_visible(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_hidden(&self, h: &BitVector) -> Result<()> {
        if h.len() != self.num_hidden() {
            return Err(Error::LengthMismatch {
                expected: self.num_hidden(),
                got: h.len(),
            });
        }
        Ok(())
    }

    /// Joint energy `h^T W v + b_v . v + b_h . h`.
    pub fn energy(&self, v: &BitVector, h: &BitVector) -> Result<f64> {
        self.check_visible(v)?;
        self.check_hidden(h)?;
        let vf = v.to_f64();
        let hf = h.to_f64();
        Ok(hf.dot(&self.w.dot(&vf)) + self.b_v.dot(&vf) + self.b_h.dot(&hf))
    }

    /// `P(h_j = 1 | v)` for every hidden unit: `sigmoid(-(b_h + W v))`.
    pub fn hidden_conditional(&self, v: &BitVector) -> Result<Array1<f64>> {
        self.check_visible(v)?;
        let act = self.w.dot(&v.to_f64()) + &self.b_h;
        Ok(act.mapv(|a| sigmoid(-a)))
    }

    /// `P(v_i = 1 | h)` for every visible unit: `sigmoid(-(b_v + W^T h))`.
    pub fn visible_conditional(&self, h: &BitVector) -> Result<Array1<f64>> {
        self.check_hidden(h)?;
        let act = self.w.t().dot(&h.to_f64()) + &self.b_v;
        Ok(act.mapv(|a| sigmoid(-a)))
    }

    /// One alternating Gibbs update: sample `h' ~ P(h | v)`, then
    /// `v' ~ P(v | h')`. Returns `(v', h')`.
    pub fn gibbs_step(&self, v: &BitVector, rng: &mut impl Rng) -> Result<(BitVector, BitVector)> {
        let h = sample_bernoulli(&self.hidden_conditional(v)?, rng);
        let v_next = sample_bernoulli(&self.visible_conditional(&h)?, rng);
        Ok((v_next, h))
    }

    /// Embed the RBM energy as a QUBO over the concatenated state
    /// `(v_0..v_{nv-1}, h_0..h_{nh-1})`: biases on the diagonal and `W/2` on
    /// the visible-hidden off-diagonal block, so the double-sum energy of the
    /// QUBO equals [`RbmParams::energy`] for every state.
    pub fn to_qubo(&self) -> QuboMatrix {
        let nv = self.num_visible();
        let nh = self.num_hidden();
        let n = nv + nh;
        let mut q = Array2::zeros((n, n));
        for i in 0..nv {
            q[[i, i]] = self.b_v[i];
        }
        for j in 0..nh {
            q[[nv + j, nv + j]] = self.b_h[j];
        }
        for j in 0..nh {
            for i in 0..nv {
                q[[i, nv + j]] = self.w[[j, i]] / 2.0;
                q[[nv + j, i]] = self.w[[j, i]] / 2.0;
            }
        }
        QuboMatrix::from_dense(q).expect("construction is symmetric and finite")
    }

    /// `log sum_h exp(-f(v, h))`, the unnormalized log-probability of `v`.
    /// The hidden sum factorizes, so this is cheap for any `h`.
    fn log_unnorm_marginal(&self, v: &Array1<f64>) -> f64 {
        let act = self.w.dot(v) + &self.b_h;
        -self.b_v.dot(v) + act.iter().map(|&a| softplus(-a)).sum::<f64>()
    }

    fn exact_guard(&self) -> Result<()> {
        let n = self.num_visible() + self.num_hidden();
        if n > EXACT_MAX_UNITS {
            return Err(Error::SizeGuard {
                what: "exact likelihood enumeration",
                n,
                max: EXACT_MAX_UNITS,
            });
        }
        Ok(())
    }

    /// Exact log normalizer `log sum_{v,h} exp(-f)`, by enumeration of the
    /// visible layer. Guarded by [`EXACT_MAX_UNITS`].
    pub fn exact_log_z(&self) -> Result<f64> {
        self.exact_guard()?;
        let nv = self.num_visible();
        let mut terms = Vec::with_capacity(1usize << nv);
        let mut v = Array1::zeros(nv);
        for state in 0u64..(1u64 << nv) {
            for i in 0..nv {
                v[i] = ((state >> i) & 1) as f64;
            }
            terms.push(self.log_unnorm_marginal(&v));
        }
        Ok(log_sum_exp(&terms))
    }

    /// Exact log-likelihood of `data`: `sum_k log P(v_k)` with the true
    /// normalizer. Only available when `v + h <= EXACT_MAX_UNITS`.
    pub fn exact_log_likelihood(&self, data: &[BitVector]) -> Result<f64> {
        self.exact_guard()?;
        if data.is_empty() {
            return Err(Error::EmptyData("log-likelihood of empty dataset"));
        }
        let log_z = self.exact_log_z()?;
        let mut ll = 0.0;
        for v in data {
            self.check_visible(v)?;
            ll += self.log_unnorm_marginal(&v.to_f64()) - log_z;
        }
        Ok(ll)
    }

    /// Analytic gradient of [`RbmParams::exact_log_likelihood`] with respect
    /// to every parameter, computed by exact enumeration of the visible layer.
    pub fn exact_log_likelihood_grad(&self, data: &[BitVector]) -> Result<RbmGrad> {
        self.exact_guard()?;
        if data.is_empty() {
            return Err(Error::EmptyData("log-likelihood of empty dataset"));
        }
        let nv = self.num_visible();
        let nh = self.num_hidden();
        let log_z = self.exact_log_z()?;

        // model expectations E[v], E[p(h|v)], E[p(h|v) v^T]
        let mut e_v = Array1::zeros(nv);
        let mut e_h = Array1::zeros(nh);
        let mut e_hv = Array2::zeros((nh, nv));
        let mut v = Array1::zeros(nv);
        for state in 0u64..(1u64 << nv) {
            for i in 0..nv {
                v[i] = ((state >> i) & 1) as f64;
            }
            let p_state = (self.log_unnorm_marginal(&v) - log_z).exp();
            let act = self.w.dot(&v) + &self.b_h;
            let p_h = act.mapv(|a| sigmoid(-a));
            e_v.scaled_add(p_state, &v);
            e_h.scaled_add(p_state, &p_h);
            e_hv.scaled_add(p_state, &outer(&p_h, &v));
        }

        // data sums of the same statistics
        let n = data.len() as f64;
        let mut d_v = Array1::zeros(nv);
        let mut d_h = Array1::zeros(nh);
        let mut d_hv = Array2::zeros((nh, nv));
        for item in data {
            self.check_visible(item)?;
            let vf = item.to_f64();
            let p_h = self.hidden_conditional(item)?;
            d_v += &vf;
            d_h += &p_h;
            d_hv += &outer(&p_h, &vf);
        }

        // d/dW of -f is -h v^T, so the likelihood rises toward the model term
        Ok(RbmGrad {
            w: e_hv * n - d_hv,
            b_v: e_v * n - d_v,
            b_h: e_h * n - d_h,
        })
    }

    /// Deterministic reconstruction error proxy for models too large for
    /// exact likelihood: mean squared difference between each data vector and
    /// its one-step mean-field reconstruction.
    pub fn reconstruction_error(&self, data: &[BitVector]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData("reconstruction error of empty dataset"));
        }
        let mut total = 0.0;
        for item in data {
            let p_h = self.hidden_conditional(item)?;
            let act = self.w.t().dot(&p_h) + &self.b_v;
            let recon = act.mapv(|a| sigmoid(-a));
            let vf = item.to_f64();
            total += (&recon - &vf).mapv(|d| d * d).mean().unwrap_or(0.0);
        }
        Ok(total / data.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.num_visible() as u32).to_le_bytes());
        buf.extend_from_slice(&(self.num_hidden() as u32).to_le_bytes());
        for x in self.w.iter().chain(self.b_v.iter()).chain(self.b_h.iter()) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let parse = |offset: u64, message: &str| Error::Parse {
            offset,
            message: message.to_string(),
        };
        if bytes.len() < 16 {
            return Err(parse(bytes.len() as u64, "model file truncated in header"));
        }
        if &bytes[0..4] != MODEL_MAGIC {
            return Err(parse(0, "bad magic, not a model file"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(parse(4, &format!("unsupported model version {version}")));
        }
        let nv = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let nh = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let expected = 16 + 8 * (nh * nv + nv + nh);
        if bytes.len() != expected {
            return Err(parse(
                bytes.len().min(expected) as u64,
                &format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        let mut floats = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let w = Array2::from_shape_fn((nh, nv), |_| floats.next().unwrap());
        let b_v = Array1::from_iter((&mut floats).take(nv));
        let b_h = Array1::from_iter(floats);
        RbmParams::new(w, b_v, b_h)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// Draw each coordinate independently with the given success probability.
pub fn sample_bernoulli(p: &Array1<f64>, rng: &mut impl Rng) -> BitVector {
    BitVector::from_raw_unchecked(p.iter().map(|&pi| u8::from(rng.gen_bool(pi))).collect())
}

/// Train a fresh RBM with `num_hidden` hidden units on `data` by CD-k.
/// The visible layer size is taken from the data.
pub fn train_cd(data: &[BitVector], num_hidden: usize, cfg: &TrainConfig) -> Result<RbmParams> {
    let first = data
        .first()
        .ok_or(Error::EmptyData("training on empty dataset"))?;
    let init = RbmParams::random_init(first.len(), num_hidden, cfg.seed)?;
    train_cd_from(init, data, cfg)
}

/// Continue CD-k training from an existing parameter set.
pub fn train_cd_from(params: RbmParams, data: &[BitVector], cfg: &TrainConfig) -> Result<RbmParams> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData("training on empty dataset"));
    }
    for item in data {
        params.check_visible(item)?;
    }

    let mut p = params;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng::stream(cfg.seed, &[0x73687566, epoch as u64]);
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);

        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            p = cd_batch_update(p, data, batch, epoch, batch_idx, cfg)?;
        }
    }
    Ok(p)
}

struct ChainStats {
    w: Array2<f64>,
    b_v: Array1<f64>,
    b_h: Array1<f64>,
}

fn cd_batch_update(
    p: RbmParams,
    data: &[BitVector],
    batch: &[usize],
    epoch: usize,
    batch_idx: usize,
    cfg: &TrainConfig,
) -> Result<RbmParams> {
    // Per-item Gibbs chains draw from their own seed-derived streams, so the
    // result is identical however rayon schedules them.
    let stats: Vec<Result<ChainStats>> = batch
        .par_iter()
        .map(|&item_idx| {
            let v0 = &data[item_idx];
            let p_h0 = p.hidden_conditional(v0)?;

            let mut chain_rng = rng::stream(
                cfg.seed,
                &[0x636861696e, epoch as u64, batch_idx as u64, item_idx as u64],
            );
            let mut v_k = v0.clone();
            for _ in 0..cfg.cd_steps {
                let (v_next, _) = p.gibbs_step(&v_k, &mut chain_rng)?;
                v_k = v_next;
            }
            let p_hk = p.hidden_conditional(&v_k)?;
            let v0f = v0.to_f64();
            let vkf = v_k.to_f64();
            Ok(ChainStats {
                w: outer(&p_hk, &vkf) - outer(&p_h0, &v0f),
                b_v: vkf - v0f,
                b_h: p_hk - p_h0,
            })
        })
        .collect();

    let scale = cfg.learning_rate / batch.len() as f64;
    let mut w = p.w.clone();
    let mut b_v = p.b_v.clone();
    let mut b_h = p.b_h.clone();
    for s in stats {
        let s = s?;
        w.scaled_add(scale, &s.w);
        b_v.scaled_add(scale, &s.b_v);
        b_h.scaled_add(scale, &s.b_h);
    }
    RbmParams::new(w, b_v, b_h)
}
