//! Reference denoisers the QUBO pipeline is measured against: Gibbs sampling
//! under the same RBM, classical median and Gaussian filters, and an exact
//! Markov-random-field cut on the pixel grid.

use crate::bits::{BinaryImage, BitVector};
use crate::error::{Error, Result};
use crate::rbm::RbmParams;
use crate::rng;

const GIBBS_STREAM_TAG: u64 = 0x67696262;

/// Chain length and averaging weights for [`gibbs_denoise`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GibbsDenoiseConfig {
    pub iterations: usize,
    /// Exponential weight applied per step of age: the sample from iteration
    /// `t` of `T` carries weight `decay^(T - t)`, so the newest is heaviest.
    pub decay: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for GibbsDenoiseConfig {
    fn default() -> Self {
        GibbsDenoiseConfig {
            iterations: 20,
            decay: 0.8,
            threshold: 0.5,
            seed: 0,
        }
    }
}

impl GibbsDenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("gibbs iterations must be at least 1"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::invalid("gibbs decay must lie in (0, 1]"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid("threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Visible samples from `iterations` alternating Gibbs updates started at
/// `start`.
fn gibbs_chain(
    params: &RbmParams,
    start: &BitVector,
    iterations: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<BitVector>> {
    let mut samples = Vec::with_capacity(iterations);
    let mut v = start.clone();
    for _ in 0..iterations {
        let (v_next, _) = params.gibbs_step(&v, rng)?;
        samples.push(v_next.clone());
        v = v_next;
    }
    Ok(samples)
}

/// Denoise by running the model's own Gibbs chain from the noisy vector and
/// thresholding a recency-weighted average of the visited visible states.
pub fn gibbs_denoise(
    params: &RbmParams,
    noisy: &BitVector,
    cfg: &GibbsDenoiseConfig,
) -> Result<BitVector> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, &[GIBBS_STREAM_TAG]);
    let samples = gibbs_chain(params, noisy, cfg.iterations, &mut rng)?;
    let t_max = samples.len();
    let mut mean = vec![0.0f64; noisy.len()];
    let mut total = 0.0;
    for (idx, sample) in samples.iter().enumerate() {
        let w = cfg.decay.powi((t_max - 1 - idx) as i32);
        total += w;
        for (m, &b) in mean.iter_mut().zip(sample.iter()) {
            *m += w * b as f64;
        }
    }
    BitVector::from_fn(noisy.len(), |i| u8::from(mean[i] / total > cfg.threshold))
}

/// Majority vote over an odd `window x window` neighborhood with edge
/// replication. `window = 1` is the identity.
pub fn median_filter(img: &BinaryImage, window: usize) -> Result<BinaryImage> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::invalid(format!(
            "median window {window} must be odd"
        )));
    }
    let r = (window / 2) as isize;
    let mut out = Vec::with_capacity(img.width() * img.height());
    for row in 0..img.height() as isize {
        for col in 0..img.width() as isize {
            let mut ones = 0usize;
            for dr in -r..=r {
                for dc in -r..=r {
                    ones += img.get_clamped(row + dr, col + dc) as usize;
                }
            }
            // window^2 is odd, so the majority is never tied
            out.push(u8::from(2 * ones > window * window));
        }
    }
    img.with_pixels(BitVector::new(out)?)
}

/// Classify a smoothed intensity against 1/2, keeping the original pixel on
/// an exact tie.
fn classify(value: f64, original: u8) -> u8 {
    if value > 0.5 {
        1
    } else if value < 0.5 {
        0
    } else {
        original
    }
}

/// Convolve with a normalized Gaussian (radius `ceil(3 sigma)`, edge
/// replication) and threshold at 1/2; exact ties keep the input pixel.
pub fn gaussian_filter(img: &BinaryImage, sigma: f64) -> Result<BinaryImage> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "gaussian sigma {sigma} must be positive and finite"
        )));
    }
    let r = sigma.mul_add(3.0, 0.0).ceil() as isize;
    let mut kernel = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    let mut total = 0.0;
    for dr in -r..=r {
        for dc in -r..=r {
            let w = (-((dr * dr + dc * dc) as f64) / (2.0 * sigma * sigma)).exp();
            kernel.push((dr, dc, w));
            total += w;
        }
    }
    let mut out = Vec::with_capacity(img.width() * img.height());
    for row in 0..img.height() as isize {
        for col in 0..img.width() as isize {
            let mut acc = 0.0;
            for &(dr, dc, w) in &kernel {
                acc += w * img.get_clamped(row + dr, col + dc) as f64;
            }
            out.push(classify(acc / total, img.get(row as usize, col as usize)));
        }
    }
    img.with_pixels(BitVector::new(out)?)
}

/// Fidelity and smoothness weights of the grid model minimized by
/// [`graphcut_denoise`]:
/// `E(x) = lambda * sum_i [x_i != noisy_i] + beta * sum_{4-adjacent} [x_i != x_j]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraphCutConfig {
    pub lambda: f64,
    pub beta: f64,
}

impl Default for GraphCutConfig {
    fn default() -> Self {
        GraphCutConfig {
            lambda: 1.0,
            beta: 0.5,
        }
    }
}

impl GraphCutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be non-negative and finite"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta must be non-negative and finite"));
        }
        Ok(())
    }
}

/// The grid objective itself; exposed so callers can check cut optimality.
pub fn graphcut_energy(labels: &BinaryImage, noisy: &BinaryImage, cfg: &GraphCutConfig) -> f64 {
    let mut e = 0.0;
    for r in 0..noisy.height() {
        for c in 0..noisy.width() {
            if labels.get(r, c) != noisy.get(r, c) {
                e += cfg.lambda;
            }
            if c + 1 < noisy.width() && labels.get(r, c) != labels.get(r, c + 1) {
                e += cfg.beta;
            }
            if r + 1 < noisy.height() && labels.get(r, c) != labels.get(r + 1, c) {
                e += cfg.beta;
            }
        }
    }
    e
}

/// Exact minimizer of the grid objective via a minimum cut: source-side
/// pixels of the final residual graph take label 1.
pub fn graphcut_denoise(noisy: &BinaryImage, cfg: &GraphCutConfig) -> Result<BinaryImage> {
    cfg.validate()?;
    let (w, h) = (noisy.width(), noisy.height());
    let n = w * h;
    let (source, sink) = (n, n + 1);
    let mut flow = maxflow::Network::new(n + 2);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            // cutting s->i pays the cost of label 0, i->t the cost of label 1
            if noisy.get(r, c) == 1 {
                flow.add_edge(source, i, cfg.lambda, 0.0);
            } else {
                flow.add_edge(i, sink, cfg.lambda, 0.0);
            }
            if c + 1 < w {
                flow.add_edge(i, i + 1, cfg.beta, cfg.beta);
            }
            if r + 1 < h {
                flow.add_edge(i, i + w, cfg.beta, cfg.beta);
            }
        }
    }
    flow.run(source, sink);
    let reachable = flow.source_side(source);
    let labels = BitVector::from_fn(n, |i| u8::from(reachable[i]))?;
    noisy.with_pixels(labels)
}

/// Dinic's algorithm on an adjacency-list residual network with `f64`
/// capacities. Capacities here are sums of `lambda` and `beta`, so exact
/// dyadic values stay exact through the arithmetic.
mod maxflow {
    const EPS: f64 = 1e-12;

    struct Edge {
        to: usize,
        rev: usize,
        cap: f64,
    }

    pub struct Network {
        graph: Vec<Vec<Edge>>,
        level: Vec<i32>,
        iter: Vec<usize>,
    }

    impl Network {
        pub fn new(nodes: usize) -> Self {
            Network {
                graph: (0..nodes).map(|_| Vec::new()).collect(),
                level: vec![0; nodes],
                iter: vec![0; nodes],
            }
        }

        pub fn add_edge(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) {
            let ru = self.graph[u].len();
            let rv = self.graph[v].len();
            self.graph[u].push(Edge { to: v, rev: rv, cap });
            self.graph[v].push(Edge {
                to: u,
                rev: ru,
                cap: rev_cap,
            });
        }

        fn bfs(&mut self, s: usize, t: usize) -> bool {
            self.level.fill(-1);
            let mut queue = std::collections::VecDeque::new();
            self.level[s] = 0;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for e in &self.graph[u] {
                    if e.cap > EPS && self.level[e.to] < 0 {
                        self.level[e.to] = self.level[u] + 1;
                        queue.push_back(e.to);
                    }
                }
            }
            self.level[t] >= 0
        }

        fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
            if u == t {
                return pushed;
            }
            while self.iter[u] < self.graph[u].len() {
                let i = self.iter[u];
                let (to, cap, rev) = {
                    let e = &self.graph[u][i];
                    (e.to, e.cap, e.rev)
                };
                if cap > EPS && self.level[to] == self.level[u] + 1 {
                    let d = self.dfs(to, t, pushed.min(cap));
                    if d > EPS {
                        self.graph[u][i].cap -= d;
                        self.graph[to][rev].cap += d;
                        return d;
                    }
                }
                self.iter[u] += 1;
            }
            0.0
        }

        pub fn run(&mut self, s: usize, t: usize) -> f64 {
            let mut flow = 0.0;
            while self.bfs(s, t) {
                self.iter.fill(0);
                loop {
                    let f = self.dfs(s, t, f64::INFINITY);
                    if f <= EPS {
                        break;
                    }
                    flow += f;
                }
            }
            flow
        }

        /// Nodes reachable from `s` in the residual graph after `run`.
        pub fn source_side(&self, s: usize) -> Vec<bool> {
            let mut seen = vec![false; self.graph.len()];
            let mut queue = std::collections::VecDeque::new();
            seen[s] = true;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for e in &self.graph[u] {
                    if e.cap > EPS && !seen[e.to] {
                        seen[e.to] = true;
                        queue.push_back(e.to);
                    }
                }
            }
            seen
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::{Array1, Array2};
    use rand::Rng;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::new(bits.to_vec()).unwrap()
    }

    fn img(w: usize, h: usize, bits: &[u8]) -> BinaryImage {
        BinaryImage::from_pixels(w, h, bv(bits)).unwrap()
    }

    fn random_image(w: usize, h: usize, density: f64, seed: u64) -> BinaryImage {
        let mut r = rng::seeded(seed);
        BinaryImage::from_pixels(
            w,
            h,
            BitVector::from_fn(w * h, |_| u8::from(r.gen_bool(density))).unwrap(),
        )
        .unwrap()
    }

    fn tiny_rbm(nv: usize, nh: usize, seed: u64) -> RbmParams {
        let mut r = rng::seeded(seed);
        RbmParams::new(
            Array2::from_shape_fn((nh, nv), |_| r.gen_range(-1.0..1.0)),
            Array1::from_shape_fn(nv, |_| r.gen_range(-1.0..1.0)),
            Array1::from_shape_fn(nh, |_| r.gen_range(-1.0..1.0)),
        )
        .unwrap()
    }

    #[test]
    fn gibbs_average_weighs_recent_samples_heaviest() {
        let p = tiny_rbm(2, 2, 5);
        let noisy = bv(&[1, 0]);
        let cfg = GibbsDenoiseConfig {
            iterations: 6,
            decay: 0.8,
            seed: 42,
            ..GibbsDenoiseConfig::default()
        };
        // replay the chain the function will see and weight it by hand
        let mut rng = rng::stream(cfg.seed, &[GIBBS_STREAM_TAG]);
        let samples = gibbs_chain(&p, &noisy, cfg.iterations, &mut rng).unwrap();
        let mut expected = [0.0f64; 2];
        let mut total = 0.0;
        for (idx, s) in samples.iter().enumerate() {
            let w = 0.8f64.powi((cfg.iterations - 1 - idx) as i32);
            total += w;
            for (i, e) in expected.iter_mut().enumerate() {
                *e += w * s.get(i) as f64;
            }
        }
        let by_hand = BitVector::from_fn(2, |i| u8::from(expected[i] / total > 0.5)).unwrap();
        assert_eq!(gibbs_denoise(&p, &noisy, &cfg).unwrap(), by_hand);
    }

    #[test]
    fn gibbs_denoise_is_deterministic_and_validated() {
        let p = tiny_rbm(4, 3, 9);
        let noisy = bv(&[1, 0, 1, 1]);
        let cfg = GibbsDenoiseConfig {
            seed: 7,
            ..GibbsDenoiseConfig::default()
        };
        assert_eq!(
            gibbs_denoise(&p, &noisy, &cfg).unwrap(),
            gibbs_denoise(&p, &noisy, &cfg).unwrap()
        );
        let bad = GibbsDenoiseConfig {
            iterations: 0,
            ..cfg
        };
        assert!(gibbs_denoise(&p, &noisy, &bad).is_err());
        let bad = GibbsDenoiseConfig { decay: 0.0, ..cfg };
        assert!(gibbs_denoise(&p, &noisy, &bad).is_err());
    }

    #[test]
    fn median_removes_isolated_speckle() {
        let mut bits = vec![0u8; 25];
        bits[12] = 1; // center of 5x5
        let speckled = img(5, 5, &bits);
        let out = median_filter(&speckled, 3).unwrap();
        assert_eq!(out.pixels(), BinaryImage::from_pixels(5, 5, BitVector::zeros(25)).unwrap().pixels());
    }

    #[test]
    fn median_erases_single_pixel_lines() {
        // a 1-wide stripe loses the majority vote in every 3x3 window
        let mut bits = vec![0u8; 25];
        for c in 0..5 {
            bits[2 * 5 + c] = 1;
        }
        let striped = img(5, 5, &bits);
        let out = median_filter(&striped, 3).unwrap();
        assert_eq!(out.pixels().count_ones(), 0);
    }

    #[test]
    fn median_window_one_is_identity_and_even_rejected() {
        let im = random_image(4, 3, 0.5, 3);
        assert_eq!(median_filter(&im, 1).unwrap(), im);
        assert!(median_filter(&im, 2).is_err());
        assert!(median_filter(&im, 0).is_err());
    }

    #[test]
    fn median_replicates_edges() {
        // corner (0,0) of a 2x2: replicated window holds 4 copies of (0,0),
        // 2 of (0,1), 2 of (1,0), 1 of (1,1) -> ones majority needs 5 of 9
        let corner = img(2, 2, &[1, 0, 0, 0]);
        let out = median_filter(&corner, 3).unwrap();
        assert_eq!(out.get(0, 0), 0); // 4 ones of 9: majority says background
        let corner = img(2, 2, &[1, 1, 1, 0]);
        let out = median_filter(&corner, 3).unwrap();
        assert_eq!(out.get(0, 0), 1); // 4 + 2 + 2 = 8 ones of 9
    }

    #[test]
    fn gaussian_keeps_constant_images_and_validates_sigma() {
        let ones = img(3, 3, &[1; 9]);
        assert_eq!(gaussian_filter(&ones, 1.0).unwrap(), ones);
        let zeros = img(3, 3, &[0; 9]);
        assert_eq!(gaussian_filter(&zeros, 0.7).unwrap(), zeros);
        assert!(gaussian_filter(&ones, 0.0).is_err());
        assert!(gaussian_filter(&ones, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_smooths_speckle_but_preserves_blocks() {
        let mut bits = vec![0u8; 49];
        bits[24] = 1;
        let speckled = img(7, 7, &bits);
        assert_eq!(gaussian_filter(&speckled, 1.0).unwrap().pixels().count_ones(), 0);

        // a solid half-plane survives smoothing
        let mut bits = vec![0u8; 49];
        for r in 0..7 {
            for c in 0..3 {
                bits[r * 7 + c] = 1;
            }
        }
        let block = img(7, 7, &bits);
        let out = gaussian_filter(&block, 0.8).unwrap();
        for r in 0..7 {
            assert_eq!(out.get(r, 0), 1);
            assert_eq!(out.get(r, 6), 0);
        }
    }

    #[test]
    fn tie_classification_keeps_the_original() {
        assert_eq!(classify(0.5, 1), 1);
        assert_eq!(classify(0.5, 0), 0);
        assert_eq!(classify(0.6, 0), 1);
        assert_eq!(classify(0.4, 1), 0);
    }

    #[test]
    fn graphcut_matches_brute_force_on_small_grids() {
        let cfg = GraphCutConfig::default();
        for seed in 0..20 {
            let noisy = random_image(3, 3, 0.5, 7000 + seed);
            let cut = graphcut_denoise(&noisy, &cfg).unwrap();
            let cut_energy = graphcut_energy(&cut, &noisy, &cfg);
            // oracle: enumerate all 2^9 labelings with an explicit objective
            let mut best = f64::INFINITY;
            for s in 0u64..(1 << 9) {
                let labels = noisy
                    .with_pixels(BitVector::from_fn(9, |i| ((s >> i) & 1) as u8).unwrap())
                    .unwrap();
                let mut e = 0.0;
                for r in 0..3 {
                    for c in 0..3 {
                        if labels.get(r, c) != noisy.get(r, c) {
                            e += cfg.lambda;
                        }
                        if c + 1 < 3 && labels.get(r, c) != labels.get(r, c + 1) {
                            e += cfg.beta;
                        }
                        if r + 1 < 3 && labels.get(r, c) != labels.get(r + 1, c) {
                            e += cfg.beta;
                        }
                    }
                }
                best = best.min(e);
            }
            assert_eq!(cut_energy, best, "seed {seed}");
        }
    }

    #[test]
    fn graphcut_with_zero_smoothness_copies_the_input() {
        let noisy = random_image(4, 4, 0.4, 11);
        let cfg = GraphCutConfig {
            lambda: 1.0,
            beta: 0.0,
        };
        let out = graphcut_denoise(&noisy, &cfg).unwrap();
        assert_eq!(graphcut_energy(&out, &noisy, &cfg), 0.0);
    }

    #[test]
    fn graphcut_heals_isolated_flips_in_flat_regions() {
        let mut bits = vec![1u8; 36];
        bits[14] = 0; // lone hole in a solid block
        let noisy = img(6, 6, &bits);
        let out = graphcut_denoise(&noisy, &GraphCutConfig::default()).unwrap();
        // flipping the hole costs lambda = 1 but saves 4 * beta = 2
        assert_eq!(out.get(2, 2), 1);
        assert_eq!(out.pixels().count_ones(), 36);
    }

    #[test]
    fn graphcut_rejects_bad_weights() {
        let noisy = random_image(2, 2, 0.5, 1);
        assert!(graphcut_denoise(
            &noisy,
            &GraphCutConfig {
                lambda: -1.0,
                beta: 0.5
            }
        )
        .is_err());
        assert!(graphcut_denoise(
            &noisy,
            &GraphCutConfig {
                lambda: 1.0,
                beta: f64::INFINITY
            }
        )
        .is_err());
    }
}
