//! QUBO minimizers behind a common interface.
//!
//! Every solver recomputes the energy of the state it returns with
//! [`QuboMatrix::energy`]; solver-internal bookkeeping (or a remote server's
//! claims) are never trusted for the reported value.
//!
//! # Remote wire format
//!
//! [`RemoteSolver`] speaks newline-delimited JSON over TCP, one request and
//! one response per connection:
//!
//! ```text
//! -> {"version":1,"n":3,"entries":[[0,0,-1.0],[0,2,0.5]],"num_reads":4,"seed":7}\n
//! <- {"version":1,"samples":[[1,0,0],[0,0,0]],"energies":[-1.0,0.0]}\n
//! ```
//!
//! `entries` lists the upper triangle (`i <= j`) of the symmetric cost matrix
//! in "each pair counted once" form, exactly what
//! [`QuboMatrix::to_upper_triangular`] produces. The server returns any
//! non-empty set of sample vectors of length `n` plus its claimed energies;
//! the client validates shape, recomputes every energy locally, and returns
//! the best sample. A `{"version":1,"error":"..."}` response surfaces as a
//! protocol error.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

/// Largest `n` accepted by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_N: usize = 24;

/// A candidate minimizer together with its locally recomputed energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub state: BitVector,
    pub energy: f64,
}

/// Common interface over exhaustive, annealing, and remote minimizers.
pub trait QuboSolver: Sync {
    /// Minimize `q`. `seed` fully determines the outcome of stochastic
    /// solvers and is ignored by deterministic ones.
    fn solve(&self, q: &QuboMatrix, seed: u64) -> Result<Solution>;

    /// Hard upper bound on problem size, if any.
    fn max_n(&self) -> Option<usize> {
        None
    }

    /// Whether distinct seeds can yield distinct results.
    fn is_stochastic(&self) -> bool;

    fn name(&self) -> &'static str;
}

/// Energy change from flipping bit `i` of `x`, in O(n) via the symmetric row:
/// `(1 - 2 x_i) * (Q_ii + 2 * sum_{j != i} Q_ij x_j)`.
pub fn single_flip_delta(q: &QuboMatrix, x: &BitVector, i: usize) -> Result<f64> {
    if x.len() != q.n() {
        return Err(Error::LengthMismatch {
            expected: q.n(),
            got: x.len(),
        });
    }
    if i >= q.n() {
        return Err(Error::invalid(format!("flip index {i} out of range")));
    }
    let row = q.row(i);
    let mut field = 0.0;
    for j in 0..x.len() {
        if j != i && x.get(j) == 1 {
            field += row[j];
        }
    }
    let d = 1.0 - 2.0 * x.get(i) as f64;
    Ok(d * (q.get(i, i) + 2.0 * field))
}

/// Energy of the state encoded in `mask`, where bit `i` of the state is
/// `(mask >> (n - 1 - i)) & 1`. Increasing masks therefore enumerate states
/// in lexicographic order of the bit vector.
fn energy_of_lex_mask(q: &QuboMatrix, mask: u32, n: usize) -> f64 {
    let mut ones = [0usize; MAX_EXHAUSTIVE_N];
    let mut k = 0;
    for i in 0..n {
        if (mask >> (n - 1 - i)) & 1 == 1 {
            ones[k] = i;
            k += 1;
        }
    }
    let mut e = 0.0;
    for a in 0..k {
        let i = ones[a];
        e += q.get(i, i);
        for &j in &ones[a + 1..k] {
            e += 2.0 * q.get(i, j);
        }
    }
    e
}

fn lex_mask_to_bits(mask: u32, n: usize) -> BitVector {
    BitVector::from_fn(n, |i| ((mask >> (n - 1 - i)) & 1) as u8).expect("bits are 0/1")
}

/// Global minimum by enumeration of all 2^n states. Ties go to the
/// lexicographically smallest bit vector. Rejects `n > MAX_EXHAUSTIVE_N`.
pub fn solve_exhaustive(q: &QuboMatrix) -> Result<Solution> {
    let n = q.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::SizeGuard {
            what: "exhaustive enumeration",
            n,
            max: MAX_EXHAUSTIVE_N,
        });
    }
    let mut best_mask = 0u32;
    let mut best_e = 0.0; // the all-zeros state
    for mask in 1..(1u64 << n) as u32 {
        let e = energy_of_lex_mask(q, mask, n);
        if e < best_e {
            best_e = e;
            best_mask = mask;
        }
    }
    let state = lex_mask_to_bits(best_mask, n);
    let energy = q.energy(&state)?;
    Ok(Solution { state, energy })
}

/// Deterministic exhaustive minimizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExhaustiveSolver;

impl QuboSolver for ExhaustiveSolver {
    fn solve(&self, q: &QuboMatrix, _seed: u64) -> Result<Solution> {
        solve_exhaustive(q)
    }

    fn max_n(&self) -> Option<usize> {
        Some(MAX_EXHAUSTIVE_N)
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn name(&self) -> &'static str {
        "exhaustive"
    }
}

/// Simulated-annealing schedule and effort knobs.
///
/// One sweep proposes `n` uniformly chosen single-bit flips under Metropolis
/// acceptance; the inverse temperature rises geometrically from `beta_start`
/// to `beta_end` across sweeps. `restarts` adds that many extra independent
/// chains; the best chain wins, ties to the lowest chain index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub restarts: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            sweeps: 1000,
            beta_start: 0.1,
            beta_end: 10.0,
            restarts: 0,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_start > 0.0 && self.beta_start.is_finite()) {
            return Err(Error::invalid("beta_start must be positive and finite"));
        }
        if !(self.beta_end >= self.beta_start && self.beta_end.is_finite()) {
            return Err(Error::invalid("beta_end must be finite and >= beta_start"));
        }
        Ok(())
    }
}

/// Best state seen by one annealing chain.
fn anneal_chain(q: &QuboMatrix, cfg: &SaConfig, seed: u64, chain: u64) -> Result<Solution> {
    let n = q.n();
    let mut rng = rng::stream(seed, &[0x616e6e65616c, chain]);
    let mut x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1u8)).collect();

    if cfg.sweeps == 0 {
        let state = BitVector::new(x)?;
        let energy = q.energy(&state)?;
        return Ok(Solution { state, energy });
    }

    // local fields: field[i] = sum_{j != i} Q_ij x_j, kept incrementally so a
    // proposal costs O(1) and an accepted flip O(n)
    let mut field = vec![0.0f64; n];
    for (i, f) in field.iter_mut().enumerate() {
        let row = q.row(i);
        *f = (0..n)
            .filter(|&j| j != i && x[j] == 1)
            .map(|j| row[j])
            .sum();
    }
    let init = BitVector::new(x.clone())?;
    let mut cur_e = q.energy(&init)?;
    let mut best_e = cur_e;
    let mut best_x = x.clone();

    let ratio = cfg.beta_end / cfg.beta_start;
    for sweep in 0..cfg.sweeps {
        let frac = if cfg.sweeps > 1 {
            sweep as f64 / (cfg.sweeps - 1) as f64
        } else {
            0.0
        };
        let beta = cfg.beta_start * ratio.powf(frac);
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            let d = 1.0 - 2.0 * x[i] as f64;
            let delta = d * (q.get(i, i) + 2.0 * field[i]);
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp();
            if accept {
                x[i] = 1 - x[i];
                cur_e += delta;
                let row = q.row(i);
                for j in 0..n {
                    if j != i {
                        field[j] += d * row[j];
                    }
                }
                if cur_e < best_e {
                    best_e = cur_e;
                    best_x.copy_from_slice(&x);
                }
            }
        }
    }

    let state = BitVector::new(best_x)?;
    let energy = q.energy(&state)?;
    Ok(Solution { state, energy })
}

/// Simulated annealing with `1 + cfg.restarts` independent chains.
pub fn solve_sa(q: &QuboMatrix, cfg: &SaConfig, seed: u64) -> Result<Solution> {
    cfg.validate()?;
    let chains: Vec<Result<Solution>> = (0..=cfg.restarts as u64)
        .into_par_iter()
        .map(|chain| anneal_chain(q, cfg, seed, chain))
        .collect();
    let mut best: Option<Solution> = None;
    for sol in chains {
        let sol = sol?;
        // strict comparison keeps the lowest chain index on ties
        if best.as_ref().is_none_or(|b| sol.energy < b.energy) {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one chain"))
}

#[derive(Debug, Clone, Default)]
pub struct SaSolver {
    pub cfg: SaConfig,
}

impl QuboSolver for SaSolver {
    fn solve(&self, q: &QuboMatrix, seed: u64) -> Result<Solution> {
        solve_sa(q, &self.cfg, seed)
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "sa"
    }
}

/// Where and how to reach a remote sampling service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub addr: String,
    pub num_reads: usize,
    pub timeout_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            addr: "127.0.0.1:7464".to_string(),
            num_reads: 1,
            timeout_ms: 10_000,
        }
    }
}

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct WireRequest {
    version: u32,
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    num_reads: usize,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct WireResponse {
    version: u32,
    #[serde(default)]
    samples: Vec<Vec<u8>>,
    #[serde(default)]
    energies: Vec<f64>,
    #[serde(default)]
    error: Option<String>,
}

/// Submit `q` to a remote sampler and return its best sample by locally
/// recomputed energy. The server's claimed energies are ignored.
pub fn solve_remote(q: &QuboMatrix, cfg: &RemoteConfig, seed: u64) -> Result<Solution> {
    if cfg.num_reads == 0 {
        return Err(Error::invalid("remote num_reads must be at least 1"));
    }
    let request = WireRequest {
        version: WIRE_VERSION,
        n: q.n(),
        entries: q.to_upper_triangular(),
        num_reads: cfg.num_reads,
        seed,
    };

    let mut stream = TcpStream::connect(&cfg.addr)?;
    let timeout = Some(Duration::from_millis(cfg.timeout_ms));
    stream.set_read_timeout(timeout)?;
    stream.set_write_timeout(timeout)?;

    let mut line = serde_json::to_string(&request)
        .map_err(|e| Error::Protocol(format!("request serialization: {e}")))?;
    line.push('\n');
    stream.write_all(line.as_bytes())?;
    stream.flush()?;

    let mut reply = String::new();
    BufReader::new(stream).read_line(&mut reply)?;
    if reply.trim().is_empty() {
        return Err(Error::Protocol("server closed without responding".into()));
    }
    let response: WireResponse = serde_json::from_str(reply.trim())
        .map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;

    if let Some(msg) = response.error {
        return Err(Error::Protocol(format!("server error: {msg}")));
    }
    if response.version != WIRE_VERSION {
        return Err(Error::Protocol(format!(
            "unsupported wire version {}",
            response.version
        )));
    }
    if response.samples.is_empty() {
        return Err(Error::Protocol("response carried no samples".into()));
    }
    if response.energies.len() != response.samples.len() {
        return Err(Error::Protocol(format!(
            "{} samples but {} energies",
            response.samples.len(),
            response.energies.len()
        )));
    }

    let mut best: Option<Solution> = None;
    for sample in response.samples {
        if sample.len() != q.n() {
            return Err(Error::LengthMismatch {
                expected: q.n(),
                got: sample.len(),
            });
        }
        let state = BitVector::new(sample)
            .map_err(|_| Error::Protocol("sample contains non-binary values".into()))?;
        let energy = q.energy(&state)?;
        if best.as_ref().is_none_or(|b| energy < b.energy) {
            best = Some(Solution { state, energy });
        }
    }
    Ok(best.expect("non-empty samples"))
}

#[derive(Debug, Clone)]
pub struct RemoteSolver {
    pub cfg: RemoteConfig,
}

impl QuboSolver for RemoteSolver {
    fn solve(&self, q: &QuboMatrix, seed: u64) -> Result<Solution> {
        solve_remote(q, &self.cfg, seed)
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::new(bits.to_vec()).unwrap()
    }

    fn random_qubo(n: usize, scale: f64, seed: u64) -> QuboMatrix {
        let mut r = rng::seeded(seed);
        QuboMatrix::from_unsymmetric(Array2::from_shape_fn((n, n), |_| {
            r.gen_range(-scale..scale)
        }))
        .unwrap()
    }

    #[test]
    fn flip_delta_matches_energy_difference() {
        let mut r = rng::seeded(17);
        for _ in 0..200 {
            let n = r.gen_range(1..8);
            let q = random_qubo(n, 2.0, r.gen());
            let x = BitVector::from_fn(n, |_| r.gen_range(0..=1)).unwrap();
            let i = r.gen_range(0..n);
            let flipped = BitVector::from_fn(n, |k| {
                if k == i {
                    1 - x.get(k)
                } else {
                    x.get(k)
                }
            })
            .unwrap();
            let direct = q.energy(&flipped).unwrap() - q.energy(&x).unwrap();
            let delta = single_flip_delta(&q, &x, i).unwrap();
            assert!((delta - direct).abs() <= 1e-12, "n={n} i={i}");
        }
    }

    #[test]
    fn flip_delta_validates_inputs() {
        let q = QuboMatrix::zeros(3).unwrap();
        assert!(single_flip_delta(&q, &bv(&[1, 0]), 0).is_err());
        assert!(single_flip_delta(&q, &bv(&[1, 0, 1]), 3).is_err());
    }

    #[test]
    fn exhaustive_finds_known_minimum() {
        // E(0,1) = E(1,0) = -1 tie; lexicographically smaller state wins
        let q = QuboMatrix::from_dense(ndarray::arr2(&[[-1.0, 1.0], [1.0, -1.0]])).unwrap();
        let sol = solve_exhaustive(&q).unwrap();
        assert_eq!(sol.state, bv(&[0, 1]));
        assert_eq!(sol.energy, -1.0);
    }

    #[test]
    fn exhaustive_on_zero_matrix_returns_all_zeros() {
        let q = QuboMatrix::zeros(5).unwrap();
        let sol = solve_exhaustive(&q).unwrap();
        assert_eq!(sol.state, BitVector::zeros(5));
        assert_eq!(sol.energy, 0.0);
    }

    #[test]
    fn exhaustive_matches_brute_force_oracle() {
        // oracle: integer-order enumeration with BitVector energies
        for seed in 0..20 {
            let n = 6;
            let q = random_qubo(n, 2.0, 1000 + seed);
            let mut best: Option<(f64, BitVector)> = None;
            for s in 0u64..(1 << n) {
                let x = BitVector::from_fn(n, |i| ((s >> i) & 1) as u8).unwrap();
                let e = q.energy(&x).unwrap();
                let better = match &best {
                    None => true,
                    Some((be, bx)) => e < *be || (e == *be && x < *bx),
                };
                if better {
                    best = Some((e, x));
                }
            }
            let (be, bx) = best.unwrap();
            let sol = solve_exhaustive(&q).unwrap();
            assert_eq!(sol.energy, be, "seed {seed}");
            assert_eq!(sol.state, bx, "seed {seed}");
        }
    }

    #[test]
    fn exhaustive_rejects_oversized_problems() {
        let q = QuboMatrix::zeros(25).unwrap();
        assert!(matches!(
            solve_exhaustive(&q),
            Err(Error::SizeGuard { n: 25, max: 24, .. })
        ));
    }

    #[test]
    fn sa_zero_sweeps_returns_seeded_initial_state() {
        let q = random_qubo(8, 1.0, 4);
        let cfg = SaConfig {
            sweeps: 0,
            ..SaConfig::default()
        };
        let a = solve_sa(&q, &cfg, 9).unwrap();
        let b = solve_sa(&q, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.energy, q.energy(&a.state).unwrap());
    }

    #[test]
    fn sa_is_deterministic_and_seed_sensitive() {
        let q = random_qubo(12, 1.0, 8);
        let cfg = SaConfig {
            sweeps: 50,
            ..SaConfig::default()
        };
        assert_eq!(solve_sa(&q, &cfg, 1).unwrap(), solve_sa(&q, &cfg, 1).unwrap());
        // different seeds explore differently; states may still coincide on
        // easy instances, so compare trajectories via a harder check: the
        // recomputed energy always matches the returned state
        let sol = solve_sa(&q, &cfg, 2).unwrap();
        assert_eq!(sol.energy, q.energy(&sol.state).unwrap());
    }

    #[test]
    fn sa_at_huge_beta_is_greedy_descent() {
        let cfg = SaConfig {
            sweeps: 30,
            beta_start: 1e6,
            beta_end: 1e6,
            restarts: 0,
        };
        let init_cfg = SaConfig {
            sweeps: 0,
            ..SaConfig::default()
        };
        for seed in 0..10 {
            let q = random_qubo(10, 1.5, 300 + seed);
            let start = solve_sa(&q, &init_cfg, seed).unwrap();
            let end = solve_sa(&q, &cfg, seed).unwrap();
            assert!(end.energy <= start.energy, "seed {seed} went uphill");
        }
    }

    #[test]
    fn sa_usually_matches_exhaustive_on_small_instances() {
        let cfg = SaConfig::default();
        let mut hits = 0;
        for seed in 0..20 {
            let q = random_qubo(10, 1.0, 40 + seed);
            let exact = solve_exhaustive(&q).unwrap();
            let sa = solve_sa(&q, &cfg, seed).unwrap();
            assert!(sa.energy >= exact.energy - 1e-9);
            if (sa.energy - exact.energy).abs() <= 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 18, "SA matched exhaustive on only {hits}/20");
    }

    #[test]
    fn sa_rejects_bad_schedules() {
        let q = QuboMatrix::zeros(2).unwrap();
        let bad = SaConfig {
            beta_start: 0.0,
            ..SaConfig::default()
        };
        assert!(solve_sa(&q, &bad, 0).is_err());
        let bad = SaConfig {
            beta_end: 0.05,
            ..SaConfig::default()
        };
        assert!(solve_sa(&q, &bad, 0).is_err());
    }

    mod remote {
        use super::*;
        use std::io::{BufRead, BufReader, Write};
        use std::net::TcpListener;

        /// One-shot loopback server answering with a canned closure.
        fn fixture_server(
            reply: impl FnOnce(String) -> String + Send + 'static,
        ) -> (String, std::thread::JoinHandle<()>) {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let addr = listener.local_addr().unwrap().to_string();
            let handle = std::thread::spawn(move || {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let mut out = reply(line);
                out.push('\n');
                let mut stream = stream;
                stream.write_all(out.as_bytes()).unwrap();
            });
            (addr, handle)
        }

        fn cfg(addr: String) -> RemoteConfig {
            RemoteConfig {
                addr,
                num_reads: 3,
                timeout_ms: 5_000,
            }
        }

        #[test]
        fn request_roundtrips_and_best_sample_wins() {
            let (addr, handle) = fixture_server(|line| {
                let req: WireRequest = serde_json::from_str(line.trim()).unwrap();
                assert_eq!(req.version, WIRE_VERSION);
                assert_eq!(req.n, 2);
                assert_eq!(req.num_reads, 3);
                // server reconstructs the matrix from the triples and solves
                let q = QuboMatrix::from_upper_triangular(req.n, &req.entries).unwrap();
                let exact = solve_exhaustive(&q).unwrap();
                let junk = vec![1, 1];
                serde_json::to_string(&WireResponse {
                    version: WIRE_VERSION,
                    samples: vec![junk, exact.state.as_slice().to_vec()],
                    // deliberately wrong energies: the client must recompute
                    energies: vec![-99.0, 99.0],
                    error: None,
                })
                .unwrap()
            });
            let q =
                QuboMatrix::from_dense(ndarray::arr2(&[[-1.0, 1.0], [1.0, 2.0]])).unwrap();
            let sol = solve_remote(&q, &cfg(addr), 5).unwrap();
            handle.join().unwrap();
            assert_eq!(sol.state, bv(&[1, 0]));
            assert_eq!(sol.energy, -1.0);
        }

        #[test]
        fn malformed_response_is_a_protocol_error() {
            let (addr, handle) = fixture_server(|_| "this is not json".to_string());
            let q = QuboMatrix::zeros(2).unwrap();
            let err = solve_remote(&q, &cfg(addr), 0).unwrap_err();
            handle.join().unwrap();
            assert!(matches!(err, Error::Protocol(_)), "got {err:?}");
        }

        #[test]
        fn wrong_sample_length_is_a_dimension_error() {
            let (addr, handle) = fixture_server(|_| {
                serde_json::to_string(&WireResponse {
                    version: WIRE_VERSION,
                    samples: vec![vec![0, 1, 1]],
                    energies: vec![0.0],
                    error: None,
                })
                .unwrap()
            });
            let q = QuboMatrix::zeros(2).unwrap();
            let err = solve_remote(&q, &cfg(addr), 0).unwrap_err();
            handle.join().unwrap();
            assert!(
                matches!(err, Error::LengthMismatch { expected: 2, got: 3 }),
                "got {err:?}"
            );
        }

        #[test]
        fn server_error_and_version_mismatch_are_surfaced() {
            let (addr, handle) = fixture_server(|_| {
                r#"{"version":1,"error":"anneal hardware offline"}"#.to_string()
            });
            let q = QuboMatrix::zeros(2).unwrap();
            let err = solve_remote(&q, &cfg(addr), 0).unwrap_err();
            handle.join().unwrap();
            assert!(matches!(err, Error::Protocol(ref m) if m.contains("offline")));

            let (addr, handle) = fixture_server(|_| {
                r#"{"version":2,"samples":[[0,0]],"energies":[0.0]}"#.to_string()
            });
            let err = solve_remote(&q, &cfg(addr), 0).unwrap_err();
            handle.join().unwrap();
            assert!(matches!(err, Error::Protocol(ref m) if m.contains("version")));
        }

        #[test]
        fn unreachable_server_is_an_io_error() {
            // a port we just bound and dropped: nothing is listening
            let addr = {
                let l = TcpListener::bind("127.0.0.1:0").unwrap();
                l.local_addr().unwrap().to_string()
            };
            let q = QuboMatrix::zeros(2).unwrap();
            assert!(matches!(
                solve_remote(&q, &cfg(addr), 0),
                Err(Error::Io(_))
            ));
        }
    }
}
