//! Symmetric QUBO cost matrices and their energy function.
//!
//! The cost of a binary assignment `x` is the full double sum
//! `sum_{i,j} Q[i][j] x_i x_j`, so every off-diagonal pair contributes twice.
//! All constructors produce an exactly symmetric matrix; inputs given in
//! upper-triangular "each pair once" form have their off-diagonal
//! coefficients halved so the energy is preserved.

use crate::error::{Error, Result};
use crate::bits::BitVector;
use ndarray::{Array2, ArrayView1, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    entries: Array2<f64>,
}

impl QuboMatrix {
    /// Wrap an already symmetric matrix. Rejects non-square, non-finite, or
    /// asymmetric (exact comparison) input.
    pub fn from_dense(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::invalid(format!("matrix is {r}x{c}, not square")));
        }
        if r == 0 {
            return Err(Error::invalid("QUBO matrix must have at least one row"));
        }
        for ((i, j), &v) in entries.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("entry ({i}, {j}) is not finite")));
            }
            if entries[[j, i]] != v {
                return Err(Error::invalid(format!(
                    "asymmetric entries at ({i}, {j}): {v} vs {}",
                    entries[[j, i]]
                )));
            }
        }
        Ok(QuboMatrix { entries })
    }

    /// Symmetrize an arbitrary square matrix as (A + A^T) / 2, which leaves
    /// the double-sum energy of every state unchanged.
    pub fn from_unsymmetric(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::invalid(format!("matrix is {r}x{c}, not square")));
        }
        let sym = (&a + &a.t()) / 2.0;
        QuboMatrix::from_dense(sym)
    }

    /// Build from coefficients in "each pair counted once" form: the energy of
    /// the result equals `sum_{i <= j} value_ij x_i x_j`. Off-diagonal values
    /// are halved into both symmetric slots. Entries with `i > j`, indices out
    /// of range, or duplicate positions are rejected.
    pub fn from_upper_triangular(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("QUBO matrix must have at least one row"));
        }
        let mut entries = Array2::zeros((n, n));
        let mut seen = std::collections::HashSet::new();
        for &(i, j, v) in triples {
            if i > j {
                return Err(Error::invalid(format!(
                    "lower-triangular entry ({i}, {j}) in upper-triangular input"
                )));
            }
            if j >= n {
                return Err(Error::invalid(format!("index ({i}, {j}) out of range for n={n}")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("entry ({i}, {j}) is not finite")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate entry at ({i}, {j})")));
            }
            if i == j {
                entries[[i, i]] = v;
            } else {
                entries[[i, j]] = v / 2.0;
                entries[[j, i]] = v / 2.0;
            }
        }
        Ok(QuboMatrix { entries })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("QUBO matrix must have at least one row"));
        }
        Ok(QuboMatrix {
            entries: Array2::zeros((n, n)),
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.entries.row(i)
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.entries.clone()
    }

    /// Upper-triangular coefficients in "each pair counted once" form:
    /// diagonal as stored, off-diagonal doubled. Zero coefficients are
    /// omitted. Inverse of [`QuboMatrix::from_upper_triangular`].
    pub fn to_upper_triangular(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = if i == j {
                    self.entries[[i, i]]
                } else {
                    2.0 * self.entries[[i, j]]
                };
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Full double-sum energy of `x`. Errors if `x.len() != n`.
    pub fn energy(&self, x: &BitVector) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let ones: Vec<usize> = (0..x.len()).filter(|&i| x.get(i) == 1).collect();
        let mut e = 0.0;
        for (k, &i) in ones.iter().enumerate() {
            e += self.entries[[i, i]];
            for &j in &ones[k + 1..] {
                e += 2.0 * self.entries[[i, j]];
            }
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn energy_of_zero_state_is_zero() {
        let q = QuboMatrix::from_dense(ndarray::arr2(&[[3.0, -1.5], [-1.5, 2.0]])).unwrap();
        assert_eq!(q.energy(&bv(&[0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn energy_counts_off_diagonals_twice() {
        let q = QuboMatrix::from_dense(ndarray::arr2(&[[1.0, -1.0], [-1.0, 3.0]])).unwrap();
        assert_eq!(q.energy(&bv(&[1, 1])).unwrap(), 2.0);
        assert_eq!(q.energy(&bv(&[1, 0])).unwrap(), 1.0);
        assert_eq!(q.energy(&bv(&[0, 1])).unwrap(), 3.0);
    }

    #[test]
    fn single_negative_diagonal() {
        let q = QuboMatrix::from_dense(ndarray::arr2(&[[-2.0]])).unwrap();
        assert_eq!(q.energy(&bv(&[1])).unwrap(), -2.0);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(QuboMatrix::from_dense(Array2::zeros((2, 3))).is_err());
        assert!(QuboMatrix::from_dense(Array2::zeros((0, 0))).is_err());
        assert!(QuboMatrix::from_dense(ndarray::arr2(&[[0.0, 1.0], [2.0, 0.0]])).is_err());
        assert!(QuboMatrix::from_dense(ndarray::arr2(&[[f64::NAN]])).is_err());
    }

    #[test]
    fn energy_rejects_length_mismatch() {
        let q = QuboMatrix::zeros(3).unwrap();
        assert!(q.energy(&bv(&[1, 0])).is_err());
    }

    #[test]
    fn upper_triangular_preserves_pair_once_energy() {
        // sum_{i<=j} c_ij x_i x_j with c = {(0,0): 1, (0,1): -2, (1,1): 3}
        let q = QuboMatrix::from_upper_triangular(2, &[(0, 0, 1.0), (0, 1, -2.0), (1, 1, 3.0)])
            .unwrap();
        assert_eq!(q.get(0, 1), -1.0);
        assert_eq!(q.get(1, 0), -1.0);
        assert_eq!(q.energy(&bv(&[1, 1])).unwrap(), 1.0 - 2.0 + 3.0);
    }

    #[test]
    fn upper_triangular_rejects_malformed_input() {
        assert!(QuboMatrix::from_upper_triangular(2, &[(1, 0, 1.0)]).is_err());
        assert!(QuboMatrix::from_upper_triangular(2, &[(0, 2, 1.0)]).is_err());
        assert!(QuboMatrix::from_upper_triangular(2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    }

    #[test]
    fn upper_triangular_roundtrip() {
        let q = QuboMatrix::from_unsymmetric(ndarray::arr2(&[
            [1.0, 4.0, 0.0],
            [-2.0, 0.5, 1.0],
            [0.0, 3.0, -1.0],
        ]))
        .unwrap();
        let back = QuboMatrix::from_upper_triangular(3, &q.to_upper_triangular()).unwrap();
        assert_eq!(back, q);
    }

    proptest! {
        #[test]
        fn symmetrization_preserves_double_sum_energy(
            n in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-3.0..3.0));
            let x = BitVector::from_fn(n, |_| rng.gen_range(0..=1)).unwrap();
            // oracle: literal double sum over the unsymmetrized matrix
            let mut direct = 0.0;
            for i in 0..n {
                for j in 0..n {
                    direct += a[[i, j]] * x.get(i) as f64 * x.get(j) as f64;
                }
            }
            let q = QuboMatrix::from_unsymmetric(a).unwrap();
            prop_assert!((q.energy(&x).unwrap() - direct).abs() <= 1e-12);
            prop_assert_eq!(q.energy(&BitVector::zeros(n)).unwrap(), 0.0);
        }

        #[test]
        fn constructed_matrices_are_symmetric(n in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-3.0..3.0));
            let q = QuboMatrix::from_unsymmetric(a).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(q.get(i, j), q.get(j, i));
                }
            }
        }
    }
}
