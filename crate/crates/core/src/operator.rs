//! Dense square operators on small Hilbert spaces.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A dense `dim × dim` complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<Complex64>,
}

impl Operator {
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// The discrete Fourier transform `F|t⟩ = d^{-1/2} Σ_α e^{2πiαt/d} |α⟩`.
    pub fn fourier(d: usize) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        Self::from_fn(d, |alpha, t| Complex64::from_polar(scale, 2.0 * PI * ((alpha * t) % d) as f64 / d as f64))
    }

    /// `F†`, mapping the Fourier basis back onto the computational basis.
    pub fn inverse_fourier(d: usize) -> Self {
        Self::fourier(d).adjoint()
    }

    /// Permutation `|a⟩|b⟩ ↦ |a⟩|b ⊕ a⟩` on a `system_dim · target_dim` space,
    /// with the addition taken modulo `target_dim`.
    pub fn controlled_shift(system_dim: usize, target_dim: usize) -> Self {
        let dim = system_dim * target_dim;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::from_fn(dim, |row, col| {
            let (a, b) = (col / target_dim, col % target_dim);
            if row == a * target_dim + (a + b) % target_dim {
                one
            } else {
                zero
            }
        })
    }

    /// Haar-distributed unitary: Gram–Schmidt on the columns of a complex
    /// Gaussian matrix.
    pub fn haar_random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let mut columns: Vec<Vec<Complex64>> = (0..dim)
                .map(|_| {
                    (0..dim)
                        .map(|_| {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            Complex64::new(re, im)
                        })
                        .collect()
                })
                .collect();
            if orthonormalize(&mut columns) {
                return Self::from_fn(dim, |r, c| columns[c][r]);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn kron(&self, other: &Operator) -> Self {
        let dim = self.dim * other.dim;
        Self::from_fn(dim, |r, c| self.get(r / other.dim, c / other.dim) * other.get(r % other.dim, c % other.dim))
    }

    pub fn matmul(&self, other: &Operator) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("cannot multiply {0}x{0} by {1}x{1}", self.dim, other.dim)));
        }
        Ok(Self::from_fn(self.dim, |r, c| (0..self.dim).map(|k| self.get(r, k) * other.get(k, c)).sum()))
    }

    /// Largest entry-wise deviation of `U†U` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let dot: Complex64 = (0..self.dim).map(|k| self.get(k, r).conj() * self.get(k, c)).sum();
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((dot - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data.chunks_exact(self.dim).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Modified Gram–Schmidt in place. Returns false on (numerical) rank loss.
fn orthonormalize(columns: &mut [Vec<Complex64>]) -> bool {
    for i in 0..columns.len() {
        for j in 0..i {
            let (done, rest) = columns.split_at_mut(i);
            let proj: Complex64 = done[j].iter().zip(rest[0].iter()).map(|(q, x)| q.conj() * x).sum();
            for (x, q) in rest[0].iter_mut().zip(done[j].iter()) {
                *x -= proj * q;
            }
        }
        let norm = columns[i].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return false;
        }
        for x in columns[i].iter_mut() {
            *x /= norm;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn fourier_is_unitary_and_inverts() {
        for d in 2..=16 {
            let f = Operator::fourier(d);
            assert!(f.is_unitary(1e-12), "d={d}");
            let prod = f.matmul(&Operator::inverse_fourier(d)).unwrap();
            assert!(prod.matmul(&Operator::identity(d)).unwrap().unitarity_defect() < 1e-12);
            for r in 0..d {
                for c in 0..d {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert!((prod.get(r, c) - Complex64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn controlled_shift_is_permutation() {
        let u = Operator::controlled_shift(3, 2);
        assert!(u.is_unitary(0.0));
        // |2⟩|1⟩ -> |2⟩|(1+2) mod 2⟩, a fixed point
        assert_eq!(u.get(5, 5), Complex64::new(1.0, 0.0));
        // |1⟩|0⟩ (index 2) -> |1⟩|1⟩ (index 3)
        assert_eq!(u.get(3, 2), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn haar_samples_are_unitary() {
        let mut rng = SeedStream::new(11).rng();
        for dim in [2, 4, 6, 9] {
            assert!(Operator::haar_random(dim, &mut rng).is_unitary(1e-10));
        }
    }

    #[test]
    fn kron_dimension_and_entries() {
        let k = Operator::identity(2).kron(&Operator::fourier(3));
        assert_eq!(k.dim(), 6);
        assert!(k.is_unitary(1e-12));
        assert_eq!(k.get(3, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(Operator::from_row_major(2, vec![Complex64::new(1.0, 0.0); 3]).is_err());
    }
}
