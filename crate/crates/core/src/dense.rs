//! Small dense complex matrices, used as oracles for circuits.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::circuit::Circuit;
use crate::state::StateVector;
use crate::{Error, Result};

/// Default qubit cap for [`dense_unitary`].
pub const DENSE_QUBIT_CAP: usize = 12;

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let data = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        Matrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] = v;
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim, "matrix dimensions differ");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |(U^dagger U - I)_ij|.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.data[k * n + i].conj() * self.data[k * n + j];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// True when every off-diagonal entry is zero and every column has a single entry of
    /// modulus 1 (a permutation up to phases).
    pub fn is_permutation(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|c| {
            let mut ones = 0;
            for r in 0..n {
                let v = self.get(r, c).norm();
                if (v - 1.0).abs() <= tol {
                    ones += 1;
                } else if v > tol {
                    return false;
                }
            }
            ones == 1
        })
    }
}

/// F_kl = 2^{-n/2} exp(+2 pi i k l / 2^n), or its adjoint.
pub fn dft_matrix(n: usize, inverse: bool) -> Matrix {
    let dim = 1usize << n;
    let sign = if inverse { -1.0 } else { 1.0 };
    let norm = (dim as f64).sqrt().recip();
    Matrix::from_fn(dim, |k, l| {
        let kl = (k * l) % dim;
        Complex64::from_polar(norm, sign * TAU * kl as f64 / dim as f64)
    })
}

/// The circuit's unitary, column c being the ideal image of basis state c.
pub fn dense_unitary(circuit: &Circuit, cap: usize) -> Result<Matrix> {
    let m = circuit.width().max(1);
    if m > cap {
        return Err(Error::Resource {
            what: "dense unitary".into(),
            needed: 16u64 << (2 * m),
            cap: 16u64 << (2 * cap),
        });
    }
    let dim = 1usize << m;
    let mut out = Matrix::zeros(dim);
    for c in 0..dim {
        let mut s = StateVector::new_basis_state(m, c)?;
        circuit.apply_to(&mut s)?;
        for (r, a) in s.amplitudes().iter().enumerate() {
            out.data[r * dim + c] = *a;
        }
    }
    Ok(out)
}
