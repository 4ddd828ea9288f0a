//! Small dense symmetric matrices for the d×d momentum forms.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Dense symmetric `d×d` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0)
    }

    pub fn scalar(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds from row-major entries, symmetrizing and rejecting asymmetry
    /// beyond `1e-12` relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::domain("matrix must be square and non-empty"));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() {
                    return Err(Error::domain("matrix entries must be finite"));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(Error::domain("matrix must be symmetric"));
                }
                m.data[i * dim + j] = 0.5 * (a + b);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `p·M·p`.
    pub fn quad_form(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim);
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.data[i * d + j] * p[j];
            }
            s += p[i] * row;
        }
        s
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, other: &SymMatrix, c: f64) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// `self += c` on the diagonal.
    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += c;
        }
    }

    pub fn add_diagonal_entry(&mut self, i: usize, c: f64) {
        self.data[i * self.dim + i] += c;
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..d).all(|j| i == j || self.data[i * d + j] == 0.0))
    }

    /// Cholesky factor, or `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut diag = self.data[j * d + j];
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = libm::sqrt(diag);
            l[j * d + j] = ljj;
            for i in j + 1..d {
                let mut v = self.data[i * d + j];
                for k in 0..j {
                    v -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = v / ljj;
            }
        }
        Some(Cholesky { dim: d, l })
    }

    /// Smallest eigenvalue by cyclic Jacobi rotations.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim;
        if d == 1 {
            return self.data[0];
        }
        if self.is_diagonal() {
            return self.diag().into_iter().fold(f64::INFINITY, f64::min);
        }
        let mut a = self.data.clone();
        for _sweep in 0..64 {
            let off: f64 = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * d + j] * a[i * d + j])
                .sum();
            let scale: f64 = a.iter().map(|v| v * v).sum();
            if off <= 1e-30 * scale {
                break;
            }
            for p in 0..d {
                for q in p + 1..d {
                    let apq = a[p * d + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    for k in 0..d {
                        let akp = a[k * d + p];
                        let akq = a[k * d + q];
                        a[k * d + p] = c * akp - s * akq;
                        a[k * d + q] = s * akp + c * akq;
                    }
                    for k in 0..d {
                        let apk = a[p * d + k];
                        let aqk = a[q * d + k];
                        a[p * d + k] = c * apk - s * aqk;
                        a[q * d + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..d).map(|i| a[i * d + i]).fold(f64::INFINITY, f64::min)
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn det(&self) -> f64 {
        let d = self.dim;
        let p: f64 = (0..d).map(|i| self.l[i * d + i]).product();
        p * p
    }

    /// `x·M⁻¹·x`.
    pub fn inv_quad_form(&self, x: &[f64]) -> f64 {
        // Forward substitution L y = x; then x·M⁻¹·x = |y|².
        let d = self.dim;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[i * d + k] * y[k];
            }
            y[i] = v / self.l[i * d + i];
        }
        y.iter().map(|v| v * v).sum()
    }
}
