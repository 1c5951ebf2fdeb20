//! Exact eigen-decomposition of a chain Hamiltonian and basis changes of
//! vector blocks.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;

use crate::dense::to_dense_with_limit;
use crate::error::Result;
use crate::operator::OperatorSum;

#[derive(Clone, Debug)]
pub enum Eigenvectors {
    /// Real orthogonal eigenvectors of a real symmetric Hamiltonian.
    Real(Mat<f64>),
    Complex(Mat<C64>),
}

/// `H = V diag(E) V†` with ascending `E`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub n_sites: usize,
    pub energies: Vec<f64>,
    pub vectors: Eigenvectors,
}

fn real_times(r: MatRef<'_, f64>, x: &Mat<C64>) -> Mat<C64> {
    let (n, m) = (x.nrows(), x.ncols());
    let split = Mat::<f64>::from_fn(n, 2 * m, |i, j| if j < m { x[(i, j)].re } else { x[(i, j - m)].im });
    let p = r * &split;
    Mat::from_fn(p.nrows(), m, |i, j| C64::new(p[(i, j)], p[(i, j + m)]))
}

impl Spectrum {
    /// Diagonalize `h`, with the real solver when `h` is real.
    pub fn new(h: &OperatorSum, dense_limit: usize) -> Result<Self> {
        let d = to_dense_with_limit(h, dense_limit)?;
        let (energies, vectors) = if d.is_real(1e-14) {
            let (e, v) = d.real_symmetric_eigen()?;
            (e, Eigenvectors::Real(v))
        } else {
            let (e, v) = d.hermitian_eigen()?;
            (e, Eigenvectors::Complex(v))
        };
        Ok(Spectrum {
            n_sites: h.n_sites(),
            energies,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `V† x`.
    pub fn to_eigenbasis(&self, x: &Mat<C64>) -> Mat<C64> {
        match &self.vectors {
            Eigenvectors::Real(v) => real_times(v.transpose(), x),
            Eigenvectors::Complex(v) => v.adjoint() * x,
        }
    }

    /// `V y`.
    pub fn from_eigenbasis(&self, y: &Mat<C64>) -> Mat<C64> {
        match &self.vectors {
            Eigenvectors::Real(v) => real_times(v.as_ref(), y),
            Eigenvectors::Complex(v) => v * y,
        }
    }

    /// Eigenvector `k` as a complex column.
    pub fn vector(&self, k: usize) -> Vec<C64> {
        match &self.vectors {
            Eigenvectors::Real(v) => (0..self.dim()).map(|i| C64::new(v[(i, k)], 0.0)).collect(),
            Eigenvectors::Complex(v) => (0..self.dim()).map(|i| v[(i, k)]).collect(),
        }
    }

    /// `e^{-iHt}` applied to the columns of `x`, with column `j` evolved for
    /// time `times[j]`.
    pub fn evolve(&self, x: &Mat<C64>, times: &[f64]) -> Mat<C64> {
        let mut y = self.to_eigenbasis(x);
        for (j, &t) in times.iter().enumerate() {
            for (i, &e) in self.energies.iter().enumerate() {
                y[(i, j)] *= C64::new(0.0, -e * t).exp();
            }
        }
        self.from_eigenbasis(&y)
    }

    /// Dense `V† X V` for a dense `X`.
    pub fn matrix_in_eigenbasis(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        let xv = match &self.vectors {
            Eigenvectors::Real(v) => real_times_right(x, v.as_ref()),
            Eigenvectors::Complex(v) => x * v,
        };
        self.to_eigenbasis(&xv)
    }

    /// Dense `V Y V†` for a dense `Y`.
    pub fn matrix_from_eigenbasis(&self, y: MatRef<'_, C64>) -> Mat<C64> {
        let vy = self.from_eigenbasis(&y.to_owned());
        let back = self.from_eigenbasis(&vy.adjoint().to_owned());
        back.adjoint().to_owned()
    }
}

fn real_times_right(x: MatRef<'_, C64>, r: MatRef<'_, f64>) -> Mat<C64> {
    let xt = x.transpose().to_owned();
    real_times(r.transpose(), &xt).transpose().to_owned()
}
