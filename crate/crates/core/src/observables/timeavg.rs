//! Infinite and finite time averages `X′ = ⟨e^{iHt} X e^{−iHt}⟩` and the
//! patch commutator residuals they leave.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dense::{self, from_dense, to_dense_with_limit, DenseOperator};
use crate::error::{Error, Result};
use crate::observables::spectrum::Spectrum;
use crate::operator::OperatorSum;
use crate::pauli::SupportInterval;

/// Energies closer than this are one degenerate block.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Drop tolerance for Pauli expansions of averaged operators.
const EXPANSION_DROP: f64 = 1e-15;

/// Eigenbasis projection onto the blocks of (near-)equal energy.
pub fn infinite_average_dense(spec: &Spectrum, x: MatRef<'_, C64>) -> Mat<C64> {
    let e = &spec.energies;
    let mut block = vec![0usize; e.len()];
    for i in 1..e.len() {
        block[i] = block[i - 1] + usize::from(e[i] - e[i - 1] > DEGENERACY_GAP);
    }
    let mut y = spec.matrix_in_eigenbasis(x);
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            if block[i] != block[j] {
                y[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    spec.matrix_from_eigenbasis(y.as_ref())
}

/// `(e^{iΔT} − 1)/(iΔT)`, written as `e^{iΔT/2} sinc(ΔT/2)`.
fn average_factor(delta: f64, t: f64) -> C64 {
    let y = 0.5 * delta * t;
    let sinc = if y.abs() < 1e-8 { 1.0 - y * y / 6.0 } else { y.sin() / y };
    C64::from_polar(sinc, y)
}

/// `(1/T) ∫_0^T e^{iHt} X e^{−iHt} dt`.
pub fn finite_average_dense(spec: &Spectrum, x: MatRef<'_, C64>, t: f64) -> Result<Mat<C64>> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param("T", "must be positive and finite"));
    }
    let e = &spec.energies;
    let mut y = spec.matrix_in_eigenbasis(x);
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] *= average_factor(e[i] - e[j], t);
        }
    }
    Ok(spec.matrix_from_eigenbasis(y.as_ref()))
}

pub fn time_average_infinite(x: &OperatorSum, h: &OperatorSum, dense_limit: usize) -> Result<OperatorSum> {
    let spec = Spectrum::new(h, dense_limit)?;
    let xd = to_dense_with_limit(x, dense_limit)?;
    from_dense(&DenseOperator::from_mat(infinite_average_dense(&spec, xd.mat()))?, EXPANSION_DROP)
}

pub fn time_average_finite(x: &OperatorSum, h: &OperatorSum, t: f64, dense_limit: usize) -> Result<OperatorSum> {
    let spec = Spectrum::new(h, dense_limit)?;
    let xd = to_dense_with_limit(x, dense_limit)?;
    from_dense(&DenseOperator::from_mat(finite_average_dense(&spec, xd.mat(), t)?)?, EXPANSION_DROP)
}

/// `‖[a, b]‖` for dense matrices.
pub fn commutator_norm(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Result<f64> {
    dense::op_norm(&DenseOperator::from_mat(a * b - b * a)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchReport {
    pub patch: usize,
    pub sites: SupportInterval,
    /// `‖H_a‖`.
    pub h_norm: f64,
    /// `‖[H_a′, H]‖`.
    pub residual: f64,
    /// `2‖H_a‖/T`.
    pub bound: f64,
    /// `‖H̃_a′ − H_a′‖` with `H̃_a′` averaged under the collar Hamiltonian.
    pub delta_norm: Option<f64>,
}

/// Tile the chain into patches of `size` sites and split `h` accordingly;
/// each term goes to the patch holding its leftmost site.
pub fn split_into_patches(h: &OperatorSum, size: usize) -> Result<Vec<(SupportInterval, OperatorSum)>> {
    let n = h.n_sites();
    if size == 0 {
        return Err(Error::param("patch size", "must be positive"));
    }
    let mut patches: Vec<(SupportInterval, OperatorSum)> = (0..n.div_ceil(size))
        .map(|a| Ok((SupportInterval::new(a * size, ((a + 1) * size).min(n) - 1), OperatorSum::zero(n)?)))
        .collect::<Result<_>>()?;
    for (p, c) in h.terms() {
        let lo = p.support().map_or(0, |s| s.lo);
        patches[lo / size].1.add_term(p, c)?;
    }
    Ok(patches)
}

/// Terms of `h` supported inside `window`.
pub fn collar_hamiltonian(h: &OperatorSum, window: SupportInterval) -> Result<OperatorSum> {
    Ok(h.filter(|p| p.support().is_none_or(|s| window.contains(&s))))
}

/// Finite-`T` averages of every patch of `h`, their commutators with `h`
/// against `2‖H_a‖/T`, and optionally the error of averaging each patch
/// under the Hamiltonian restricted to the patch widened by `collar`.
pub fn patch_commutators(h: &OperatorSum, size: usize, t: f64, collar: Option<usize>, dense_limit: usize) -> Result<Vec<PatchReport>> {
    let n = h.n_sites();
    let spec = Spectrum::new(h, dense_limit)?;
    let hd = to_dense_with_limit(h, dense_limit)?;
    let mut out = Vec::new();
    for (a, (sites, ha)) in split_into_patches(h, size)?.into_iter().enumerate() {
        let had = to_dense_with_limit(&ha, dense_limit)?;
        let h_norm = dense::op_norm(&had)?;
        let avg = finite_average_dense(&spec, had.mat(), t)?;
        let residual = commutator_norm(avg.as_ref(), hd.mat())?;
        let delta_norm = match collar {
            Some(c) => {
                let local = collar_hamiltonian(h, sites.widen(c, n))?;
                let local_spec = Spectrum::new(&local, dense_limit)?;
                let approx = finite_average_dense(&local_spec, had.mat(), t)?;
                Some(dense::op_norm(&DenseOperator::from_mat(approx - &avg)?)?)
            }
            None => None,
        };
        out.push(PatchReport {
            patch: a,
            sites,
            h_norm,
            residual,
            bound: 2.0 * h_norm / t,
            delta_norm,
        });
    }
    Ok(out)
}
