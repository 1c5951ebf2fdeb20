//! Exact `2^N` matrices and state vectors: the brute-force backend that every
//! sparse routine is checked against.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::OperatorSum;
use crate::pauli::{PauliString, SupportInterval};

pub const DEFAULT_DENSE_LIMIT: usize = 14;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn check_limit(n_sites: usize, limit: usize) -> Result<()> {
    if n_sites > limit {
        Err(Error::DenseLimit { n_sites, limit })
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DenseOperator {
    n_sites: usize,
    mat: Mat<C64>,
}

impl DenseOperator {
    pub fn zeros(n_sites: usize) -> Self {
        let d = 1usize << n_sites;
        DenseOperator {
            n_sites,
            mat: Mat::zeros(d, d),
        }
    }

    pub fn identity(n_sites: usize) -> Self {
        let d = 1usize << n_sites;
        DenseOperator {
            n_sites,
            mat: Mat::identity(d, d),
        }
    }

    pub fn from_mat(mat: Mat<C64>) -> Result<Self> {
        let d = mat.nrows();
        if d != mat.ncols() || !d.is_power_of_two() {
            return Err(Error::param(
                "matrix",
                format!("{}x{} is not a square power-of-two matrix", d, mat.ncols()),
            ));
        }
        Ok(DenseOperator {
            n_sites: d.trailing_zeros() as usize,
            mat,
        })
    }

    pub fn from_fn(n_sites: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        let d = 1usize << n_sites;
        DenseOperator {
            n_sites,
            mat: Mat::from_fn(d, d, f),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    fn check(&self, other: &DenseOperator) -> Result<()> {
        if self.n_sites != other.n_sites {
            Err(Error::MismatchedSites {
                left: self.n_sites,
                right: other.n_sites,
            })
        } else {
            Ok(())
        }
    }

    pub fn matmul(&self, other: &DenseOperator) -> Result<Self> {
        self.check(other)?;
        Ok(DenseOperator {
            n_sites: self.n_sites,
            mat: &self.mat * &other.mat,
        })
    }

    pub fn add(&self, other: &DenseOperator) -> Result<Self> {
        self.check(other)?;
        Ok(DenseOperator {
            n_sites: self.n_sites,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &DenseOperator) -> Result<Self> {
        self.check(other)?;
        Ok(DenseOperator {
            n_sites: self.n_sites,
            mat: &self.mat - &other.mat,
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        DenseOperator {
            n_sites: self.n_sites,
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| s * self.mat[(i, j)]),
        }
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator {
            n_sites: self.n_sites,
            mat: self.mat.adjoint().to_owned(),
        }
    }

    pub fn commutator(&self, other: &DenseOperator) -> Result<Self> {
        self.check(other)?;
        Ok(DenseOperator {
            n_sites: self.n_sites,
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        })
    }

    /// `u · x · u†`.
    pub fn conjugate(u: &DenseOperator, x: &DenseOperator) -> Result<Self> {
        u.check(x)?;
        Ok(DenseOperator {
            n_sites: x.n_sites,
            mat: &u.mat * &x.mat * u.mat.adjoint(),
        })
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm_l2()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.norm_max()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).norm_max()
    }

    /// Frobenius norm of `U†U − 1`, an upper bound on the operator-norm defect.
    pub fn unitarity_defect(&self) -> f64 {
        let d = self.dim();
        let g = self.mat.adjoint() * &self.mat - Mat::<C64>::identity(d, d);
        g.norm_l2()
    }

    /// Sum of squared moduli of off-diagonal entries, rooted.
    pub fn off_diagonal_frobenius(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for j in 0..d {
            for i in 0..d {
                if i != j {
                    acc += self.mat[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.mat[(i, i)]).collect()
    }

    /// True when every imaginary part is below `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|j| (0..d).all(|i| self.mat[(i, j)].im.abs() <= tol))
    }

    /// Eigen-decomposition of a Hermitian matrix; eigenvalues ascend.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, Mat<C64>)> {
        let e = self
            .mat
            .self_adjoint_eigen(Side::Lower)
            .map_err(|err| Error::Linalg(format!("{err:?}")))?;
        let s = e.S();
        let vals = (0..self.dim()).map(|i| s[i].re).collect();
        Ok((vals, e.U().to_owned()))
    }

    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let vals = self
            .mat
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|err| Error::Linalg(format!("{err:?}")))?;
        Ok(vals)
    }

    /// Eigen-decomposition of the real part, for operators known to be real
    /// symmetric (three times faster than the complex solver).
    pub fn real_symmetric_eigen(&self) -> Result<(Vec<f64>, Mat<f64>)> {
        let d = self.dim();
        let re = Mat::<f64>::from_fn(d, d, |i, j| self.mat[(i, j)].re);
        let e = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|err| Error::Linalg(format!("{err:?}")))?;
        let s = e.S();
        Ok(((0..d).map(|i| s[i]).collect(), e.U().to_owned()))
    }

    /// `e^A` for anti-Hermitian `A`, through the Hermitian eigenproblem of `iA`.
    pub fn expm_anti_hermitian(&self) -> Result<Self> {
        let scale = self.max_abs().max(1.0);
        let defect = (&self.mat + self.mat.adjoint()).norm_max();
        if defect > 1e-10 * scale {
            return Err(Error::NotAntiHermitian { deviation: defect });
        }
        let ia = self.scale(C64::new(0.0, 1.0));
        let (vals, v) = ia.hermitian_eigen()?;
        // A = -i V Λ V†  ⇒  e^A = V e^{-iΛ} V†
        Ok(DenseOperator {
            n_sites: self.n_sites,
            mat: eigen_function(&v, &vals, |l| C64::new(0.0, -l).exp()),
        })
    }

    /// `e^{-iHt}` for Hermitian `H`.
    pub fn expm_hermitian(&self, t: f64) -> Result<Self> {
        let (vals, v) = self.hermitian_eigen()?;
        Ok(DenseOperator {
            n_sites: self.n_sites,
            mat: eigen_function(&v, &vals, |l| C64::new(0.0, -l * t).exp()),
        })
    }

    /// Apply a block on the contiguous sites `lo..lo + k` (`block` is `2^k` square).
    pub fn embed_block(block: MatRef<'_, C64>, lo: usize, n_sites: usize) -> Result<Self> {
        let k = block.nrows().trailing_zeros() as usize;
        if lo + k > n_sites {
            return Err(Error::param("block", format!("sites {lo}..{} exceed the chain", lo + k)));
        }
        let d = 1usize << n_sites;
        let local = (1usize << k) - 1;
        let mut mat = Mat::<C64>::zeros(d, d);
        for b in 0..d {
            let l = (b >> lo) & local;
            let rest = b & !(local << lo);
            for lp in 0..=local {
                let v = block[(lp, l)];
                if v != ZERO {
                    mat[(rest | (lp << lo), b)] = v;
                }
            }
        }
        Ok(DenseOperator { n_sites, mat })
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> Result<f64> {
        op_norm(self)
    }
}

/// Normalized partial trace onto the interval `r`: a `2^|r|` square matrix
/// holding exactly the Pauli terms of `m` supported inside `r`.
pub fn restrict_to(m: MatRef<'_, C64>, r: SupportInterval) -> Mat<C64> {
    let d = m.nrows();
    let w = r.len();
    let local = 1usize << w;
    let mask = (local - 1) << r.lo;
    let outside = d / local;
    let mut out = Mat::<C64>::zeros(local, local);
    for rest in 0..d {
        if rest & mask != 0 {
            continue;
        }
        for a in 0..local {
            for b in 0..local {
                out[(a, b)] += m[(rest | (a << r.lo), rest | (b << r.lo))];
            }
        }
    }
    let inv = 1.0 / outside as f64;
    Mat::from_fn(local, local, |i, j| out[(i, j)] * inv)
}

/// Dense `2^|support|` block of an operator whose terms lie inside `support`.
pub fn local_block(op: &OperatorSum, support: SupportInterval) -> Result<Mat<C64>> {
    let w = support.len();
    let window = support.mask();
    let local = 1usize << w;
    let mut out = Mat::<C64>::zeros(local, local);
    for (p, c) in op.terms() {
        if (p.x_mask() | p.z_mask()) & !window != 0 {
            return Err(Error::param(
                "support",
                format!("term {p} reaches outside {}..={}", support.lo, support.hi),
            ));
        }
        let shifted = PauliString::new(w, p.x_mask() >> support.lo, p.z_mask() >> support.lo)?;
        for b in 0..local as u64 {
            let (ph, bp) = shifted.apply_to_basis(b);
            out[(bp as usize, b as usize)] += c * ph;
        }
    }
    Ok(out)
}

/// Pauli expansion of a `2^|support|` block placed on `support` of an
/// `n_sites` chain.
pub fn block_to_operator(block: MatRef<'_, C64>, support: SupportInterval, n_sites: usize, drop_tolerance: f64) -> Result<OperatorSum> {
    let local = from_dense(&DenseOperator::from_mat(block.to_owned())?, drop_tolerance)?;
    local.embed(n_sites, support.lo)
}

pub(crate) fn eigen_function(v: &Mat<C64>, vals: &[f64], f: impl Fn(f64) -> C64) -> Mat<C64> {
    let d = vals.len();
    let fv: Vec<C64> = vals.iter().map(|&l| f(l)).collect();
    let scaled = Mat::from_fn(d, d, |i, j| v[(i, j)] * fv[j]);
    &scaled * v.adjoint()
}

/// Largest singular value; uses the Hermitian eigensolver when the input is
/// Hermitian.
pub fn op_norm(d: &DenseOperator) -> Result<f64> {
    let scale = d.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    if d.hermiticity_defect() <= 1e-13 * scale {
        let vals = d.hermitian_eigenvalues()?;
        return Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let sv = d
        .mat
        .singular_values()
        .map_err(|err| Error::Linalg(format!("{err:?}")))?;
    Ok(sv.into_iter().fold(0.0f64, f64::max))
}

pub fn to_dense(x: &OperatorSum) -> Result<DenseOperator> {
    to_dense_with_limit(x, DEFAULT_DENSE_LIMIT)
}

pub fn to_dense_with_limit(x: &OperatorSum, limit: usize) -> Result<DenseOperator> {
    check_limit(x.n_sites(), limit)?;
    let mut out = DenseOperator::zeros(x.n_sites());
    let d = out.dim() as u64;
    for (p, c) in x.terms() {
        for b in 0..d {
            let (ph, bp) = p.apply_to_basis(b);
            out.mat[(bp as usize, b as usize)] += c * ph;
        }
    }
    Ok(out)
}

/// Pauli expansion of a dense matrix, exact up to rounding. Coefficients with
/// magnitude below `drop_tolerance` are discarded.
pub fn from_dense(d: &DenseOperator, drop_tolerance: f64) -> Result<OperatorSum> {
    let n = d.n_sites;
    let dim = d.dim();
    let mut out = OperatorSum::zero(n)?.with_drop_tolerance(drop_tolerance);
    let mut buf = vec![ZERO; dim];
    let inv = 1.0 / dim as f64;
    for f in 0..dim {
        for (b, v) in buf.iter_mut().enumerate() {
            *v = d.mat[(b ^ f, b)];
        }
        walsh_hadamard(&mut buf);
        for (z, &g) in buf.iter().enumerate() {
            if g.norm() * inv < drop_tolerance {
                continue;
            }
            // W(f, z)|b⟩ = i^{|f∧z|} (−1)^{z·b} |b⊕f⟩
            let e = (f & z).count_ones() % 4;
            let unphase = crate::pauli::Phase::from_exponent(4 - e).to_complex();
            out.accumulate_raw(f as u64, z as u64, g * unphase * inv);
        }
    }
    out.prune();
    Ok(out)
}

/// In-place unnormalized Walsh–Hadamard transform, `g_z = Σ_b (−1)^{z·b} v_b`.
pub fn walsh_hadamard<T>(v: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let n = v.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_sites: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn basis(n_sites: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_sites];
        amps[index] = ONE;
        StateVector { n_sites, amps }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::param("amplitudes", "length is not a power of two"));
        }
        Ok(StateVector {
            n_sites: amps.len().trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::param("state", "zero vector"));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(self)
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn apply(&self, op: &DenseOperator) -> Result<Self> {
        if op.n_sites != self.n_sites {
            return Err(Error::MismatchedSites {
                left: op.n_sites,
                right: self.n_sites,
            });
        }
        let d = self.amps.len();
        let mut out = vec![ZERO; d];
        for (j, &a) in self.amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += op.mat[(i, j)] * a;
            }
        }
        Ok(StateVector {
            n_sites: self.n_sites,
            amps: out,
        })
    }

    /// Apply a `2^k`-square block acting on sites `lo..lo + k`.
    pub fn apply_local(&self, block: MatRef<'_, C64>, lo: usize) -> Self {
        let mut out = self.clone();
        apply_local_in_place(&mut out.amps, block, lo);
        out
    }

    pub fn apply_word(&self, p: &PauliString) -> Self {
        let mut out = vec![ZERO; self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let (ph, bp) = p.apply_to_basis(b as u64);
            out[bp as usize] += ph * a;
        }
        StateVector {
            n_sites: self.n_sites,
            amps: out,
        }
    }
}

/// `v ← (1 ⊗ block ⊗ 1) v` for a block on sites `lo..lo + k`.
pub fn apply_local_in_place(v: &mut [C64], block: MatRef<'_, C64>, lo: usize) {
    let k = block.nrows().trailing_zeros() as usize;
    let local = 1usize << k;
    let mask = (local - 1) << lo;
    let mut gathered = vec![ZERO; local];
    for rest in 0..v.len() {
        if rest & mask != 0 {
            continue;
        }
        for (l, g) in gathered.iter_mut().enumerate() {
            *g = v[rest | (l << lo)];
        }
        for lp in 0..local {
            let mut acc = ZERO;
            for (l, &g) in gathered.iter().enumerate() {
                acc += block[(lp, l)] * g;
            }
            v[rest | (lp << lo)] = acc;
        }
    }
}
