//! Collar-truncation differences `δ(c) = ‖U X U† − U_c X U_c†‖`.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::circuit::{apply_local_batch, Circuit, Direction, StraddlePolicy, TruncationRecord};
use crate::dense::{self, to_dense_with_limit, DenseOperator};
use crate::error::{Error, Result};
use crate::fit::{exponential_fit, ExponentialFit};
use crate::lanczos::{extreme_eigenvalues, LanczosOptions};
use crate::operator::OperatorSum;
use crate::pauli::{PauliString, SupportInterval};

#[derive(Clone, Copy, Debug)]
pub struct TailOptions {
    pub c_max: usize,
    pub direction: Direction,
    pub straddle: StraddlePolicy,
    /// Chains up to this length use dense conjugation and exact norms;
    /// longer ones use Lanczos on the difference map.
    pub dense_sites: usize,
    pub dense_limit: usize,
    /// Truncated conjugates on windows up to this many sites are built
    /// densely on the window in the matrix-free path.
    pub window_sites: usize,
    pub lanczos: LanczosOptions,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            c_max: 6,
            direction: Direction::PhysicalToLogical,
            straddle: StraddlePolicy::Drop,
            dense_sites: 10,
            dense_limit: dense::DEFAULT_DENSE_LIMIT,
            window_sites: 9,
            lanczos: LanczosOptions {
                max_iterations: 80,
                tolerance: 1e-4,
                abs_tolerance: 1e-14,
                ..LanczosOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TailProfile {
    pub base: SupportInterval,
    pub direction: Direction,
    /// `"dense"` or `"lanczos"`.
    pub method: &'static str,
    pub collars: Vec<usize>,
    pub delta: Vec<f64>,
    /// `2‖X‖₁ Σ ‖dropped generator‖`, a rigorous upper bound on `δ(c)` when
    /// no rotation was dropped; `2‖X‖₁` otherwise.
    pub upper: Vec<f64>,
    /// Ritz residual of the Lanczos estimate, zero for dense norms.
    pub residual: Vec<f64>,
    pub converged: Vec<bool>,
    /// True where `U_c` kept every generator and rotation, so `δ(c) = 0`.
    pub exact_zero: Vec<bool>,
    /// True where a rotation crossed the truncation window.
    pub straddling: Vec<bool>,
}

impl TailProfile {
    /// Exponential fit of `δ(c)` over the strictly positive entries.
    pub fn fit(&self) -> Result<ExponentialFit> {
        let x: Vec<f64> = self.collars.iter().map(|&c| c as f64).collect();
        if self.delta.iter().all(|&d| d == 0.0) {
            return Err(Error::DegenerateFit("all differences vanish".into()));
        }
        exponential_fit(&x, &self.delta)
    }
}

/// `X m` for a Pauli sum `X`, column by column.
pub fn apply_operator_batch(x: &OperatorSum, src: MatRef<'_, C64>) -> Mat<C64> {
    let mut dst = Mat::<C64>::zeros(src.nrows(), src.ncols());
    for (p, c) in x.terms() {
        for b in 0..src.nrows() {
            let (phase, b2) = p.apply_to_basis(b as u64);
            let f = c * phase;
            for j in 0..src.ncols() {
                dst[(b2 as usize, j)] += f * src[(b, j)];
            }
        }
    }
    dst
}

/// `V X V† m` with `V = U` for physical-to-logical and `V = U†` otherwise.
pub fn conjugated_apply(circuit: &Circuit, x: &OperatorSum, direction: Direction, m: Mat<C64>) -> Result<Mat<C64>> {
    let outer_adjoint = direction == Direction::LogicalToPhysical;
    let y = circuit.apply(m, !outer_adjoint)?;
    let y = apply_operator_batch(x, y.as_ref());
    circuit.apply(y, outer_adjoint)
}

/// `x` re-expressed on the sites of `w`, if it fits.
pub fn restrict_operator(x: &OperatorSum, w: SupportInterval) -> Result<Option<OperatorSum>> {
    let mut out = OperatorSum::zero(w.len())?;
    for (p, c) in x.terms() {
        if let Some(s) = p.support() {
            if !w.contains(&s) {
                return Ok(None);
            }
        }
        let mask = (1u64 << w.len()) - 1;
        out.add_term(PauliString::new(w.len(), (p.x_mask() >> w.lo) & mask, (p.z_mask() >> w.lo) & mask)?, c)?;
    }
    Ok(Some(out))
}

/// Identity of a truncated circuit: the kept generators and rotations.
fn signature(c: &Circuit) -> Vec<(u32, bool, usize, usize)> {
    c.steps
        .iter()
        .flat_map(|s| {
            s.terms
                .iter()
                .map(move |t| (s.k, false, t.support.lo, t.support.hi))
                .chain(s.rotations.iter().map(move |r| (s.k, true, r.interval.lo, r.interval.hi)))
        })
        .collect()
}

fn upper_bound(circuit: &Circuit, records: &[TruncationRecord], x_one_norm: f64) -> f64 {
    let trivial = 2.0 * x_one_norm;
    if records.iter().any(|r| r.kind == "rotation") {
        return trivial;
    }
    let dropped: f64 = circuit
        .steps
        .iter()
        .flat_map(|s| s.terms.iter().map(move |t| (s.k, t)))
        .filter(|(k, t)| {
            records
                .iter()
                .any(|r| r.k == *k && r.kind == "generator" && r.lo == t.support.lo && r.hi == t.support.hi)
        })
        .map(|(_, t)| t.norm)
        .sum();
    (2.0 * x_one_norm * dropped).min(trivial)
}

pub fn tail_profile(x: &OperatorSum, circuit: &Circuit, base: SupportInterval, opts: &TailOptions) -> Result<TailProfile> {
    let n = circuit.n_sites;
    if x.n_sites() != n {
        return Err(Error::MismatchedSites {
            left: x.n_sites(),
            right: n,
        });
    }
    if base.hi >= n {
        return Err(Error::param("base", "outside the chain"));
    }
    let collars: Vec<usize> = (0..=opts.c_max).collect();
    let truncated: Vec<_> = collars.iter().map(|&c| circuit.truncated(base, c, opts.straddle)).collect();
    let exact_zero: Vec<bool> = truncated.iter().map(|(_, rec)| rec.is_empty()).collect();
    let straddling: Vec<bool> = truncated
        .iter()
        .map(|(_, rec)| rec.iter().any(|r| r.action.ends_with("straddling")))
        .collect();
    let upper: Vec<f64> = truncated
        .iter()
        .map(|(_, rec)| upper_bound(circuit, rec, x.one_norm()))
        .collect();
    let dense_path = n <= opts.dense_sites;
    let mut delta = vec![0.0; collars.len()];
    let mut residual = vec![0.0; collars.len()];
    let mut converged = vec![true; collars.len()];

    let xd = if dense_path {
        Some(to_dense_with_limit(x, opts.dense_limit)?.into_mat())
    } else {
        if !x.is_hermitian(1e-12) {
            return Err(Error::param("x", "matrix-free tails need a Hermitian operator"));
        }
        if n > opts.dense_limit {
            return Err(Error::DenseLimit {
                n_sites: n,
                limit: opts.dense_limit,
            });
        }
        None
    };
    let full = match &xd {
        Some(m) => Some(circuit.conjugate_dense(m.as_ref(), opts.direction)?),
        None => None,
    };

    let mut seen: Vec<(Vec<(u32, bool, usize, usize)>, usize)> = Vec::new();
    for (i, (tc, _)) in truncated.iter().enumerate() {
        if exact_zero[i] {
            continue;
        }
        let sig = signature(tc);
        if let Some(&(_, j)) = seen.iter().find(|(s, _)| *s == sig) {
            delta[i] = delta[j];
            residual[i] = residual[j];
            converged[i] = converged[j];
            continue;
        }
        seen.push((sig, i));
        if let (Some(xd), Some(full)) = (&xd, &full) {
            let part = tc.conjugate_dense(xd.as_ref(), opts.direction)?;
            delta[i] = dense::op_norm(&DenseOperator::from_mat(full - &part)?)?;
        } else {
            let window = base.widen(collars[i], n);
            let local = window_conjugate(tc, x, window, opts)?;
            let dim = circuit.dim();
            let ex = extreme_eigenvalues(
                dim,
                |v, out| {
                    let m = Mat::from_fn(dim, 1, |r, _| v[r]);
                    let a = conjugated_apply(circuit, x, opts.direction, m.clone())?;
                    let b = match &local {
                        Some(block) => {
                            let mut b = Mat::<C64>::zeros(dim, 1);
                            apply_local_batch(block.as_ref(), window.lo, m.as_ref(), &mut b, C64::new(1.0, 0.0));
                            b
                        }
                        None => conjugated_apply(tc, x, opts.direction, m)?,
                    };
                    for r in 0..dim {
                        out[r] = a[(r, 0)] - b[(r, 0)];
                    }
                    Ok(())
                },
                opts.lanczos,
            )?;
            delta[i] = ex.abs_max();
            residual[i] = ex.residual;
            converged[i] = ex.converged;
        }
    }
    Ok(TailProfile {
        base,
        direction: opts.direction,
        method: if dense_path { "dense" } else { "lanczos" },
        collars,
        delta,
        upper,
        residual,
        converged,
        exact_zero,
        straddling,
    })
}

/// Dense `U_c X U_c†` on `window` when every kept element and `X` fit in it
/// and the window is small enough.
fn window_conjugate(tc: &Circuit, x: &OperatorSum, window: SupportInterval, opts: &TailOptions) -> Result<Option<Mat<C64>>> {
    if window.len() > opts.window_sites {
        return Ok(None);
    }
    let Some(local) = tc.restricted_to(window) else {
        return Ok(None);
    };
    let Some(xw) = restrict_operator(x, window)? else {
        return Ok(None);
    };
    let xm = to_dense_with_limit(&xw, opts.dense_limit)?.into_mat();
    Ok(Some(local.conjugate_dense(xm.as_ref(), opts.direction)?))
}

/// Right-hand side `24 · 2^{0.5 S(X)} · α^{c+1} · ‖X‖` of the collar bound.
pub fn collar_bound(alpha: f64, support: usize, c: usize, x_norm: f64) -> f64 {
    24.0 * 2f64.powf(0.5 * support as f64) * alpha.powi(c as i32 + 1) * x_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{sample_circuit, FamilyParams};

    fn sz(n: usize, i: usize) -> OperatorSum {
        OperatorSum::from_word(PauliString::sigma_z(n, i), C64::new(1.0, 0.0))
    }

    #[test]
    fn identity_circuit_has_no_tail() {
        let p = tail_profile(&sz(6, 2), &Circuit::identity(6), SupportInterval::site(2), &TailOptions::default()).unwrap();
        assert!(p.delta.iter().all(|&d| d == 0.0));
        assert!(p.fit().is_err());
    }

    #[test]
    fn lanczos_path_matches_dense() {
        let sc = sample_circuit(&FamilyParams::new(0.05, 1.0, 0.0, 2, 8, 3)).unwrap();
        let base = SupportInterval::site(4);
        let dense = tail_profile(&sz(8, 4), &sc.circuit, base, &TailOptions::default()).unwrap();
        let opts = TailOptions {
            dense_sites: 0,
            lanczos: LanczosOptions {
                max_iterations: 256,
                tolerance: 1e-10,
                abs_tolerance: 1e-14,
                ..LanczosOptions::default()
            },
            ..TailOptions::default()
        };
        let free = tail_profile(&sz(8, 4), &sc.circuit, base, &opts).unwrap();
        assert_eq!(free.method, "lanczos");
        for (a, b) in dense.delta.iter().zip(&free.delta) {
            assert!((a - b).abs() <= 1e-8 * a.max(1e-6), "{a} vs {b}");
        }
        for (d, u) in dense.delta.iter().zip(&dense.upper) {
            assert!(d <= u);
        }
    }
}
