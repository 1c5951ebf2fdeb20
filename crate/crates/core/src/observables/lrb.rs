//! Commutator lightcones `‖[A(t), B_d]‖` with `A(t) = e^{iHt} A e^{−iHt}`.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::lanczos::{extreme_eigenvalues_batch, LanczosOptions};
use crate::observables::spectrum::Spectrum;
use crate::observables::tails::apply_operator_batch;
use crate::operator::OperatorSum;

#[derive(Clone, Copy, Debug)]
pub struct LrbOptions {
    /// Front threshold relative to `‖A‖₁ ‖B‖₁`.
    pub threshold: f64,
    pub lanczos: LanczosOptions,
}

impl Default for LrbOptions {
    fn default() -> Self {
        LrbOptions {
            threshold: 0.1,
            lanczos: LanczosOptions {
                max_iterations: 30,
                tolerance: 1e-2,
                abs_tolerance: 1e-12,
                ..LanczosOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LightconeGrid {
    pub times: Vec<f64>,
    pub distances: Vec<usize>,
    /// `values[t][d]`.
    pub values: Vec<Vec<f64>>,
    pub scale: Vec<f64>,
    pub threshold: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrontFits {
    /// `x(t) = u ln t + w`.
    pub log: LinearFit,
    /// `x(t) = v t + w`.
    pub linear: LinearFit,
    /// Number of leading times used.
    pub points: usize,
}

impl LightconeGrid {
    /// Entrywise mean of grids over the same times and distances.
    pub fn average(grids: &[LightconeGrid]) -> Result<LightconeGrid> {
        let first = grids.first().ok_or_else(|| Error::param("grids", "nothing to average"))?;
        if grids.iter().any(|g| g.times != first.times || g.distances != first.distances) {
            return Err(Error::param("grids", "times or distances differ"));
        }
        let n = grids.len() as f64;
        let values = (0..first.times.len())
            .map(|t| {
                (0..first.distances.len())
                    .map(|d| grids.iter().map(|g| g.values[t][d]).sum::<f64>() / n)
                    .collect()
            })
            .collect();
        Ok(LightconeGrid {
            values,
            converged: grids.iter().all(|g| g.converged),
            ..first.clone()
        })
    }

    /// Largest distance whose value reaches the threshold, zero if none.
    pub fn front(&self) -> Vec<usize> {
        self.values
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.distances)
                    .zip(&self.scale)
                    .filter(|((v, _), s)| **v >= self.threshold * **s)
                    .map(|((_, &d), _)| d)
                    .max()
                    .unwrap_or(0)
            })
            .collect()
    }

    /// Log and linear fits of the front over the times up to and including
    /// the first one at which it reaches the largest distance.
    pub fn front_fits(&self) -> Result<FrontFits> {
        let front = self.front();
        let far = self.distances.iter().copied().max().unwrap_or(0);
        let points = front.iter().position(|&x| x >= far).map_or(front.len(), |i| i + 1);
        if points < 3 {
            return Err(Error::DegenerateFit(format!("front saturates after {points} times")));
        }
        let x: Vec<f64> = front[..points].iter().map(|&v| v as f64).collect();
        let t = &self.times[..points];
        let lnt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
        Ok(FrontFits {
            log: linear_fit(&lnt, &x)?,
            linear: linear_fit(t, &x)?,
            points,
        })
    }
}

/// `n` times log-spaced over `[t0, t1]`.
pub fn log_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t0];
    }
    let (a, b) = (t0.ln(), t1.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `A(t) x` column by column, column `j` at time `times[j]`.
fn heisenberg_apply(spec: &Spectrum, a: &OperatorSum, x: &Mat<C64>, times: &[f64]) -> Mat<C64> {
    let back: Vec<f64> = times.iter().map(|t| -t).collect();
    let y = spec.evolve(x, times);
    let y = apply_operator_batch(a, y.as_ref());
    spec.evolve(&y, &back)
}

/// `‖[A(t), B_d]‖` for every time and every `(d, B_d)`, by Lanczos on
/// `i[A(t), B_d]`. Requires Hermitian `A` and `B_d`.
pub fn lrb_commutator(
    spec: &Spectrum,
    a: &OperatorSum,
    bs: &[(usize, OperatorSum)],
    times: &[f64],
    opts: &LrbOptions,
) -> Result<LightconeGrid> {
    let n = spec.n_sites;
    for op in std::iter::once(a).chain(bs.iter().map(|(_, b)| b)) {
        if op.n_sites() != n {
            return Err(Error::MismatchedSites {
                left: op.n_sites(),
                right: n,
            });
        }
        if !op.is_hermitian(1e-12) {
            return Err(Error::param("lrb operators", "must be Hermitian"));
        }
    }
    let dim = spec.dim();
    let nd = bs.len();
    let runs = times.len() * nd;
    let results = extreme_eigenvalues_batch(
        dim,
        runs,
        |m, ids| {
            let k = ids.len();
            let mut stacked = Mat::<C64>::zeros(dim, 2 * k);
            let mut ts = Vec::with_capacity(2 * k);
            for (c, &r) in ids.iter().enumerate() {
                let b = &bs[r % nd].1;
                let col = Mat::from_fn(dim, 1, |i, _| m[(i, c)]);
                let bv = apply_operator_batch(b, col.as_ref());
                for i in 0..dim {
                    stacked[(i, c)] = bv[(i, 0)];
                    stacked[(i, k + c)] = m[(i, c)];
                }
                ts.push(times[r / nd]);
            }
            let t2: Vec<f64> = ts.iter().chain(ts.iter()).copied().collect();
            let y = heisenberg_apply(spec, a, &stacked, &t2);
            let mut out = Mat::<C64>::zeros(dim, k);
            let i_unit = C64::new(0.0, 1.0);
            for (c, &r) in ids.iter().enumerate() {
                let b = &bs[r % nd].1;
                let at_v = Mat::from_fn(dim, 1, |i, _| y[(i, k + c)]);
                let b_at_v = apply_operator_batch(b, at_v.as_ref());
                for i in 0..dim {
                    out[(i, c)] = i_unit * (y[(i, c)] - b_at_v[(i, 0)]);
                }
            }
            Ok(out)
        },
        opts.lanczos,
    )?;
    let values = (0..times.len())
        .map(|ti| (0..nd).map(|di| results[ti * nd + di].abs_max()).collect())
        .collect();
    Ok(LightconeGrid {
        times: times.to_vec(),
        distances: bs.iter().map(|(d, _)| *d).collect(),
        values,
        scale: bs.iter().map(|(_, b)| a.one_norm() * b.one_norm()).collect(),
        threshold: opts.threshold,
        converged: results.iter().all(|r| r.converged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_hamiltonian, sample_disorder};
    use crate::dense::{to_dense, DenseOperator};
    use crate::pauli::PauliString;

    fn word(p: PauliString) -> OperatorSum {
        OperatorSum::from_word(p, C64::new(1.0, 0.0))
    }

    fn tight() -> LrbOptions {
        LrbOptions {
            lanczos: LanczosOptions {
                max_iterations: 256,
                tolerance: 1e-12,
                abs_tolerance: 1e-14,
                ..LanczosOptions::default()
            },
            ..LrbOptions::default()
        }
    }

    #[test]
    fn matches_dense_evolution() {
        let h = build_hamiltonian(&sample_disorder(2, 5, 0.4).unwrap()).unwrap();
        let spec = Spectrum::new(&h, 12).unwrap();
        let a = word(PauliString::sigma_x(5, 0));
        let bs: Vec<_> = (1..5).map(|d| (d, word(PauliString::sigma_x(5, d)))).collect();
        let times = [0.7, 3.0];
        let grid = lrb_commutator(&spec, &a, &bs, &times, &tight()).unwrap();
        let hd = to_dense(&h).unwrap();
        let ad = to_dense(&a).unwrap();
        for (ti, &t) in times.iter().enumerate() {
            let u = hd.expm_hermitian(t).unwrap();
            let at = DenseOperator::conjugate(&u.adjoint(), &ad).unwrap();
            for (di, (_, b)) in bs.iter().enumerate() {
                let c = at.commutator(&to_dense(b).unwrap()).unwrap().op_norm().unwrap();
                assert!((c - grid.values[ti][di]).abs() < 1e-8, "t={t} d={}: {c} vs {}", di + 1, grid.values[ti][di]);
            }
        }
    }

    #[test]
    fn swapping_operators_reverses_time() {
        let h = build_hamiltonian(&sample_disorder(5, 5, 0.3).unwrap()).unwrap();
        let spec = Spectrum::new(&h, 12).unwrap();
        let a = word(PauliString::sigma_x(5, 1));
        let b = word(PauliString::sigma_z(5, 3));
        let forward = lrb_commutator(&spec, &a, &[(2, b.clone())], &[1.5], &tight()).unwrap();
        let swapped = lrb_commutator(&spec, &b, &[(2, a)], &[-1.5], &tight()).unwrap();
        assert!((forward.values[0][0] - swapped.values[0][0]).abs() < 1e-10);
    }

    #[test]
    fn conserved_sigma_z_without_field() {
        let h = build_hamiltonian(&sample_disorder(1, 5, 0.0).unwrap()).unwrap();
        let spec = Spectrum::new(&h, 12).unwrap();
        let a = word(PauliString::sigma_z(5, 1));
        let bx: Vec<_> = (0..5).map(|d| (d, word(PauliString::sigma_x(5, d)))).collect();
        let bz: Vec<_> = (0..5).map(|d| (d, word(PauliString::sigma_z(5, d)))).collect();
        let times = log_times(1.0, 100.0, 3);
        let gx = lrb_commutator(&spec, &a, &bx, &times, &tight()).unwrap();
        let gz = lrb_commutator(&spec, &a, &bz, &times, &tight()).unwrap();
        for ti in 0..times.len() {
            for d in 0..5 {
                let expected = if d == 1 { 2.0 } else { 0.0 };
                assert!((gx.values[ti][d] - expected).abs() < 1e-9);
                assert!(gz.values[ti][d] < 1e-9);
            }
        }
    }

    #[test]
    fn disjoint_operators_commute_at_time_zero() {
        let h = build_hamiltonian(&sample_disorder(3, 4, 0.5).unwrap()).unwrap();
        let spec = Spectrum::new(&h, 12).unwrap();
        let a = word(PauliString::sigma_x(4, 0));
        let g = lrb_commutator(&spec, &a, &[(3, word(PauliString::sigma_x(4, 3)))], &[0.0], &tight()).unwrap();
        assert!(g.values[0][0] < 1e-10);
    }

    #[test]
    fn front_and_fits() {
        let g = LightconeGrid {
            times: vec![1.0, 10.0, 100.0, 1000.0],
            distances: vec![1, 2, 3],
            values: vec![vec![0.5, 0.01, 0.0], vec![0.5, 0.2, 0.0], vec![0.5, 0.3, 0.15], vec![0.5, 0.4, 0.3]],
            scale: vec![1.0; 3],
            threshold: 0.1,
            converged: true,
        };
        assert_eq!(g.front(), vec![1, 2, 3, 3]);
        let f = g.front_fits().unwrap();
        assert_eq!(f.points, 3);
        assert!(f.log.r2 > f.linear.r2);
        let mut h = g.clone();
        h.values.iter_mut().flatten().for_each(|v| *v = 0.0);
        let m = LightconeGrid::average(&[g.clone(), h]).unwrap();
        assert_eq!(m.values[3][2], 0.15);
        assert_eq!(m.front(), vec![1, 2, 2, 3]);
    }
}
