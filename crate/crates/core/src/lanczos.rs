//! Matrix-free Hermitian Lanczos for spectral extremes and operator norms.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::chain::{rng_for, symmetric_uniform};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_iterations: usize,
    /// Stop when both extreme Ritz residuals fall below `tolerance · max|θ|`,
    /// or when the extreme Ritz values move by less than that for three
    /// consecutive iterations.
    pub tolerance: f64,
    /// Absolute slack added to the relative tolerance, for maps whose action
    /// carries rounding noise of known size.
    pub abs_tolerance: f64,
    /// Seed of the start vector.
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iterations: 120,
            tolerance: 1e-10,
            abs_tolerance: 0.0,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
    /// Largest Ritz residual of the two extremes at exit.
    pub residual: f64,
    pub converged: bool,
}

impl Extremes {
    pub fn abs_max(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// One Lanczos recurrence with full reorthogonalization.
struct Recurrence {
    v: Vec<C64>,
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    last: Extremes,
    still: usize,
    done: bool,
}

impl Recurrence {
    fn new(dim: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed);
        let mut v: Vec<C64> = (0..dim)
            .map(|_| C64::new(symmetric_uniform(&mut rng), symmetric_uniform(&mut rng)))
            .collect();
        let n0 = norm(&v);
        v.iter_mut().for_each(|x| *x /= n0);
        Recurrence {
            v,
            basis: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            last: Extremes {
                min: 0.0,
                max: 0.0,
                iterations: 0,
                residual: f64::INFINITY,
                converged: false,
            },
            still: 0,
            done: false,
        }
    }

    /// Take `w = M v` and advance; marks the recurrence done on convergence
    /// or when `max_iterations` is reached.
    fn absorb(&mut self, mut w: Vec<C64>, opts: &LanczosOptions, max_it: usize) -> Result<()> {
        let it = self.alpha.len();
        let a = dot(&self.v, &w).re;
        for (wi, vi) in w.iter_mut().zip(&self.v) {
            *wi -= vi * a;
        }
        if let (Some(prev), Some(&b)) = (self.basis.last(), self.beta.last()) {
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= pi * b;
            }
        }
        self.basis.push(std::mem::take(&mut self.v));
        self.alpha.push(a);
        // Two passes of classical Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= qi * c;
                }
            }
        }
        let b = norm(&w);
        let prev = self.last;
        self.last = ritz_extremes(&self.alpha, &self.beta, b)?;
        self.last.iterations = it + 1;
        let tol = opts.tolerance * self.last.abs_max() + opts.abs_tolerance;
        let moved = (self.last.min - prev.min).abs().max((self.last.max - prev.max).abs());
        self.still = if it > 0 && moved <= tol { self.still + 1 } else { 0 };
        if self.last.residual <= tol.max(f64::MIN_POSITIVE) || b <= 1e-300 || self.still >= 3 {
            self.last.converged = true;
            self.done = true;
            return Ok(());
        }
        if it + 1 >= max_it {
            self.done = true;
            return Ok(());
        }
        self.beta.push(b);
        self.v = w.into_iter().map(|x| x / b).collect();
        Ok(())
    }
}

/// Smallest and largest eigenvalue of the Hermitian map `apply` on `C^dim`,
/// with full reorthogonalization.
pub fn extreme_eigenvalues(
    dim: usize,
    mut apply: impl FnMut(&[C64], &mut [C64]) -> Result<()>,
    opts: LanczosOptions,
) -> Result<Extremes> {
    let out = extreme_eigenvalues_batch(
        dim,
        1,
        |m, _| {
            let v: Vec<C64> = (0..dim).map(|i| m[(i, 0)]).collect();
            let mut w = vec![C64::new(0.0, 0.0); dim];
            apply(&v, &mut w)?;
            Ok(Mat::from_fn(dim, 1, |i, _| w[i]))
        },
        opts,
    )?;
    Ok(out[0])
}

/// `count` independent Lanczos runs advanced in lockstep. `apply` receives
/// the current vectors of the unfinished runs as columns, together with the
/// run index of each column, and returns the images column by column.
/// Run `j` starts from the vector seeded by `opts.seed + j`.
pub fn extreme_eigenvalues_batch(
    dim: usize,
    count: usize,
    mut apply: impl FnMut(&Mat<C64>, &[usize]) -> Result<Mat<C64>>,
    opts: LanczosOptions,
) -> Result<Vec<Extremes>> {
    if dim == 0 {
        return Err(Error::param("dim", "empty space"));
    }
    let max_it = opts.max_iterations.min(dim);
    let mut runs: Vec<Recurrence> = (0..count)
        .map(|j| Recurrence::new(dim, opts.seed.wrapping_add(j as u64)))
        .collect();
    loop {
        let active: Vec<usize> = (0..count).filter(|&j| !runs[j].done).collect();
        if active.is_empty() {
            break;
        }
        let m = Mat::from_fn(dim, active.len(), |i, c| runs[active[c]].v[i]);
        let w = apply(&m, &active)?;
        if w.nrows() != dim || w.ncols() != active.len() {
            return Err(Error::param("apply", "returned a block of the wrong shape"));
        }
        for (c, &j) in active.iter().enumerate() {
            let col: Vec<C64> = (0..dim).map(|i| w[(i, c)]).collect();
            runs[j].absorb(col, &opts, max_it)?;
        }
    }
    Ok(runs.into_iter().map(|r| r.last).collect())
}

fn ritz_extremes(alpha: &[f64], beta: &[f64], next_beta: f64) -> Result<Extremes> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let (lo, hi) = (s[0], s[m - 1]);
    let res_lo = (next_beta * u[(m - 1, 0)]).abs();
    let res_hi = (next_beta * u[(m - 1, m - 1)]).abs();
    Ok(Extremes {
        min: lo,
        max: hi,
        iterations: m,
        residual: res_lo.max(res_hi),
        converged: false,
    })
}

/// Operator norm of a Hermitian map; errors if Lanczos does not converge.
pub fn hermitian_norm(
    dim: usize,
    apply: impl FnMut(&[C64], &mut [C64]) -> Result<()>,
    opts: LanczosOptions,
) -> Result<f64> {
    let ex = extreme_eigenvalues(dim, apply, opts)?;
    if !ex.converged {
        return Err(Error::NonConvergentSeries {
            order: ex.iterations,
            norm: ex.residual,
        });
    }
    Ok(ex.abs_max())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_extremes() {
        let d: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin() * (1.0 + 0.001 * i as f64)).collect();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ex = extreme_eigenvalues(
            d.len(),
            |x, y| {
                for i in 0..x.len() {
                    y[i] = x[i] * d[i];
                }
                Ok(())
            },
            LanczosOptions::default(),
        )
        .unwrap();
        assert!(ex.converged, "{ex:?} {lo} {hi}");
        assert!((ex.min - lo).abs() < 1e-9 && (ex.max - hi).abs() < 1e-9);
    }

    #[test]
    fn rank_one_norm() {
        let u: Vec<C64> = (0..64).map(|i| C64::new((i as f64).cos(), (i as f64 * 0.5).sin())).collect();
        let nu = norm(&u);
        let n = hermitian_norm(
            64,
            |x, y| {
                let c = dot(&u, x);
                for i in 0..64 {
                    y[i] = u[i] * c;
                }
                Ok(())
            },
            LanczosOptions::default(),
        )
        .unwrap();
        assert!((n - nu * nu).abs() < 1e-9 * nu * nu);
    }

    #[test]
    fn batch_runs_are_independent() {
        let scales = [1.0, 3.0, 0.5];
        let d: Vec<f64> = (0..80).map(|i| (i as f64 * 0.91).cos()).collect();
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = extreme_eigenvalues_batch(
            80,
            3,
            |m, runs| Ok(Mat::from_fn(80, runs.len(), |i, c| m[(i, c)] * d[i] * scales[runs[c]])),
            LanczosOptions::default(),
        )
        .unwrap();
        for (ex, s) in out.iter().zip(scales) {
            assert!(ex.converged && (ex.max - s * hi).abs() < 1e-9 * s);
        }
    }
}
