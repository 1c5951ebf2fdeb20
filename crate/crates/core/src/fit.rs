//! Least-squares fits and seeded bootstrap intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chain::{rng_for, unit_uniform};
use crate::error::{Error, Result};

/// `y ≈ slope·x + intercept` by ordinary least squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_stderr: f64,
    /// Two-sided 95% Student-t interval for the slope.
    pub slope_ci: (f64, f64),
    pub n: usize,
}

impl LinearFit {
    pub fn ci_excludes_zero(&self) -> bool {
        self.slope_ci.0 > 0.0 || self.slope_ci.1 < 0.0
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::param("fit", "x and y differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!("{n} points")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite value".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("x is constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (slope_stderr, slope_ci) = if n > 2 {
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let t = t_quantile(0.975, nf - 2.0)?;
        (se, (slope - t * se, slope + t * se))
    } else {
        (f64::INFINITY, (f64::NEG_INFINITY, f64::INFINITY))
    };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
        slope_stderr,
        slope_ci,
        n,
    })
}

pub fn t_quantile(p: f64, dof: f64) -> Result<f64> {
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::DegenerateFit(e.to_string()))?;
    Ok(t.inverse_cdf(p))
}

/// `y ≈ A e^{rate·x}` fitted on `ln y` over the strictly positive entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub rate: f64,
    pub log_fit: LinearFit,
}

pub fn exponential_fit(x: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    let (xs, ls): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&a, &b)| (a, b.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} positive values", xs.len())));
    }
    let log_fit = linear_fit(&xs, &ls)?;
    Ok(ExponentialFit {
        amplitude: log_fit.intercept.exp(),
        rate: log_fit.slope,
        log_fit,
    })
}

/// Percentile interval of `stat` over `resamples` draws of whole groups
/// with replacement.
pub fn bootstrap_ci<T>(
    groups: &[T],
    resamples: usize,
    seed: u64,
    mut stat: impl FnMut(&[&T]) -> Result<f64>,
) -> Result<(f64, f64)> {
    if groups.is_empty() || resamples == 0 {
        return Err(Error::DegenerateFit("empty bootstrap".into()));
    }
    let mut rng = rng_for(seed);
    let mut values = Vec::with_capacity(resamples);
    let mut pick: Vec<&T> = Vec::with_capacity(groups.len());
    for _ in 0..resamples {
        pick.clear();
        for _ in 0..groups.len() {
            let i = ((unit_uniform(&mut rng) * groups.len() as f64) as usize).min(groups.len() - 1);
            pick.push(&groups[i]);
        }
        if let Ok(v) = stat(&pick) {
            if v.is_finite() {
                values.push(v);
            }
        }
    }
    if values.len() < resamples / 2 {
        return Err(Error::DegenerateFit(format!("{} of {resamples} resamples usable", values.len())));
    }
    values.sort_by(f64::total_cmp);
    let q = |p: f64| values[((p * (values.len() - 1) as f64).round() as usize).min(values.len() - 1)];
    Ok((q(0.025), q(0.975)))
}

/// Resamples used by [`fit_series`].
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    /// `y = A e^{rate·x}`, fitted on `ln y` over the positive entries.
    Exponential,
    /// `y = slope·x + intercept`.
    Linear,
    /// `y = slope·ln x + intercept`.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesFit {
    pub model: FitModel,
    /// Rate for the exponential model.
    pub slope: f64,
    /// `ln A` for the exponential model.
    pub intercept: f64,
    pub r2: f64,
    /// Student-t interval for the slope.
    pub slope_ci: (f64, f64),
    /// Percentile interval over resampled points.
    pub bootstrap_ci: (f64, f64),
    pub n: usize,
}

fn transform(x: &[f64], y: &[f64], model: FitModel) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::param("fit", "x and y differ in length"));
    }
    let pairs = x.iter().zip(y).map(|(&a, &b)| (a, b));
    Ok(match model {
        FitModel::Exponential => pairs.filter(|&(_, b)| b > 0.0).map(|(a, b)| (a, b.ln())).unzip(),
        FitModel::Linear => pairs.unzip(),
        FitModel::Log => {
            if x.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::param("fit", "log model needs positive x"));
            }
            pairs.map(|(a, b)| (a.ln(), b)).unzip()
        }
    })
}

/// Least-squares fit of `model` with a seeded bootstrap interval for the
/// slope. Fewer than three usable points or a constant series is degenerate.
pub fn fit_series(x: &[f64], y: &[f64], model: FitModel, seed: u64) -> Result<SeriesFit> {
    let (u, v) = transform(x, y, model)?;
    if u.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} usable points", u.len())));
    }
    if v.iter().all(|&w| w == v[0]) {
        return Err(Error::DegenerateFit("constant series".into()));
    }
    let f = linear_fit(&u, &v)?;
    let points: Vec<(f64, f64)> = u.iter().copied().zip(v.iter().copied()).collect();
    let bootstrap_ci = bootstrap_ci(&points, BOOTSTRAP_RESAMPLES, seed, |s| {
        let (a, b): (Vec<f64>, Vec<f64>) = s.iter().map(|p| (p.0, p.1)).unzip();
        Ok(linear_fit(&a, &b)?.slope)
    })?;
    Ok(SeriesFit {
        model,
        slope: f.slope,
        intercept: f.intercept,
        r2: f.r2,
        slope_ci: f.slope_ci,
        bootstrap_ci,
        n: f.n,
    })
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_line_interval() {
        // Residuals (+1, −1, −1, +1) around y = x.
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 1.0, 4.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        // se = sqrt(4/2/5), t_{0.975, 2} = 4.302653
        let se = (0.4f64).sqrt();
        assert!((f.slope_stderr - se).abs() < 1e-12);
        assert!((f.slope_ci.1 - (1.0 + 4.302653 * se)).abs() < 1e-5);
    }

    #[test]
    fn exponential_skips_zeros() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.5, 0.0, 0.125];
        let f = exponential_fit(&x, &y).unwrap();
        assert!((f.rate - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(f.log_fit.n, 3);
    }

    #[test]
    fn constant_x_is_degenerate() {
        assert!(matches!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn bootstrap_is_seeded() {
        let g: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let stat = |s: &[&f64]| Ok(s.iter().copied().sum::<f64>() / s.len() as f64);
        let a = bootstrap_ci(&g, 200, 1, stat).unwrap();
        let b = bootstrap_ci(&g, 200, 1, stat).unwrap();
        assert_eq!(a, b);
        assert!(a.0 < 9.5 && 9.5 < a.1);
    }

    #[test]
    fn series_fit_recovers_rate() {
        let x: Vec<f64> = (0..7).map(|c| c as f64).collect();
        let y: Vec<f64> = x.iter().map(|c| (-0.5 * c).exp()).collect();
        let f = fit_series(&x, &y, FitModel::Exponential, 3).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-6);
        assert!((f.bootstrap_ci.0 + 0.5).abs() < 1e-6 && (f.bootstrap_ci.1 + 0.5).abs() < 1e-6);
        let l = fit_series(&x, &x.iter().map(|v| 3.0 * (v + 1.0).ln()).collect::<Vec<_>>(), FitModel::Linear, 3).unwrap();
        assert!(l.r2 < 1.0);
        let x1: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let g = fit_series(&x1, &x1.iter().map(|v| 3.0 * v.ln()).collect::<Vec<_>>(), FitModel::Log, 3).unwrap();
        assert!((g.slope - 3.0).abs() < 1e-12 && (g.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let x = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(fit_series(&x, &[2.0; 4], FitModel::Linear, 1), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_series(&x, &[1.0, 0.0, 0.0, 0.5], FitModel::Exponential, 1), Err(Error::DegenerateFit(_))));
    }
}
