//! Exact and brute-force checks of the combinatorial constants behind the
//! locality bounds: schedule identities, path counting, series constants and
//! elementary inequalities.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ladder;

/// Universal entanglement-rate coefficient.
pub const C_STAR: f64 = 1.9;

/// Tail-decay constant `α = 24 c′ χ^{56/225}`.
pub fn alpha(chi: f64, c_prime: f64) -> f64 {
    24.0 * c_prime * chi.powf(56.0 / 225.0)
}

fn check_chi(chi: f64, c_prime: f64) -> Result<()> {
    if !(chi > 0.0 && chi < 1.0) {
        return Err(Error::param("chi", format!("{chi} is outside (0, 1)")));
    }
    if !(c_prime >= 1.0) {
        return Err(Error::param("c_prime", format!("{c_prime} is below 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct AreaBudget {
    pub chi: f64,
    pub c_prime: f64,
    /// Partial sums of `Σ_k c*(4/3)c′ 2^{floor(8/7 L_{k+1})} χ^{ceil L_{k−1}}`.
    pub partial_sums: Vec<f64>,
    pub total: f64,
    /// `c*(4/3)c′ 2^7 χ / (1 − 2^7 χ)`.
    pub closed_form: f64,
    /// `650 c′ χ`.
    pub headline: f64,
}

/// Sum the entanglement budget series term by term (in log space, since the
/// powers of two overflow long before the powers of χ underflow).
pub fn area_budget(chi: f64, c_prime: f64) -> Result<AreaBudget> {
    check_chi(chi, c_prime)?;
    let ratio = 128.0 * chi;
    if ratio >= 1.0 {
        return Err(Error::Divergent {
            what: "area budget series",
            ratio,
        });
    }
    let prefactor = (C_STAR * 4.0 / 3.0 * c_prime).ln();
    let rows = ladder::ladder(40)?;
    let mut partial_sums = Vec::new();
    let mut total = 0.0f64;
    for row in &rows {
        let s = row.support_next_form.to_f64().unwrap_or(f64::INFINITY);
        let e = row.budget_exponent.to_f64().unwrap_or(f64::INFINITY);
        let log_term = prefactor + s * std::f64::consts::LN_2 + e * chi.ln();
        let term = log_term.exp();
        total += term;
        partial_sums.push(total);
        if term < 1e-18 * total {
            break;
        }
    }
    Ok(AreaBudget {
        chi,
        c_prime,
        partial_sums,
        total,
        closed_form: area_budget_closed_form(chi, c_prime),
        headline: 650.0 * c_prime * chi,
    })
}

/// The loosened geometric closed form of the budget series.
pub fn area_budget_closed_form(chi: f64, c_prime: f64) -> f64 {
    C_STAR * 4.0 / 3.0 * c_prime * 128.0 * chi / (1.0 - 128.0 * chi)
}

/// `(2x − 1)!!`, with `(−1)!! = 1`.
pub fn double_factorial_odd(x: u32) -> BigInt {
    let mut acc = BigInt::one();
    let mut k = 2 * x as i64 - 1;
    while k > 1 {
        acc *= k;
        k -= 2;
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct Toy1Report {
    pub delta: f64,
    pub radius: i64,
    pub min_len: u32,
    pub max_len: u32,
    pub collar_bits: u32,
    /// `counts[x − 1]` paths of length `x` from the fixed start.
    pub counts: Vec<u64>,
    pub double_factorials: Vec<String>,
    pub counts_within_bound: bool,
    pub weighted_sum: f64,
    pub bound: f64,
    pub sum_within_bound: bool,
    pub capped: bool,
}

/// Visit every spin-flip path `i_1 = 0, i_2, …, i_x` with each new site within
/// one lattice spacing of an earlier one and `|i_n| ≤ radius`, counting by
/// length. Returns `None` when more than `cap` paths would be visited.
pub fn enumerate_paths(radius: i64, max_len: u32, cap: u64) -> Option<Vec<u64>> {
    fn walk(path: &mut Vec<i64>, radius: i64, max_len: usize, counts: &mut [u64], budget: &mut u64) -> bool {
        counts[path.len() - 1] += 1;
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        if path.len() == max_len {
            return true;
        }
        let lo = path.iter().min().copied().unwrap_or(0) - 1;
        let hi = path.iter().max().copied().unwrap_or(0) + 1;
        for next in lo.max(-radius)..=hi.min(radius) {
            debug_assert!(path.iter().any(|&p| (p - next).abs() <= 1));
            path.push(next);
            let ok = walk(path, radius, max_len, counts, budget);
            path.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    let mut counts = vec![0u64; max_len as usize];
    let mut budget = cap;
    let mut path = vec![0i64];
    if walk(&mut path, radius, max_len as usize, &mut counts, &mut budget) {
        Some(counts)
    } else {
        None
    }
}

/// Count paths and weigh them at the worst-case matrix-element bound
/// `δ^{|g|} / (2|g| − 1)!!`, comparing with `2^{C+1} (4δ)^{min_len}`.
pub fn toy1_verify(delta: f64, radius: i64, min_len: u32, max_len: u32, collar_bits: u32) -> Result<Toy1Report> {
    if !(4.0 * delta < 0.5) || delta <= 0.0 {
        return Err(Error::param("delta", format!("4δ = {} must lie in (0, 1/2)", 4.0 * delta)));
    }
    if min_len == 0 || min_len > max_len {
        return Err(Error::param("min_len", "need 1 <= min_len <= max_len"));
    }
    const CAP: u64 = 200_000_000;
    let (counts, capped) = match enumerate_paths(radius, max_len, CAP) {
        Some(c) => (c, false),
        None => (vec![0; max_len as usize], true),
    };
    let dfs: Vec<BigInt> = (1..=max_len).map(double_factorial_odd).collect();
    let counts_within_bound = !capped && counts.iter().zip(&dfs).all(|(&c, d)| BigInt::from(c) <= *d);
    let mut weighted_sum = 0.0;
    for x in min_len..=max_len {
        let c = counts[(x - 1) as usize] as f64;
        let df = dfs[(x - 1) as usize].to_f64().unwrap_or(f64::INFINITY);
        weighted_sum += c * 2f64.powi((2 * x + collar_bits) as i32) * delta.powi(x as i32) / df;
    }
    let bound = 2f64.powi(collar_bits as i32 + 1) * (4.0 * delta).powi(min_len as i32);
    Ok(Toy1Report {
        delta,
        radius,
        min_len,
        max_len,
        collar_bits,
        counts,
        double_factorials: dfs.iter().map(|d| d.to_string()).collect(),
        counts_within_bound,
        weighted_sum,
        bound,
        sum_within_bound: !capped && weighted_sum <= bound,
        capped,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Toy3Report {
    pub g_size: u32,
    pub delta: f64,
    /// `F_n / 2^{|G|}` upper bounds for `n = 0..=n_max`.
    pub terms: Vec<f64>,
    pub partial: f64,
    pub tail_estimate: f64,
    pub total: f64,
}

/// Upper-bound series `F = Σ_n F_n` with
/// `F_n ≤ (4δ)^n 2^{|G|+n} (1 + 2n/(2|G| − 1))^{|G|}`, normalized by `2^{|G|}`
/// so that the `n = 0` term is 1.
pub fn toy3_f(g_size: u32, delta: f64, n_max: u32) -> Result<Toy3Report> {
    if g_size == 0 {
        return Err(Error::param("g_size", "must be positive"));
    }
    if !(8.0 * delta < 1.0) || delta < 0.0 {
        return Err(Error::Divergent {
            what: "toy-3 series",
            ratio: 8.0 * delta,
        });
    }
    let g = g_size as f64;
    let terms: Vec<f64> = (0..=n_max)
        .map(|n| {
            let n = n as f64;
            (8.0 * delta).powf(n) * (1.0 + 2.0 * n / (2.0 * g - 1.0)).powf(g)
        })
        .collect();
    let partial: f64 = terms.iter().sum();
    let tail_estimate = match terms.len() {
        0 | 1 => 0.0,
        len => {
            let r = terms[len - 1] / terms[len - 2];
            if r < 1.0 {
                terms[len - 1] * r / (1.0 - r)
            } else {
                f64::INFINITY
            }
        }
    };
    Ok(Toy3Report {
        g_size,
        delta,
        terms,
        partial,
        tail_estimate,
        total: partial + tail_estimate,
    })
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `C(|G|+n, |G|) < 2^{|G|+n}` for every `n ≤ n_max`, exactly.
pub fn partition_counts_within_bound(g_size: u32, n_max: u32) -> bool {
    (0..=n_max).all(|n| binomial(g_size + n, g_size) < (BigInt::one() << (g_size + n) as usize))
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub points: usize,
    pub worst_x: f64,
    /// Largest `ln²x / x` seen on the grid.
    pub worst_ratio: f64,
    pub holds: bool,
}

/// `ln² x ≤ 0.6 x` at every grid point (all points must be at least 3).
pub fn ln2_inequality_check(grid: &[f64]) -> Result<InequalityReport> {
    if grid.iter().any(|&x| !(x >= 3.0)) {
        return Err(Error::param("grid", "points must be at least 3"));
    }
    let (mut worst_x, mut worst_ratio) = (f64::NAN, 0.0f64);
    let mut holds = true;
    for &x in grid {
        let l = x.ln();
        let r = l * l / x;
        if r > worst_ratio {
            worst_ratio = r;
            worst_x = x;
        }
        holds &= l * l <= 0.6 * x;
    }
    Ok(InequalityReport {
        points: grid.len(),
        worst_x,
        worst_ratio,
        holds,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyTailModel {
    pub epsilon: f64,
    pub length: f64,
    /// `Σ_x (2x ln 2) ε^x`.
    pub expected_entropy: f64,
    /// `4 ε ln 2`.
    pub expected_bound: f64,
    /// `2 ln 2 · ln L / (−ln ε)`.
    pub s_max: f64,
}

/// Geometric resonance-size model `P(S = 2x ln 2) = ε^x`.
pub fn entropy_tail_model(epsilon: f64, length: f64) -> Result<EntropyTailModel> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    if !(length > 1.0) {
        return Err(Error::param("L", "must exceed 1"));
    }
    let ln2 = std::f64::consts::LN_2;
    Ok(EntropyTailModel {
        epsilon,
        length,
        expected_entropy: 2.0 * ln2 * epsilon / (1.0 - epsilon).powi(2),
        expected_bound: 4.0 * epsilon * ln2,
        s_max: 2.0 * ln2 * length.ln() / (-epsilon.ln()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleCheck {
    pub alpha: f64,
    pub c_prime: f64,
    /// Smallest `S` in range with `α^{c′S} < 2^{−S}`.
    pub crossover: Option<u32>,
    /// Whether the inequality holds at every `S` from the crossover to the end of the range.
    pub holds_after_crossover: bool,
}

pub fn mbl_scale_check(alpha: f64, c_prime: f64, s_range: std::ops::RangeInclusive<u32>) -> Result<ScaleCheck> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", "must lie in (0, 1)"));
    }
    let below = |s: u32| c_prime * s as f64 * alpha.ln() < -(s as f64) * std::f64::consts::LN_2;
    let crossover = s_range.clone().find(|&s| below(s));
    let holds_after_crossover = crossover.is_some_and(|c| (c..=*s_range.end()).all(below));
    Ok(ScaleCheck {
        alpha,
        c_prime,
        crossover,
        holds_after_crossover,
    })
}

/// One named check in the bound report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub checks: Vec<Check>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(name: &str, pass: bool, detail: impl Serialize) -> Result<Check> {
    Ok(Check {
        name: name.into(),
        pass,
        detail: serde_json::to_value(detail)?,
    })
}

/// Run every identity and inequality with the default grids.
pub fn bound_report() -> Result<BoundReport> {
    let mut checks = Vec::new();

    let ids = ladder::verify_identities(64)?;
    let ok = ids.iter().all(|r| r.collar_ok && r.supports_agree);
    checks.push(check("ladder identities k<=64", ok, &ids)?);

    let rows = ladder::ladder(5)?;
    let supports: Vec<usize> = rows[..3].iter().map(|r| r.support_usize()).collect();
    checks.push(check("supports k=1..3", supports == [4, 7, 14], &supports)?);
    let collars: Vec<usize> = rows[2..5].iter().map(|r| r.collar_usize()).collect();
    checks.push(check("collars k=3..5", collars == [2, 5, 11], &collars)?);

    let grid: Vec<f64> = (0..=9700).map(|i| 3.0 + i as f64 * 0.01).collect();
    let ineq = ln2_inequality_check(&grid)?;
    checks.push(check("ln^2 x <= 0.6 x on [3, 100]", ineq.holds, &ineq)?);

    let toy = toy1_verify(0.1, 9, 1, 9, 2)?;
    checks.push(check(
        "toy 1 path counts <= (2x-1)!! for x <= 9",
        toy.counts_within_bound,
        &toy,
    )?);
    checks.push(check("toy 1 weighted sum <= 2^(C+1) 4 delta", toy.sum_within_bound, &toy.weighted_sum)?);

    let mut budgets = Vec::new();
    let mut ok = true;
    for p in 9..=20 {
        let chi = 2f64.powi(-p);
        let b = area_budget(chi, 1.0)?;
        ok &= b.total <= b.headline && b.closed_form <= b.headline;
        ok &= b.partial_sums.windows(2).all(|w| w[1] >= w[0]);
        ok &= b.partial_sums.iter().all(|&s| s <= b.closed_form);
        budgets.push(b);
    }
    checks.push(check("area budget <= 650 c' chi for chi = 2^-9..2^-20", ok, &budgets)?);

    let partitions = (1..=12).all(|g| partition_counts_within_bound(g, 30));
    checks.push(check("binomial partition counts < 2^(|G|+n)", partitions, partitions)?);

    Ok(BoundReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_path_counts() {
        let c = enumerate_paths(5, 3, 1_000).unwrap();
        assert_eq!(c, vec![1, 3, 11]);
    }

    #[test]
    fn double_factorials() {
        assert_eq!(double_factorial_odd(1), BigInt::from(1));
        assert_eq!(double_factorial_odd(2), BigInt::from(3));
        assert_eq!(double_factorial_odd(5), BigInt::from(945));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), BigInt::from(120));
        assert_eq!(binomial(4, 0), BigInt::from(1));
    }

    #[test]
    fn toy3_first_term_is_one() {
        let r = toy3_f(5, 0.01, 0).unwrap();
        assert_eq!(r.terms, vec![1.0]);
    }

    #[test]
    fn divergent_budget_flagged() {
        assert!(matches!(area_budget(0.01, 1.0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn alpha_at_small_chi() {
        assert!(alpha(1e-7, 1.0) < 0.5);
        assert!(alpha(0.01, 1.0) > 1.0);
    }
}
