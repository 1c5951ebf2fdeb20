//! Sparse weighted sums of Pauli words.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pauli::{multiply_unchecked, PauliString, SupportInterval, MAX_SITES};

pub const DEFAULT_DROP_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_MAX_ORDER: usize = 60;

/// `Σ_P c_P P` over Pauli words on a fixed chain.
///
/// Terms live in an ordered map keyed by `(x_mask, z_mask)`, so iteration
/// order (and with it every floating-point reduction) is the same on every run.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum {
    n_sites: usize,
    drop_tolerance: f64,
    terms: BTreeMap<(u64, u64), C64>,
}

impl OperatorSum {
    pub fn zero(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::param("n_sites", "must be positive"));
        }
        if n_sites > MAX_SITES {
            return Err(Error::TooManySites { n_sites });
        }
        Ok(OperatorSum {
            n_sites,
            drop_tolerance: DEFAULT_DROP_TOLERANCE,
            terms: BTreeMap::new(),
        })
    }

    pub fn identity(n_sites: usize) -> Result<Self> {
        let mut op = OperatorSum::zero(n_sites)?;
        op.add_term(PauliString::identity(n_sites), C64::new(1.0, 0.0))?;
        Ok(op)
    }

    pub fn from_word(p: PauliString, coeff: C64) -> Self {
        let mut op = OperatorSum::zero(p.n_sites()).expect("word has a valid site count");
        op.add_term(p, coeff).expect("same site count");
        op
    }

    pub fn from_terms(n_sites: usize, terms: impl IntoIterator<Item = (PauliString, C64)>) -> Result<Self> {
        let mut op = OperatorSum::zero(n_sites)?;
        for (p, c) in terms {
            op.add_term(p, c)?;
        }
        Ok(op)
    }

    pub fn with_drop_tolerance(mut self, tol: f64) -> Self {
        self.drop_tolerance = tol;
        self.prune();
        self
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn drop_tolerance(&self) -> f64 {
        self.drop_tolerance
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (PauliString, C64)> + '_ {
        let n = self.n_sites;
        self.terms
            .iter()
            .map(move |(&(x, z), &c)| (PauliString::from_masks(n, x, z), c))
    }

    pub fn coefficient(&self, p: &PauliString) -> C64 {
        self.terms
            .get(&(p.x_mask(), p.z_mask()))
            .copied()
            .unwrap_or_default()
    }

    pub fn add_term(&mut self, p: PauliString, c: C64) -> Result<()> {
        if p.n_sites() != self.n_sites {
            return Err(Error::MismatchedSites {
                left: self.n_sites,
                right: p.n_sites(),
            });
        }
        self.accumulate(p.x_mask(), p.z_mask(), c);
        Ok(())
    }

    /// Add without the drop check; call [`prune`](Self::prune) afterwards.
    #[inline]
    pub(crate) fn accumulate_raw(&mut self, x: u64, z: u64, c: C64) {
        *self.terms.entry((x, z)).or_default() += c;
    }

    fn accumulate(&mut self, x: u64, z: u64, c: C64) {
        let tol = self.drop_tolerance;
        let entry = self.terms.entry((x, z)).or_default();
        *entry += c;
        if entry.norm() < tol {
            self.terms.remove(&(x, z));
        }
    }

    pub(crate) fn prune(&mut self) {
        let tol = self.drop_tolerance;
        self.terms.retain(|_, c| c.norm() >= tol);
    }

    fn check_sites(&self, other: &OperatorSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            Err(Error::MismatchedSites {
                left: self.n_sites,
                right: other.n_sites,
            })
        } else {
            Ok(())
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.prune();
        out
    }

    pub fn add(&self, other: &OperatorSum) -> Result<Self> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &OperatorSum) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: C64, other: &OperatorSum) -> Result<Self> {
        self.check_sites(other)?;
        let mut out = self.clone();
        for (&(x, z), &c) in &other.terms {
            out.accumulate_raw(x, z, s * c);
        }
        out.prune();
        Ok(out)
    }

    /// Hermitian adjoint. Every word is Hermitian, so only coefficients change.
    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    pub fn one_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// One-norm of `x - x†` (twice the anti-Hermitian part).
    pub fn hermiticity_defect(&self) -> f64 {
        self.terms.values().map(|c| 2.0 * c.im.abs()).sum()
    }

    /// One-norm of `x + x†` (twice the Hermitian part).
    pub fn anti_hermiticity_defect(&self) -> f64 {
        self.terms.values().map(|c| 2.0 * c.re.abs()).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.anti_hermiticity_defect() <= tol
    }

    /// Terms built only from σz and identity.
    pub fn diagonal_part(&self) -> Self {
        self.filter(|p| p.is_diagonal())
    }

    pub fn off_diagonal_part(&self) -> Self {
        self.filter(|p| !p.is_diagonal())
    }

    pub fn filter(&self, mut keep: impl FnMut(&PauliString) -> bool) -> Self {
        let n = self.n_sites;
        OperatorSum {
            n_sites: n,
            drop_tolerance: self.drop_tolerance,
            terms: self
                .terms
                .iter()
                .filter(|(&(x, z), _)| keep(&PauliString::from_masks(n, x, z)))
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    /// Interval hull of all term supports; `None` for multiples of the identity.
    pub fn support(&self) -> Option<SupportInterval> {
        let mask = self.terms.keys().fold(0u64, |m, &(x, z)| m | x | z);
        SupportInterval::of_mask(mask)
    }

    /// Keep exactly the terms lying within `base` widened by `c` on each side.
    pub fn truncate_to_collar(&self, base: SupportInterval, c: usize) -> Self {
        let window = base.widen(c, self.n_sites).mask();
        self.filter(|p| (p.x_mask() | p.z_mask()) & !window == 0)
    }

    /// Shift every term `offset` sites to the right on a chain of `n_sites`.
    pub fn embed(&self, n_sites: usize, offset: usize) -> Result<Self> {
        let mut out = OperatorSum::zero(n_sites)?.with_drop_tolerance(self.drop_tolerance);
        for (p, c) in self.terms() {
            out.add_term(p.embed(n_sites, offset)?, c)?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Operator product `a · b`.
pub fn multiply(a: &OperatorSum, b: &OperatorSum) -> Result<OperatorSum> {
    a.check_sites(b)?;
    let mut out = OperatorSum::zero(a.n_sites)?.with_drop_tolerance(a.drop_tolerance);
    for (p, cp) in a.terms() {
        for (q, cq) in b.terms() {
            let (phase, r) = multiply_unchecked(&p, &q);
            out.accumulate_raw(r.x_mask(), r.z_mask(), phase.to_complex() * cp * cq);
        }
    }
    out.prune();
    Ok(out)
}

/// `[a, b] = ab − ba`. Commuting word pairs contribute nothing and
/// anticommuting pairs contribute `2 p q`.
pub fn commutator(a: &OperatorSum, b: &OperatorSum) -> Result<OperatorSum> {
    a.check_sites(b)?;
    let mut out = OperatorSum::zero(a.n_sites)?.with_drop_tolerance(a.drop_tolerance);
    for (p, cp) in a.terms() {
        for (q, cq) in b.terms() {
            if p.commutes_with(&q) {
                continue;
            }
            let (phase, r) = multiply_unchecked(&p, &q);
            out.accumulate_raw(r.x_mask(), r.z_mask(), 2.0 * phase.to_complex() * cp * cq);
        }
    }
    out.prune();
    Ok(out)
}

/// Knobs for [`conjugate_by_exp`].
#[derive(Clone, Copy, Debug)]
pub struct SeriesOptions {
    pub tolerance: f64,
    pub max_order: usize,
    pub anti_hermitian_tolerance: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tolerance: 1e-12,
            max_order: DEFAULT_MAX_ORDER,
            anti_hermitian_tolerance: 1e-10,
        }
    }
}

/// `e^a x e^{−a} = Σ_j x_j` with `x_j = [a, x_{j−1}] / j`.
///
/// Summation stops once a geometric estimate of the remaining tail, built
/// from the two most recent term norms and the a-priori ratio
/// `‖x_{j+1}‖ ≤ 2‖a‖₁‖x_j‖/(j+1)`, falls below `tolerance`.
pub fn conjugate_by_exp(a: &OperatorSum, x: &OperatorSum, tolerance: f64) -> Result<OperatorSum> {
    conjugate_by_exp_with(
        a,
        x,
        SeriesOptions {
            tolerance,
            ..SeriesOptions::default()
        },
    )
}

pub fn conjugate_by_exp_with(a: &OperatorSum, x: &OperatorSum, opts: SeriesOptions) -> Result<OperatorSum> {
    a.check_sites(x)?;
    let defect = a.anti_hermiticity_defect();
    if defect > opts.anti_hermitian_tolerance {
        return Err(Error::NotAntiHermitian { deviation: defect });
    }
    let a_norm = a.one_norm();
    let mut total = x.clone();
    let mut term = x.clone();
    let mut prev_norm = x.one_norm();
    for j in 1..=opts.max_order {
        term = commutator(a, &term)?.scale(C64::new(1.0 / j as f64, 0.0));
        let norm = term.one_norm();
        total = total.add(&term)?;
        if norm == 0.0 {
            return Ok(total);
        }
        let a_priori = 2.0 * a_norm / (j as f64 + 1.0);
        let observed = if prev_norm > 0.0 { norm / prev_norm } else { 1.0 };
        let ratio = a_priori.min(observed);
        if ratio < 1.0 && norm * ratio / (1.0 - ratio) < opts.tolerance {
            return Ok(total);
        }
        prev_norm = norm;
    }
    Err(Error::NonConvergentSeries {
        order: opts.max_order,
        norm: prev_norm,
    })
}

#[derive(Serialize, Deserialize)]
struct OperatorSumRepr {
    n_sites: usize,
    terms: Vec<(u64, u64, f64, f64)>,
}

impl Serialize for OperatorSum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorSumRepr {
            n_sites: self.n_sites,
            terms: self
                .terms
                .iter()
                .map(|(&(x, z), c)| (x, z, c.re, c.im))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OperatorSum {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = OperatorSumRepr::deserialize(deserializer)?;
        let mut op = OperatorSum::zero(repr.n_sites).map_err(D::Error::custom)?;
        for (x, z, re, im) in repr.terms {
            let p = PauliString::new(repr.n_sites, x, z).map_err(D::Error::custom)?;
            op.add_term(p, C64::new(re, im)).map_err(D::Error::custom)?;
        }
        Ok(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn disjoint_commutator_vanishes() {
        let a = OperatorSum::from_word(word("ZIII"), one());
        let b = OperatorSum::from_word(word("IIXI"), one());
        assert!(commutator(&a, &b).unwrap().is_zero());
    }

    #[test]
    fn single_site_commutator() {
        let z = OperatorSum::from_word(word("Z"), one());
        let x = OperatorSum::from_word(word("X"), one());
        let c = commutator(&z, &x).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.coefficient(&word("Y")), C64::new(0.0, 2.0));
    }

    #[test]
    fn truncation_drops_far_term() {
        let mut x = OperatorSum::zero(6).unwrap();
        x.add_term(word("IIZIII"), C64::new(0.5, 0.0)).unwrap();
        x.add_term(word("IIZXII"), C64::new(0.25, 0.0)).unwrap();
        x.add_term(word("IIZIXI"), C64::new(0.125, 0.0)).unwrap();
        let base = SupportInterval::site(2);
        let t = x.truncate_to_collar(base, 1);
        assert_eq!(t.len(), 2);
        assert_eq!(x.one_norm() - t.one_norm(), 0.125);
        assert_eq!(x.truncate_to_collar(base, 6), x);
    }

    #[test]
    fn zero_generator_leaves_x() {
        let a = OperatorSum::zero(2).unwrap();
        let x = OperatorSum::from_word(word("ZX"), one());
        assert_eq!(conjugate_by_exp(&a, &x, 1e-14).unwrap(), x);
    }

    #[test]
    fn single_site_rotation() {
        let theta = 0.3;
        let a = OperatorSum::from_word(word("Y"), C64::new(0.0, -theta));
        let x = OperatorSum::from_word(word("Z"), one());
        let out = conjugate_by_exp(&a, &x, 1e-15).unwrap();
        // e^{-iθY} Z e^{iθY} = cos 2θ Z + sin 2θ X
        assert!((out.coefficient(&word("Z")).re - (2.0 * theta).cos()).abs() < 1e-14);
        assert!((out.coefficient(&word("X")).re - (2.0 * theta).sin()).abs() < 1e-14);
    }

    #[test]
    fn rejects_hermitian_generator() {
        let a = OperatorSum::from_word(word("Y"), one());
        let x = OperatorSum::from_word(word("Z"), one());
        assert!(matches!(
            conjugate_by_exp(&a, &x, 1e-12),
            Err(Error::NotAntiHermitian { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let mut x = OperatorSum::zero(3).unwrap();
        x.add_term(word("XYZ"), C64::new(0.5, -0.25)).unwrap();
        x.add_term(word("IIZ"), C64::new(1.0, 0.0)).unwrap();
        let s = x.to_json().unwrap();
        assert_eq!(OperatorSum::from_json(&s).unwrap(), x);
    }
}
