//! The step schedule `L_k = (15/8)^k` and the integers derived from it,
//! computed in exact rational arithmetic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn floor(q: &BigRational) -> BigInt {
    q.numer().div_floor(q.denom())
}

pub fn ceil(q: &BigRational) -> BigInt {
    q.numer().div_ceil(q.denom())
}

/// `L_k = (15/8)^k`, exact.
pub fn scale(k: u32) -> BigRational {
    let mut q = BigRational::one();
    let step = ratio(15, 8);
    for _ in 0..k {
        q *= &step;
    }
    q
}

fn decimal<S: Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// One row of the schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LadderEntry {
    pub k: u32,
    /// `L_k` as `numerator/denominator`.
    pub scale: String,
    /// `floor((15/7) L_k)`: the widest generator term at this step.
    #[serde(serialize_with = "decimal")]
    pub support: BigInt,
    /// `floor((8/7) L_{k+1})`, equal to `support` by construction.
    #[serde(serialize_with = "decimal")]
    pub support_next_form: BigInt,
    /// `ceil(L_{k−1})`: the power of χ in the norm budget.
    #[serde(serialize_with = "decimal")]
    pub budget_exponent: BigInt,
    /// `c_k` with `c_1 = 1` and `c_{k+1} = floor(L_k/2) + c_k`.
    #[serde(serialize_with = "decimal")]
    pub collar: BigInt,
    /// Largest integer strictly below `4.2 L_k`.
    #[serde(serialize_with = "decimal")]
    pub resonance_cap: BigInt,
}

impl LadderEntry {
    pub fn support_usize(&self) -> usize {
        self.support.to_usize().unwrap_or(usize::MAX)
    }

    pub fn collar_usize(&self) -> usize {
        self.collar.to_usize().unwrap_or(usize::MAX)
    }

    pub fn budget_exponent_u32(&self) -> u32 {
        self.budget_exponent.to_u32().unwrap_or(u32::MAX)
    }

    pub fn resonance_cap_usize(&self) -> usize {
        self.resonance_cap.to_usize().unwrap_or(usize::MAX)
    }
}

/// Schedule rows for `k = 1..=k_max`.
pub fn ladder(k_max: u32) -> Result<Vec<LadderEntry>> {
    if k_max == 0 {
        return Err(Error::param("k", "steps are numbered from 1"));
    }
    let mut out = Vec::with_capacity(k_max as usize);
    let mut collar = BigInt::one();
    for k in 1..=k_max {
        let l_k = scale(k);
        let l_prev = scale(k - 1);
        let l_next = scale(k + 1);
        out.push(LadderEntry {
            k,
            scale: format!("{}/{}", l_k.numer(), l_k.denom()),
            support: floor(&(ratio(15, 7) * &l_k)),
            support_next_form: floor(&(ratio(8, 7) * &l_next)),
            budget_exponent: ceil(&l_prev),
            collar: collar.clone(),
            resonance_cap: ceil(&(ratio(21, 5) * &l_k)) - 1,
        });
        collar += floor(&(l_k / BigInt::from(2)));
    }
    Ok(out)
}

pub fn entry(k: u32) -> Result<LadderEntry> {
    Ok(ladder(k)?.pop().expect("k >= 1"))
}

/// `c_{k+1} / L_k` as an exact rational.
pub fn collar_ratio(k: u32) -> Result<BigRational> {
    let next = entry(k + 1)?;
    Ok(BigRational::from_integer(next.collar) / scale(k))
}

/// Outcome of the two schedule identities at one `k`.
#[derive(Clone, Debug, Serialize)]
pub struct LadderIdentity {
    pub k: u32,
    #[serde(serialize_with = "decimal")]
    pub collar_next: BigInt,
    pub collar_bound: String,
    pub collar_ok: bool,
    pub supports_agree: bool,
}

/// Check `c_{k+1} ≤ (15/14) L_k` and `floor((15/7)L_k) = floor((8/7)L_{k+1})`
/// for `k = 1..=k_max`.
pub fn verify_identities(k_max: u32) -> Result<Vec<LadderIdentity>> {
    let rows = ladder(k_max + 1)?;
    Ok(rows
        .windows(2)
        .map(|w| {
            let (cur, next) = (&w[0], &w[1]);
            let bound = ratio(15, 14) * scale(cur.k);
            let c = BigRational::from_integer(next.collar.clone());
            LadderIdentity {
                k: cur.k,
                collar_next: next.collar.clone(),
                collar_bound: format!("{}/{}", bound.numer(), bound.denom()),
                collar_ok: c <= bound && !bound.is_zero(),
                supports_agree: cur.support == cur.support_next_form,
            }
        })
        .collect())
}

/// Runtime view of the schedule used by the flow and the family sampler.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderSchedule {
    pub entries: Vec<LadderEntry>,
}

impl LadderSchedule {
    pub fn new(k_max: u32) -> Result<Self> {
        Ok(LadderSchedule {
            entries: ladder(k_max)?,
        })
    }

    pub fn k_max(&self) -> u32 {
        self.entries.len() as u32
    }

    pub fn step(&self, k: u32) -> &LadderEntry {
        &self.entries[(k - 1) as usize]
    }

    /// `c′ χ^{ceil L_{k−1}}`.
    pub fn norm_budget(&self, k: u32, chi: f64, c_prime: f64) -> f64 {
        c_prime * chi.powi(self.step(k).budget_exponent_u32() as i32)
    }
}
