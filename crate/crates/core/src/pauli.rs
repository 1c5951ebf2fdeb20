//! Pauli words on a chain of at most 64 spins.
//!
//! A word is stored as a pair of bit masks `(x, z)`. Site `i` carries
//!
//! | x bit | z bit | factor |
//! |-------|-------|--------|
//! | 0     | 0     | 1      |
//! | 1     | 0     | σx     |
//! | 0     | 1     | σz     |
//! | 1     | 1     | σy     |
//!
//! so every word is a tensor product of Hermitian single-site Paulis and is
//! itself Hermitian. In terms of the bare flip and sign operators,
//! `W(x, z) = i^{|x∧z|} X^x Z^z` with `Z^z` acting first; any complex phase
//! lives in the coefficient of an [`OperatorSum`](crate::OperatorSum).
//!
//! Basis states are indexed little-endian: bit `i` of a basis index is the
//! state of site `i`, with 0 meaning σz = +1.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_SITES: usize = 64;

/// Power of `i` in {0, 1, 2, 3}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(e: u32) -> Self {
        Phase((e % 4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> C64 {
        match self.0 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// Inclusive, nonempty interval of sites. Empty supports are `None` at the
/// call sites that can produce them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupportInterval {
    pub lo: usize,
    pub hi: usize,
}

impl SupportInterval {
    pub fn new(lo: usize, hi: usize) -> Self {
        assert!(lo <= hi, "interval {lo}..={hi} is reversed");
        SupportInterval { lo, hi }
    }

    pub fn site(i: usize) -> Self {
        SupportInterval { lo: i, hi: i }
    }

    /// Distance between the leftmost and rightmost site, counted inclusively.
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Widen by `c` sites on each side, clipped to `[0, n_sites - 1]`.
    pub fn widen(&self, c: usize, n_sites: usize) -> Self {
        SupportInterval {
            lo: self.lo.saturating_sub(c),
            hi: (self.hi + c).min(n_sites - 1),
        }
    }

    pub fn contains(&self, other: &SupportInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn contains_site(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }

    pub fn overlaps(&self, other: &SupportInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &SupportInterval) -> Self {
        SupportInterval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// How far `self` reaches beyond `base`: the larger of the left and right
    /// overhangs, zero when contained.
    pub fn overhang(&self, base: &SupportInterval) -> usize {
        let left = base.lo.saturating_sub(self.lo);
        let right = self.hi.saturating_sub(base.hi);
        left.max(right)
    }

    /// Bit mask with the interval's sites set.
    pub fn mask(&self) -> u64 {
        let width = self.len();
        let ones = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        ones << self.lo
    }

    /// Smallest interval covering the set bits of `mask`.
    pub fn of_mask(mask: u64) -> Option<Self> {
        if mask == 0 {
            None
        } else {
            Some(SupportInterval {
                lo: mask.trailing_zeros() as usize,
                hi: 63 - mask.leading_zeros() as usize,
            })
        }
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<usize> {
        self.lo..=self.hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    n_sites: u8,
    x: u64,
    z: u64,
}

fn site_mask(n_sites: usize) -> u64 {
    if n_sites >= 64 {
        u64::MAX
    } else {
        (1u64 << n_sites) - 1
    }
}

impl PauliString {
    pub fn new(n_sites: usize, x: u64, z: u64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::param("n_sites", "must be positive"));
        }
        if n_sites > MAX_SITES {
            return Err(Error::TooManySites { n_sites });
        }
        let allowed = site_mask(n_sites);
        if (x | z) & !allowed != 0 {
            return Err(Error::param(
                "mask",
                format!("bits set beyond site {}", n_sites - 1),
            ));
        }
        Ok(PauliString {
            n_sites: n_sites as u8,
            x,
            z,
        })
    }

    /// Constructor for masks already known to fit.
    pub(crate) fn from_masks(n_sites: usize, x: u64, z: u64) -> Self {
        debug_assert!((x | z) & !site_mask(n_sites) == 0);
        PauliString {
            n_sites: n_sites as u8,
            x,
            z,
        }
    }

    pub fn identity(n_sites: usize) -> Self {
        PauliString::from_masks(n_sites, 0, 0)
    }

    pub fn sigma_x(n_sites: usize, site: usize) -> Self {
        PauliString::from_masks(n_sites, 1 << site, 0)
    }

    pub fn sigma_y(n_sites: usize, site: usize) -> Self {
        PauliString::from_masks(n_sites, 1 << site, 1 << site)
    }

    pub fn sigma_z(n_sites: usize, site: usize) -> Self {
        PauliString::from_masks(n_sites, 0, 1 << site)
    }

    /// Parse a word such as `"XIZY"`; the first character is site 0.
    pub fn parse(word: &str) -> Result<Self> {
        let n = word.chars().count();
        let (mut x, mut z) = (0u64, 0u64);
        for (i, ch) in word.chars().enumerate() {
            match ch {
                'I' | 'i' | '1' => {}
                'X' | 'x' => x |= 1 << i,
                'Z' | 'z' => z |= 1 << i,
                'Y' | 'y' => {
                    x |= 1 << i;
                    z |= 1 << i;
                }
                other => return Err(Error::param("word", format!("unknown letter {other:?}"))),
            }
        }
        PauliString::new(n, x, z)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Pure-σz words are diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn support(&self) -> Option<SupportInterval> {
        SupportInterval::of_mask(self.x | self.z)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Number of σy factors; `W = i^{y_count} X^x Z^z`.
    pub(crate) fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Move the word to a chain of `n_sites`, shifting sites by `offset`.
    pub fn embed(&self, n_sites: usize, offset: usize) -> Result<Self> {
        if offset + self.n_sites() > n_sites {
            return Err(Error::param(
                "offset",
                format!("{} + {} exceeds {n_sites} sites", offset, self.n_sites),
            ));
        }
        PauliString::new(n_sites, self.x << offset, self.z << offset)
    }

    /// Action on a computational basis state: `W|b⟩ = phase · |b'⟩`.
    pub fn apply_to_basis(&self, b: u64) -> (C64, u64) {
        let e = self.y_count() + 2 * (self.z & b).count_ones();
        (Phase::from_exponent(e).to_complex(), b ^ self.x)
    }

    pub fn label(&self) -> String {
        (0..self.n_sites())
            .map(|i| match ((self.x >> i) & 1, (self.z >> i) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            })
            .collect()
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Group law of the word basis: `p · q = phase · r`.
pub fn multiply(p: &PauliString, q: &PauliString) -> Result<(C64, PauliString)> {
    if p.n_sites != q.n_sites {
        return Err(Error::MismatchedSites {
            left: p.n_sites(),
            right: q.n_sites(),
        });
    }
    let (phase, r) = multiply_unchecked(p, q);
    Ok((phase.to_complex(), r))
}

#[inline]
pub(crate) fn multiply_unchecked(p: &PauliString, q: &PauliString) -> (Phase, PauliString) {
    let x = p.x ^ q.x;
    let z = p.z ^ q.z;
    let r = PauliString {
        n_sites: p.n_sites,
        x,
        z,
    };
    // i^{y_p} X^{x_p} Z^{z_p} i^{y_q} X^{x_q} Z^{z_q}
    //   = i^{y_p + y_q} (-1)^{|z_p ∧ x_q|} X^x Z^z = i^{y_p + y_q - y_r} (-1)^{...} W(x, z)
    let e = p.y_count() + q.y_count() + 2 * (p.z & q.x).count_ones() + 4 * 64 - r.y_count();
    (Phase::from_exponent(e), r)
}
