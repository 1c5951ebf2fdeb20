//! The disordered transverse-field Ising chain
//! `H = γ Σ σx_i + Σ h_i σz_i + Σ J_i σz_i σz_{i+1}` with open boundaries.

use num_complex::Complex64 as C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::OperatorSum;
use crate::pauli::PauliString;

/// Name recorded with every realization. The stream is ChaCha20 keyed by
/// `seed_from_u64(seed)`; each uniform draw consumes one `next_u64` and maps
/// its top 53 bits to `[-1, 1)`.
pub const RNG_ID: &str = "chacha20-seed_from_u64-u53";

/// Seeded generator shared by every sampler in the crate.
pub fn rng_for(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Uniform on `[0, 1)` from the top 53 bits of one word.
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `[-1, 1)`.
pub fn symmetric_uniform(rng: &mut impl RngCore) -> f64 {
    2.0 * unit_uniform(rng) - 1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    #[serde(rename = "L")]
    pub length: usize,
    pub gamma: f64,
    pub h: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    pub rng_id: String,
}

impl DisorderRealization {
    /// Hand-built realization; `j` has one entry per bond.
    pub fn new(h: Vec<f64>, j: Vec<f64>, gamma: f64) -> Result<Self> {
        let length = h.len();
        if length == 0 {
            return Err(Error::param("h", "chain needs at least one site"));
        }
        if j.len() + 1 != length {
            return Err(Error::param("J", format!("expected {} bonds, got {}", length - 1, j.len())));
        }
        if h.iter().chain(&j).any(|v| !(v.abs() <= 1.0)) {
            return Err(Error::param("h/J", "entries must lie in [-1, 1]"));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::param("gamma", "must be finite and non-negative"));
        }
        Ok(DisorderRealization {
            seed: 0,
            length,
            gamma,
            h,
            j,
            rng_id: "manual".into(),
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Draw `h_1..h_L` and then `J_1..J_{L−1}` from the seeded stream.
pub fn sample_disorder(seed: u64, length: usize, gamma: f64) -> Result<DisorderRealization> {
    if length < 2 {
        return Err(Error::param("L", format!("need at least 2 sites, got {length}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::param("gamma", "must be finite and non-negative"));
    }
    let mut rng = rng_for(seed);
    let h = (0..length).map(|_| symmetric_uniform(&mut rng)).collect();
    let j = (0..length - 1).map(|_| symmetric_uniform(&mut rng)).collect();
    Ok(DisorderRealization {
        seed,
        length,
        gamma,
        h,
        j,
        rng_id: RNG_ID.into(),
    })
}

pub fn build_hamiltonian(r: &DisorderRealization) -> Result<OperatorSum> {
    let n = r.length;
    let mut h = OperatorSum::zero(n)?;
    let re = |v: f64| C64::new(v, 0.0);
    for i in 0..n {
        h.add_term(PauliString::sigma_x(n, i), re(r.gamma))?;
        h.add_term(PauliString::sigma_z(n, i), re(r.h[i]))?;
    }
    for (i, &j) in r.j.iter().enumerate() {
        h.add_term(PauliString::new(n, 0, 0b11 << i)?, re(j))?;
    }
    Ok(h)
}

/// Diagonal energy `Σ h_i s_i + Σ J_i s_i s_{i+1}` of a basis state, with
/// `s_i = +1` when bit `i` is clear.
pub fn classical_energy(r: &DisorderRealization, b: u64) -> f64 {
    let s = |i: usize| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 };
    let field: f64 = (0..r.length).map(|i| r.h[i] * s(i)).sum();
    let bonds: f64 = r.j.iter().enumerate().map(|(i, j)| j * s(i) * s(i + 1)).sum();
    field + bonds
}
