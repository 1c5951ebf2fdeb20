//! Bipartite entanglement entropies of eigenstates.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::circuit::Circuit;
use crate::dense::StateVector;
use crate::error::{Error, Result};
use crate::observables::spectrum::Spectrum;

/// Reduced-state eigenvalues below this are dropped.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Von Neumann entropy (natural log) of sites `0..cut` in `state`.
pub fn entanglement_entropy(state: &StateVector, cut: usize) -> Result<f64> {
    let n = state.n_sites();
    if cut > n {
        return Err(Error::param("cut", format!("{cut} exceeds {n} sites")));
    }
    if (state.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::param("state", format!("norm {} is not 1", state.norm())));
    }
    amplitude_entropy(state.amplitudes(), cut)
}

/// Entropy of the cut-reshaped amplitudes; bit `i` of the index is site `i`,
/// so the left sites are the low bits and the reshape is column-major.
fn amplitude_entropy(amps: &[C64], cut: usize) -> Result<f64> {
    let rows = 1usize << cut;
    let m = MatRef::from_column_major_slice(amps, rows, amps.len() / rows);
    let sv = m
        .singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(sv
        .iter()
        .map(|s| s * s)
        .filter(|&p| p > EIGENVALUE_FLOOR)
        .map(|p| -p * p.ln())
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropySample {
    pub seed: u64,
    /// Basis label `s` of `U†|s⟩`, or the eigenvalue index.
    pub state: usize,
    pub cut: usize,
    pub entropy: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyScan {
    pub n_sites: usize,
    pub samples: Vec<EntropySample>,
}

impl EntropyScan {
    pub fn new(n_sites: usize, samples: Vec<EntropySample>) -> Result<Self> {
        for s in &samples {
            let cap = std::f64::consts::LN_2 * s.cut.min(n_sites - s.cut) as f64;
            if !(s.entropy >= -1e-12 && s.entropy <= cap + 1e-10) {
                return Err(Error::invariant(
                    "entropy range",
                    format!(
                    "entropy {} at cut {} outside [0, {cap}]",
                        s.entropy, s.cut
                    ),
                ));
            }
        }
        Ok(EntropyScan { n_sites, samples })
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|s| s.entropy).sum::<f64>() / self.samples.len().max(1) as f64
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().map(|s| s.entropy).fold(0.0, f64::max)
    }

    /// `(L/2) ln 2`, the entropy of a random state across the middle cut.
    pub fn volume_law(&self) -> f64 {
        0.5 * self.n_sites as f64 * std::f64::consts::LN_2
    }
}

/// `U†|s⟩`, the eigenstate labelled `s` of a diagonalizing circuit.
pub fn circuit_eigenstate(circuit: &Circuit, s: usize) -> Result<StateVector> {
    let e = StateVector::basis(circuit.n_sites, s);
    StateVector::from_amplitudes(circuit.apply_vector(e.amplitudes(), true)?)
}

/// Entropies of `U†|s⟩` for every `s` in `states` and every cut.
pub fn circuit_entropies(circuit: &Circuit, seed: u64, states: &[usize], cuts: &[usize]) -> Result<Vec<EntropySample>> {
    let dim = circuit.dim();
    if let Some(&s) = states.iter().find(|&&s| s >= dim) {
        return Err(Error::param("states", format!("label {s} outside the space")));
    }
    let mut m = Mat::<C64>::zeros(dim, states.len());
    for (j, &s) in states.iter().enumerate() {
        m[(s, j)] = C64::new(1.0, 0.0);
    }
    let v = circuit.apply(m, true)?;
    let mut out = Vec::with_capacity(states.len() * cuts.len());
    for (j, &s) in states.iter().enumerate() {
        let amps: Vec<C64> = (0..dim).map(|i| v[(i, j)]).collect();
        let state = StateVector::from_amplitudes(amps)?;
        for &cut in cuts {
            out.push(EntropySample {
                seed,
                state: s,
                cut,
                entropy: entanglement_entropy(&state, cut)?,
            });
        }
    }
    Ok(out)
}

/// Entropies of every `stride`-th exact eigenstate at every cut.
pub fn spectrum_entropies(spec: &Spectrum, seed: u64, stride: usize, cuts: &[usize]) -> Result<Vec<EntropySample>> {
    if stride == 0 {
        return Err(Error::param("stride", "must be positive"));
    }
    let mut out = Vec::new();
    for k in (0..spec.dim()).step_by(stride) {
        let state = StateVector::from_amplitudes(spec.vector(k))?;
        for &cut in cuts {
            out.push(EntropySample {
                seed,
                state: k,
                cut,
                entropy: entanglement_entropy(&state, cut)?,
            });
        }
    }
    Ok(out)
}

/// Extremal resonance: sites `[0, 4h)` split into ancilla, region, region,
/// ancilla blocks of `h` sites; each ancilla site starts in a Bell pair with
/// the region site beside it, then the two region halves are swapped. The
/// state has entropy `2h ln 2` across the middle cut, the full `n_r ln 2` of a
/// resonant region of `n_r = 2h` sites. Returns the state and the cut.
pub fn swap_extremal_state(half: usize) -> Result<(StateVector, usize)> {
    if half == 0 || 4 * half > 20 {
        return Err(Error::param("half", "need 1..=5 sites per block"));
    }
    let n = 4 * half;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // Pairs (ancilla, region) after the swap: the left ancillas now pair with
    // the right region block and vice versa.
    let pairs: Vec<(usize, usize)> = (0..half)
        .map(|i| (i, 2 * half + i))
        .chain((0..half).map(|i| (3 * half + i, half + i)))
        .collect();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
    let amp = C64::new(r.powi(pairs.len() as i32), 0.0);
    for bits in 0..(1usize << pairs.len()) {
        let b = pairs
            .iter()
            .enumerate()
            .filter(|(j, _)| (bits >> j) & 1 == 1)
            .fold(0usize, |acc, (_, &(a, s))| acc | (1 << a) | (1 << s));
        amps[b] = amp;
    }
    Ok((StateVector::from_amplitudes(amps)?, 2 * half))
}
