//! First-order Trotter circuits for layered local generators.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::chain::rng_for;
use crate::circuit::{encode_block, BlockFile, Circuit, CircuitStep, Direction, LocalUnitary, StraddlePolicy};
use crate::dense::{self, block_to_operator, local_block, to_dense_with_limit, DenseOperator, StateVector};
use crate::error::{Error, Result};
use crate::family::random_anti_hermitian;
use crate::operator::OperatorSum;
use crate::pauli::SupportInterval;

/// Gate windows of `window` sites, tiled with stride `window` inside each of
/// `layers` layers; layer `r` is offset by `r · window / layers` sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrotterScheme {
    pub window: usize,
    pub layers: usize,
}

impl TrotterScheme {
    /// Two-site gates in even and odd layers.
    pub const BOND: TrotterScheme = TrotterScheme { window: 2, layers: 2 };
    /// Sites grouped in pairs: depth 2 with 4-site gates.
    pub const PAIRED: TrotterScheme = TrotterScheme { window: 4, layers: 2 };
    /// Depth 3 with 3-site gates.
    pub const TRIPLE: TrotterScheme = TrotterScheme { window: 3, layers: 3 };

    fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.window < 2 || self.window % self.layers != 0 {
            return Err(Error::param("scheme", "window must be at least 2 and a multiple of layers"));
        }
        Ok(())
    }

    /// Window starts in sweep order: by position, which fixes the layer of
    /// every start.
    fn windows(&self, n: usize) -> Vec<(usize, SupportInterval)> {
        let shift = self.window / self.layers;
        let mut out: Vec<(usize, SupportInterval)> = (0..self.layers)
            .flat_map(|r| {
                (r * shift..n)
                    .step_by(self.window)
                    .map(move |lo| (r, SupportInterval::new(lo, (lo + self.window - 1).min(n - 1))))
            })
            .collect();
        out.sort_by_key(|(_, w)| w.lo);
        out
    }
}

/// One gate `e^{A_w / N}` for the generator terms assigned to window `w`.
#[derive(Clone, Debug)]
pub struct TrotterGate {
    pub layer: usize,
    pub gate: LocalUnitary,
}

#[derive(Clone, Debug)]
pub struct TrotterCircuit {
    pub n_sites: usize,
    pub steps: usize,
    pub scheme: TrotterScheme,
    /// Gates of one Trotter step; every step repeats them.
    pub gates: Vec<TrotterGate>,
}

/// Split `a` into window pieces: each Pauli term goes to the first window,
/// in position order, that contains its support; the identity component
/// commutes with everything and goes to the first window.
pub fn assign_to_windows(a: &OperatorSum, scheme: TrotterScheme) -> Result<Vec<(usize, SupportInterval, OperatorSum)>> {
    scheme.validate()?;
    let n = a.n_sites();
    let windows = scheme.windows(n);
    let mut parts: Vec<(usize, SupportInterval, OperatorSum)> = windows
        .iter()
        .map(|&(r, w)| Ok((r, w, OperatorSum::zero(n)?)))
        .collect::<Result<_>>()?;
    for (p, c) in a.terms() {
        let slot = match p.support() {
            None => 0,
            Some(s) => windows
                .iter()
                .position(|(_, w)| w.contains(&s))
                .ok_or(Error::NotBondLocal { lo: s.lo, hi: s.hi })?,
        };
        parts[slot].2.add_term(p, c)?;
    }
    Ok(parts.into_iter().filter(|(_, _, x)| !x.is_empty()).collect())
}

/// `(e^{A_{m−1}/N} ⋯ e^{A_0/N})^N` for the layers `A_r` of `a`.
pub fn build_trotter(a: &OperatorSum, steps: usize, scheme: TrotterScheme) -> Result<TrotterCircuit> {
    if steps == 0 {
        return Err(Error::param("N", "need at least one step"));
    }
    if !a.is_anti_hermitian(1e-12) {
        return Err(Error::NotAntiHermitian {
            deviation: a.anti_hermiticity_defect(),
        });
    }
    let inv = C64::new(1.0 / steps as f64, 0.0);
    let gates = assign_to_windows(a, scheme)?
        .into_iter()
        .map(|(layer, w, part)| {
            let block = local_block(&part.scale(inv), w)?;
            let u = DenseOperator::from_mat(block)?.expm_anti_hermitian()?.into_mat();
            let defect = (u.adjoint() * &u - Mat::<C64>::identity(u.nrows(), u.nrows())).norm_max();
            if defect > 1e-12 {
                return Err(Error::invariant("gate unitarity", format!("defect {defect:e}")));
            }
            Ok(TrotterGate {
                layer,
                gate: LocalUnitary::new(w, u)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrotterCircuit {
        n_sites: a.n_sites(),
        steps,
        scheme,
        gates,
    })
}

#[derive(Serialize)]
struct GateFile {
    step: usize,
    layer: usize,
    #[serde(flatten)]
    block: BlockFile,
}

#[derive(Serialize)]
struct TrotterFile {
    format: &'static str,
    n_sites: usize,
    steps: usize,
    scheme: TrotterScheme,
    gates: Vec<GateFile>,
}

impl TrotterCircuit {
    /// Number of layers applied in sequence.
    pub fn depth(&self) -> usize {
        self.scheme.layers * self.steps
    }

    /// Sites by which the causal cone of an observable can grow through the
    /// whole circuit: `window − 1` per layer.
    pub fn min_collar(&self) -> usize {
        self.depth() * (self.scheme.window - 1)
    }

    /// The gates as a circuit, one circuit step per layer, last layer first
    /// within each Trotter step.
    pub fn to_circuit(&self) -> Circuit {
        let mut steps = Vec::with_capacity(self.depth());
        for s in 0..self.steps {
            for r in (0..self.scheme.layers).rev() {
                steps.push(CircuitStep {
                    k: (s * self.scheme.layers + (self.scheme.layers - 1 - r)) as u32 + 1,
                    terms: Vec::new(),
                    rotations: self.gates.iter().filter(|g| g.layer == r).map(|g| g.gate.clone()).collect(),
                });
            }
        }
        Circuit {
            n_sites: self.n_sites,
            steps,
        }
    }

    /// Only the gates inside `base` widened by `c`.
    pub fn collared(&self, base: SupportInterval, c: usize) -> Circuit {
        self.to_circuit().truncated(base, c, StraddlePolicy::Drop).0
    }

    pub fn to_json(&self) -> Result<String> {
        let gates = (0..self.steps)
            .flat_map(|step| {
                self.gates.iter().map(move |g| GateFile {
                    step,
                    layer: g.layer,
                    block: encode_block(g.gate.interval, g.gate.unitary.as_ref()),
                })
            })
            .collect();
        Ok(serde_json::to_string(&TrotterFile {
            format: "quasilocal-trotter-v1",
            n_sites: self.n_sites,
            steps: self.steps,
            scheme: self.scheme,
            gates,
        })?)
    }
}

/// `‖e^A − U_T‖`.
pub fn trotter_error(a: &OperatorSum, steps: usize, scheme: TrotterScheme, dense_limit: usize) -> Result<f64> {
    let exact = to_dense_with_limit(a, dense_limit)?.expm_anti_hermitian()?;
    let ut = build_trotter(a, steps, scheme)?.to_circuit().dense_unitary()?;
    dense::op_norm(&exact.sub(&ut)?)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConjugationError {
    /// `‖e^A X e^{−A} − U_T^{(c)} X U_T^{(c)†}‖`.
    pub error: f64,
    /// `‖U_T X U_T† − U_T^{(c)} X U_T^{(c)†}‖`, zero up to rounding by causal-cone cancellation.
    pub cone_difference: f64,
}

/// Error of the collared Trotter circuit on `x`, for a collar `c` around the
/// support of `x` that covers its causal cone.
pub fn conjugation_error(
    x: &OperatorSum,
    a: &OperatorSum,
    steps: usize,
    c: usize,
    scheme: TrotterScheme,
    dense_limit: usize,
) -> Result<ConjugationError> {
    let trotter = build_trotter(a, steps, scheme)?;
    let required = trotter.min_collar();
    if c < required {
        return Err(Error::CollarTooSmall { collar: c, required });
    }
    let xd = to_dense_with_limit(x, dense_limit)?;
    let ad = to_dense_with_limit(a, dense_limit)?;
    let ea = ad.expm_anti_hermitian()?;
    let exact = ea.matmul(&xd)?.matmul(&ea.adjoint())?;
    let whole = trotter.to_circuit().conjugate_dense(xd.mat(), Direction::PhysicalToLogical)?;
    let Some(base) = x.support() else {
        let error = dense::op_norm(&DenseOperator::from_mat(exact.mat() - &whole)?)?;
        return Ok(ConjugationError {
            error,
            cone_difference: 0.0,
        });
    };
    let collared = trotter.collared(base, c).conjugate_dense(xd.mat(), Direction::PhysicalToLogical)?;
    let cone_difference = dense::op_norm(&DenseOperator::from_mat(&whole - &collared)?)?;
    if cone_difference > 1e-12 * xd.max_abs().max(1.0) {
        return Err(Error::invariant(
            "causal cone",
            format!("whole-chain and collared conjugations differ by {cone_difference:e}"),
        ));
    }
    Ok(ConjugationError {
        error: dense::op_norm(&DenseOperator::from_mat(exact.mat() - &collared)?)?,
        cone_difference,
    })
}

/// A sum of independent random anti-Hermitian two-site terms, one per bond,
/// each with operator norm `norm`.
pub fn random_bond_generator(n: usize, norm: f64, seed: u64) -> Result<OperatorSum> {
    let mut rng = rng_for(seed);
    let mut out = OperatorSum::zero(n)?;
    for i in 0..n.saturating_sub(1) {
        let block = random_anti_hermitian(4, &mut rng);
        let d = DenseOperator::from_mat(block)?;
        let s = norm / dense::op_norm(&d.scale(C64::new(0.0, 1.0)))?;
        let term = block_to_operator(d.scale(C64::new(s, 0.0)).mat(), SupportInterval::new(i, i + 1), n, 0.0)?;
        out = out.add(&term)?;
    }
    Ok(out)
}

/// Reduced density matrix of `state` on the sites of `window`.
pub fn reduced_density_matrix(state: &StateVector, window: SupportInterval) -> Result<Mat<C64>> {
    let n = state.n_sites();
    if window.hi >= n {
        return Err(Error::param("window", "outside the chain"));
    }
    let k = window.len();
    let local = 1usize << k;
    let rest = 1usize << (n - k);
    let low = (1usize << window.lo) - 1;
    let amps = state.amplitudes();
    let m = Mat::<C64>::from_fn(local, rest, |a, r| {
        let b = (r & low) | (a << window.lo) | ((r >> window.lo) << (window.hi + 1));
        amps[b]
    });
    Ok(&m * m.adjoint())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensityMatrixError {
    pub max_element: f64,
    pub op_norm: f64,
}

pub fn density_matrix_error(state: &StateVector, reference: &StateVector, window: SupportInterval) -> Result<DensityMatrixError> {
    if state.n_sites() != reference.n_sites() {
        return Err(Error::MismatchedSites {
            left: state.n_sites(),
            right: reference.n_sites(),
        });
    }
    let d = reduced_density_matrix(state, window)? - reduced_density_matrix(reference, window)?;
    Ok(DensityMatrixError {
        max_element: d.norm_max(),
        op_norm: dense::op_norm(&DenseOperator::from_mat(d)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::linear_fit;
    use crate::pauli::PauliString;
    use base64::Engine;

    fn i_word(p: PauliString, c: f64) -> OperatorSum {
        OperatorSum::from_word(p, C64::new(0.0, c))
    }

    #[test]
    fn zero_generator_gives_identity() {
        let t = build_trotter(&OperatorSum::zero(5).unwrap(), 3, TrotterScheme::BOND).unwrap();
        assert!(t.to_circuit().is_identity());
    }

    #[test]
    fn commuting_layers_are_exact() {
        let mut a = i_word(PauliString::new(6, 0, 0b000011).unwrap(), 0.3);
        a = a.add(&i_word(PauliString::new(6, 0, 0b000110).unwrap(), -0.2)).unwrap();
        a = a.add(&i_word(PauliString::new(6, 0, 0b011000).unwrap(), 0.7)).unwrap();
        assert!(trotter_error(&a, 1, TrotterScheme::BOND, 12).unwrap() < 1e-12);
    }

    #[test]
    fn error_falls_as_one_over_n() {
        let a = random_bond_generator(8, 0.1, 5).unwrap();
        let ns = [1usize, 2, 4, 8, 16];
        let errs: Vec<f64> = ns.iter().map(|&n| trotter_error(&a, n, TrotterScheme::BOND, 12).unwrap()).collect();
        let fit = linear_fit(
            &ns.iter().map(|&n| (n as f64).ln()).collect::<Vec<_>>(),
            &errs.iter().map(|e| e.ln()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((fit.slope + 1.0).abs() <= 0.15, "slope {}", fit.slope);
    }

    #[test]
    fn collared_circuit_matches_whole_chain() {
        let a = random_bond_generator(10, 0.2, 8).unwrap();
        let x = OperatorSum::from_word(PauliString::sigma_z(10, 5), C64::new(1.0, 0.0));
        let r = conjugation_error(&x, &a, 2, 4, TrotterScheme::BOND, 12).unwrap();
        assert!(r.cone_difference < 1e-12);
        assert!(matches!(
            conjugation_error(&x, &a, 2, 3, TrotterScheme::BOND, 12),
            Err(Error::CollarTooSmall { collar: 3, required: 4 })
        ));
    }

    #[test]
    fn identity_observable_has_no_error() {
        let a = random_bond_generator(5, 0.3, 2).unwrap();
        let x = OperatorSum::identity(5).unwrap();
        assert!(conjugation_error(&x, &a, 1, 2, TrotterScheme::BOND, 12).unwrap().error < 1e-12);
    }

    #[test]
    fn conjugation_error_is_quadratic_in_gate_norm() {
        let x = OperatorSum::from_word(PauliString::sigma_z(8, 4), C64::new(1.0, 0.0));
        let norms = [0.02, 0.04, 0.08, 0.16];
        let errs: Vec<f64> = norms
            .iter()
            .map(|&g| conjugation_error(&x, &random_bond_generator(8, g, 3).unwrap(), 1, 2, TrotterScheme::BOND, 12).unwrap().error)
            .collect();
        let fit = linear_fit(
            &norms.iter().map(|g| g.ln()).collect::<Vec<_>>(),
            &errs.iter().map(|e| e.ln()).collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((fit.slope - 2.0).abs() <= 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn grouped_schemes_share_first_order_scaling() {
        let a = random_bond_generator(8, 0.1, 11).unwrap();
        for scheme in [TrotterScheme::PAIRED, TrotterScheme::TRIPLE] {
            let e1 = trotter_error(&a, 2, scheme, 12).unwrap();
            let e2 = trotter_error(&a, 8, scheme, 12).unwrap();
            let slope = (e2 / e1).ln() / 4f64.ln();
            assert!((slope + 1.0).abs() < 0.15, "{scheme:?}: {slope}");
        }
    }

    #[test]
    fn wide_term_rejected_by_bond_scheme() {
        let a = i_word(PauliString::new(5, 0b00101, 0).unwrap(), 0.1);
        assert!(matches!(
            build_trotter(&a, 1, TrotterScheme::BOND),
            Err(Error::NotBondLocal { lo: 0, hi: 2 })
        ));
        assert!(build_trotter(&a, 1, TrotterScheme::TRIPLE).is_ok());
    }

    #[test]
    fn export_lists_every_gate_per_step() {
        let t = build_trotter(&random_bond_generator(4, 0.1, 1).unwrap(), 2, TrotterScheme::BOND).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        let gates = v["gates"].as_array().unwrap();
        assert_eq!(gates.len(), 2 * 3);
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(gates[0]["data"].as_str().unwrap())
            .unwrap();
        assert_eq!(bytes.len(), 16 * 16);
    }

    #[test]
    fn density_matrix_metrics() {
        let s = StateVector::basis(4, 0b0000);
        let o = StateVector::basis(4, 0b0010);
        let w = SupportInterval::new(1, 2);
        assert_eq!(density_matrix_error(&s, &s, w).unwrap(), DensityMatrixError { max_element: 0.0, op_norm: 0.0 });
        let e = density_matrix_error(&s, &o, w).unwrap();
        assert!(e.op_norm <= 2.0 && (e.op_norm - 1.0).abs() < 1e-12);
        let rho = reduced_density_matrix(&o, w).unwrap();
        assert!((rho[(1, 1)].re - 1.0).abs() < 1e-15);
    }
}
