//! Iterative quasi-local diagonalization of a chain Hamiltonian.
//!
//! Each step `k` removes the off-diagonal matrix elements whose flip pattern
//! fits the step window, using first-order generators
//! `A_{σ′σ} = V_{σ′σ} / (E_{σ′} − E_σ)` with energies taken from the current
//! diagonal restricted to a collar of `c_k` sites around the flipped spins.
//! Elements with small denominators are withheld and their sites are rotated
//! exactly by block diagonalization instead. Within one step the generator
//! `e^{A}` acts first and the block rotations second.

use std::collections::BTreeMap;

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::circuit::{Circuit, CircuitStep, LocalTerm, LocalUnitary};
use crate::dense::{self, local_block, restrict_to, to_dense_with_limit, walsh_hadamard, DenseOperator};
use crate::error::{Error, Result};
use crate::ladder::LadderSchedule;
use crate::operator::OperatorSum;
use crate::pauli::{PauliString, SupportInterval};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, Serialize)]
pub struct FlowOptions {
    pub k_max: u32,
    /// Resonance threshold: an element is resonant when `|ΔE| < eps_res · |V|`.
    pub eps_res: f64,
    /// Target off-diagonal residual (Pauli one-norm).
    pub tolerance: f64,
    /// Matrix elements at or below this magnitude are ignored.
    pub element_cutoff: f64,
    /// Attempts per step; each retry doubles `eps_res`.
    pub max_retries: u32,
    /// Minimum number of sites added on each side of a resonant core before
    /// rotating; the schedule collar `c_k` is used when it is larger.
    pub resonance_collar: usize,
    pub dense_limit: usize,
    /// Generator blocks up to this width get an exact operator norm; wider ones
    /// record the one-norm bound.
    pub norm_width_limit: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            k_max: 12,
            eps_res: 2.0,
            tolerance: 1e-8,
            element_cutoff: 1e-14,
            max_retries: 4,
            resonance_collar: 1,
            dense_limit: dense::DEFAULT_DENSE_LIMIT,
            norm_width_limit: 8,
        }
    }
}

/// One local generator `A^(k)_i`: all terms whose leftmost site is `site`.
#[derive(Clone, Debug)]
pub struct GeneratorTerm {
    pub site: usize,
    pub support: SupportInterval,
    pub op: OperatorSum,
    pub norm: f64,
    /// `norm` is the one-norm bound rather than the operator norm.
    pub norm_is_bound: bool,
}

#[derive(Clone, Debug)]
pub struct GeneratorLayer {
    pub k: u32,
    pub n_sites: usize,
    pub terms: Vec<GeneratorTerm>,
}

impl GeneratorLayer {
    pub fn empty(k: u32, n_sites: usize) -> Self {
        GeneratorLayer {
            k,
            n_sites,
            terms: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn sum(&self) -> Result<OperatorSum> {
        let mut out = OperatorSum::zero(self.n_sites)?;
        for t in &self.terms {
            out = out.add(&t.op)?;
        }
        Ok(out)
    }

    pub fn max_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.norm).fold(0.0, f64::max)
    }

    /// Split an operator into per-leftmost-site groups.
    pub fn from_operator(k: u32, op: &OperatorSum, norm_width_limit: usize) -> Result<Self> {
        let n = op.n_sites();
        let mut groups: BTreeMap<usize, OperatorSum> = BTreeMap::new();
        for (p, c) in op.terms() {
            let Some(s) = p.support() else { continue };
            groups
                .entry(s.lo)
                .or_insert_with(|| OperatorSum::zero(n).expect("valid site count"))
                .add_term(p, c)?;
        }
        let mut terms = Vec::with_capacity(groups.len());
        for (site, op) in groups {
            let support = op.support().expect("group is not the identity");
            let (norm, norm_is_bound) = if support.len() <= norm_width_limit {
                let block = DenseOperator::from_mat(local_block(&op, support)?)?;
                (block.op_norm()?, false)
            } else {
                (op.one_norm(), true)
            };
            terms.push(GeneratorTerm {
                site,
                support,
                op,
                norm,
                norm_is_bound,
            });
        }
        Ok(GeneratorLayer { k, n_sites: n, terms })
    }
}

/// A block rotation on `interval`; `core` holds the resonant flips.
#[derive(Clone, Debug)]
pub struct ResonanceRegion {
    pub k: u32,
    pub core: SupportInterval,
    pub interval: SupportInterval,
    /// `2^|interval|` unitary, filled in when the layer is applied.
    pub rotation: Option<Mat<C64>>,
}

impl ResonanceRegion {
    /// True for a nonzero flip pattern inside the core, i.e. one the block
    /// rotation is responsible for.
    pub fn captures(&self, flip: u64) -> bool {
        flip != 0 && flip & !self.core.mask() == 0
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StepDiagnostics {
    pub k: u32,
    pub attempt: u32,
    pub eps_res: f64,
    pub accepted: bool,
    pub eligible_elements: usize,
    pub generator_elements: usize,
    pub resonant_elements: usize,
    pub withheld_elements: usize,
    pub resonance_count: usize,
    pub resonant_sites: usize,
    pub max_inverse_denominator: f64,
    pub truncated_generator_norm: f64,
    pub residual_before: f64,
    pub residual_after: f64,
}

#[derive(Clone, Debug)]
pub struct FlowStep {
    pub layer: GeneratorLayer,
    pub regions: Vec<ResonanceRegion>,
    pub diagnostics: StepDiagnostics,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub n_sites: usize,
    pub steps: Vec<FlowStep>,
    pub h_diag: OperatorSum,
    pub residual: f64,
    /// Residual before the first step and after every accepted step.
    pub residual_history: Vec<f64>,
    /// Every attempt, accepted or not.
    pub attempts: Vec<StepDiagnostics>,
    /// `U` with `U H U† ≈ H_diag` (dense mode only).
    pub unitary: Option<DenseOperator>,
    /// Diagonal of the final rotated Hamiltonian (dense mode only).
    pub diagonal: Vec<f64>,
}

impl FlowResult {
    /// Fraction of sites covered by step-`k` resonance cores.
    pub fn resonant_fraction(&self, k: u32) -> f64 {
        let mut mask = 0u64;
        for step in self.steps.iter().filter(|s| s.layer.k == k) {
            for r in &step.regions {
                mask |= r.core.mask();
            }
        }
        mask.count_ones() as f64 / self.n_sites as f64
    }

    /// The flow unitary as a layered circuit, one step per accepted layer.
    pub fn circuit(&self) -> Result<Circuit> {
        let steps = self
            .steps
            .iter()
            .map(|step| {
                let terms = step
                    .layer
                    .terms
                    .iter()
                    .map(|t| LocalTerm::new(t.support, local_block(&t.op, t.support)?))
                    .collect::<Result<Vec<_>>>()?;
                let rotations = step
                    .regions
                    .iter()
                    .map(|r| {
                        let u = r
                            .rotation
                            .clone()
                            .ok_or_else(|| Error::invariant("flow circuit", "region without rotation"))?;
                        LocalUnitary::new(r.interval, u)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(CircuitStep {
                    k: step.layer.k,
                    terms,
                    rotations,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Circuit {
            n_sites: self.n_sites,
            steps,
        })
    }
}

/// Pauli one-norm of the off-diagonal part of a dense matrix.
pub fn off_diagonal_norm(m: MatRef<'_, C64>) -> f64 {
    let d = m.nrows();
    let inv = 1.0 / d as f64;
    let mut buf = vec![ZERO; d];
    let mut total = 0.0;
    for f in 1..d {
        for (b, v) in buf.iter_mut().enumerate() {
            *v = m[(b ^ f, b)];
        }
        walsh_hadamard(&mut buf);
        total += buf.iter().map(|g| g.norm()).sum::<f64>() * inv;
    }
    total
}

/// Diagonal energies averaged over every spin outside `w`, which equals the
/// diagonal keeping only the couplings `J_s` with `s ⊆ w`.
fn window_energies(diag: &[f64], n_sites: usize, w: SupportInterval) -> Vec<f64> {
    let mut e = diag.to_vec();
    for bit in (0..n_sites).filter(|&b| !w.contains_site(b)) {
        let m = 1usize << bit;
        for b in 0..e.len() {
            if b & m == 0 {
                let avg = 0.5 * (e[b] + e[b | m]);
                e[b] = avg;
                e[b | m] = avg;
            }
        }
    }
    e
}

/// Merge cores whose collared intervals overlap, then clip to the cap.
fn merge_regions(
    mut cores: Vec<SupportInterval>,
    k: u32,
    collar: usize,
    cap: usize,
    n_sites: usize,
) -> Vec<ResonanceRegion> {
    cores.sort();
    cores.dedup();
    let mut merged: Vec<SupportInterval> = Vec::new();
    for c in cores {
        match merged.last_mut() {
            Some(last) if last.widen(collar, n_sites).overlaps(&c.widen(collar, n_sites)) => {
                *last = last.hull(&c);
            }
            _ => merged.push(c),
        }
    }
    merged
        .into_iter()
        .map(|mut core| {
            while core.widen(collar, n_sites).len() > cap && core.len() > 1 {
                if core.len() % 2 == 0 {
                    core.hi -= 1;
                } else {
                    core.lo += 1;
                }
            }
            let mut interval = core.widen(collar, n_sites);
            while interval.len() > cap {
                if interval.hi > core.hi {
                    interval.hi -= 1;
                } else {
                    interval.lo += 1;
                }
            }
            ResonanceRegion {
                k,
                core,
                interval,
                rotation: None,
            }
        })
        .collect()
}

/// Output of [`step_generator`].
#[derive(Clone, Debug)]
pub struct StepProposal {
    pub layer: GeneratorLayer,
    pub regions: Vec<ResonanceRegion>,
    pub generator: Mat<C64>,
    pub diagnostics: StepDiagnostics,
}

/// Build the step-`k` generator and resonance regions from the dense matrix `m`.
pub fn step_generator(
    m: MatRef<'_, C64>,
    n_sites: usize,
    k: u32,
    schedule: &LadderSchedule,
    eps_res: f64,
    opts: &FlowOptions,
) -> Result<StepProposal> {
    let d = m.nrows();
    let entry = schedule.step(k);
    let support_cap = entry.support_usize();
    let collar = entry.collar_usize();
    let diag: Vec<f64> = (0..d).map(|i| m[(i, i)].re).collect();
    let mut energies: BTreeMap<SupportInterval, Vec<f64>> = BTreeMap::new();

    let mut diagnostics = StepDiagnostics {
        k,
        eps_res,
        ..StepDiagnostics::default()
    };
    let mut cores = Vec::new();
    let mut tentative: Vec<(usize, usize, C64, u64)> = Vec::new();
    for f in 1..d {
        let hull = SupportInterval::of_mask(f as u64).expect("f is nonzero");
        let w = hull.widen(collar, n_sites);
        if w.len() > support_cap {
            continue;
        }
        let low = f & f.wrapping_neg();
        for s in (0..d).filter(|s| s & low == 0) {
            let sp = s ^ f;
            let v = m[(sp, s)];
            if v.norm() <= opts.element_cutoff {
                continue;
            }
            diagnostics.eligible_elements += 1;
            let e = energies
                .entry(w)
                .or_insert_with(|| window_energies(&diag, n_sites, w));
            let de = e[sp] - e[s];
            if de.abs() < eps_res * v.norm() {
                diagnostics.resonant_elements += 1;
                cores.push(hull);
                continue;
            }
            if de == 0.0 {
                return Err(Error::ZeroDenominator { step: k as usize });
            }
            tentative.push((sp, s, v / de, f as u64));
            diagnostics.max_inverse_denominator = diagnostics.max_inverse_denominator.max(1.0 / de.abs());
        }
    }

    let regions = merge_regions(
        cores,
        k,
        opts.resonance_collar.max(collar),
        entry.resonance_cap_usize(),
        n_sites,
    );
    let cores: u64 = regions.iter().fold(0, |acc, r| acc | r.core.mask());
    diagnostics.resonance_count = regions.len();
    diagnostics.resonant_sites = cores.count_ones() as usize;

    let mut a = Mat::<C64>::zeros(d, d);
    for (sp, s, g, f) in tentative {
        if regions.iter().any(|r| r.captures(f)) {
            diagnostics.withheld_elements += 1;
            continue;
        }
        diagnostics.generator_elements += 1;
        a[(sp, s)] = g;
        a[(s, sp)] = -g.conj();
    }

    // Keep only Pauli terms that fit the step window.
    let full = dense::from_dense(&DenseOperator::from_mat(a)?, 0.0)?;
    let kept = full.filter(|p| p.support().is_some_and(|s| s.len() <= support_cap));
    diagnostics.truncated_generator_norm = full.one_norm() - kept.one_norm();
    let kept = kept.with_drop_tolerance(opts.element_cutoff);
    let generator = to_dense_with_limit(&kept, opts.dense_limit)?.into_mat();
    let layer = GeneratorLayer::from_operator(k, &kept, opts.norm_width_limit)?;
    Ok(StepProposal {
        layer,
        regions,
        generator,
        diagnostics,
    })
}

/// Exact block diagonalization of the restriction of `m` to the region
/// interval, one core block per configuration of the collar spins.
/// Eigenvectors are matched to basis states by largest overlap and phased so
/// the matched amplitude is real and positive; the returned `R` satisfies
/// `R h R† = diag` on every collar sector.
pub fn block_rotation(m: MatRef<'_, C64>, region: &ResonanceRegion) -> Result<Mat<C64>> {
    let h = restrict_to(m, region.interval);
    let local = 1usize << region.interval.len();
    let core_shift = region.core.lo - region.interval.lo;
    let core_bits = region.core.len();
    let core_mask = ((1usize << core_bits) - 1) << core_shift;
    let mut rotation = Mat::<C64>::zeros(local, local);
    for cfg in (0..local).filter(|c| c & core_mask == 0) {
        let idx: Vec<usize> = (0..1usize << core_bits).map(|c| cfg | (c << core_shift)).collect();
        let n = idx.len();
        let block = DenseOperator::from_mat(Mat::from_fn(n, n, |i, j| h[(idx[i], idx[j])]))?;
        let (_, vecs) = block.hermitian_eigen()?;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for j in 0..n {
            for b in 0..n {
                pairs.push((vecs[(b, j)].norm_sqr(), b, j));
            }
        }
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut basis_used = vec![false; n];
        let mut vec_used = vec![false; n];
        for (_, b, j) in pairs {
            if basis_used[b] || vec_used[j] {
                continue;
            }
            basis_used[b] = true;
            vec_used[j] = true;
            let amp = vecs[(b, j)];
            let phase = if amp.norm() > 0.0 { amp.conj() / amp.norm() } else { C64::new(1.0, 0.0) };
            // Row b of R = (phased eigenvector j)†.
            for r in 0..n {
                rotation[(idx[b], idx[r])] = (vecs[(r, j)] * phase).conj();
            }
        }
    }
    Ok(rotation)
}

/// `O e^{A} h e^{−A} O†` for dense `h`; returns the rotated matrix, the step
/// unitary `O e^{A}` and the regions with their rotations filled in.
pub fn apply_layer(
    h: MatRef<'_, C64>,
    n_sites: usize,
    proposal: &StepProposal,
) -> Result<(Mat<C64>, Mat<C64>, Vec<ResonanceRegion>)> {
    for term in &proposal.layer.terms {
        for (p, _) in term.op.terms() {
            for r in &proposal.regions {
                if r.captures(p.x_mask()) {
                    return Err(Error::ResonanceOverlap {
                        term: (term.support.lo, term.support.hi),
                        region: (r.core.lo, r.core.hi),
                    });
                }
            }
        }
    }
    let a = DenseOperator::from_mat(proposal.generator.clone())?;
    let (mut m, mut u) = if proposal.layer.is_empty() {
        let d = h.nrows();
        (h.to_owned(), Mat::<C64>::identity(d, d))
    } else {
        let ua = a.expm_anti_hermitian()?.into_mat();
        (&ua * h * ua.adjoint(), ua)
    };
    let mut regions = proposal.regions.clone();
    for region in &mut regions {
        let block = block_rotation(m.as_ref(), region)?;
        let unitarity = {
            let n = block.nrows();
            (block.adjoint() * &block - Mat::<C64>::identity(n, n)).norm_max()
        };
        if unitarity > 1e-10 {
            return Err(Error::invariant(
                "block rotation unitary",
                format!("defect {unitarity:e}"),
            ));
        }
        let full = DenseOperator::embed_block(block.as_ref(), region.interval.lo, n_sites)?.into_mat();
        m = &full * &m * full.adjoint();
        u = &full * &u;
        region.rotation = Some(block);
    }
    // Restore exact Hermiticity lost to rounding.
    let d = m.nrows();
    let m = Mat::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    Ok((m, u, regions))
}

/// Run the flow on a Hamiltonian small enough for dense matrices.
pub fn run_flow(h: &OperatorSum, opts: &FlowOptions) -> Result<FlowResult> {
    let n = h.n_sites();
    if !h.is_hermitian(1e-12) {
        return Err(Error::param("H", "must be Hermitian"));
    }
    let schedule = LadderSchedule::new(opts.k_max)?;
    let mut m = to_dense_with_limit(h, opts.dense_limit)?.into_mat();
    let d = m.nrows();
    let mut u = Mat::<C64>::identity(d, d);
    let mut residual = off_diagonal_norm(m.as_ref());
    let mut history = vec![residual];
    let mut steps = Vec::new();
    let mut attempts = Vec::new();

    for k in 1..=opts.k_max {
        if residual < opts.tolerance {
            break;
        }
        let mut eps = opts.eps_res;
        for attempt in 0..=opts.max_retries {
            let mut proposal = step_generator(m.as_ref(), n, k, &schedule, eps, opts)?;
            proposal.diagnostics.attempt = attempt;
            proposal.diagnostics.residual_before = residual;
            if proposal.layer.is_empty() && proposal.regions.is_empty() {
                proposal.diagnostics.residual_after = residual;
                proposal.diagnostics.accepted = true;
                attempts.push(proposal.diagnostics);
                break;
            }
            let (m_next, u_step, regions) = apply_layer(m.as_ref(), n, &proposal)?;
            let next = off_diagonal_norm(m_next.as_ref());
            proposal.diagnostics.residual_after = next;
            let accepted = next <= residual;
            proposal.diagnostics.accepted = accepted;

            attempts.push(proposal.diagnostics.clone());
            if accepted {
                m = m_next;
                u = &u_step * &u;
                residual = next;
                history.push(residual);
                steps.push(FlowStep {
                    layer: proposal.layer,
                    regions,
                    diagnostics: proposal.diagnostics,
                });
                break;
            }
            eps *= 2.0;
        }
    }

    if residual >= opts.tolerance {
        return Err(Error::FlowNonConvergence {
            steps: steps.len(),
            residual,
            tolerance: opts.tolerance,
            residual_history: history,
        });
    }
    let md = DenseOperator::from_mat(m)?;
    let h_diag = dense::from_dense(&md, 1e-14)?.diagonal_part();
    let diagonal = (0..d).map(|i| md.get(i, i).re).collect();
    Ok(FlowResult {
        n_sites: n,
        steps,
        h_diag,
        residual,
        residual_history: history,
        attempts,
        unitary: Some(DenseOperator::from_mat(u)?),
        diagonal,
    })
}

/// One diagonal coupling `J_s Π_{i∈s} σz_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coupling {
    /// Consecutive support of `s`.
    pub d: usize,
    pub s_bitmask: u64,
    #[serde(rename = "J_s")]
    pub j_s: f64,
}

/// All nonzero `J_s` of a diagonal operator, sorted by `(d, s)`.
pub fn extract_js(h_diag: &OperatorSum) -> Result<Vec<Coupling>> {
    let off = h_diag.off_diagonal_part().one_norm();
    if off > 1e-10 {
        return Err(Error::NotDiagonal { norm: off });
    }
    let mut out: Vec<Coupling> = h_diag
        .terms()
        .map(|(p, c)| Coupling {
            d: p.support().map_or(0, |s| s.len()),
            s_bitmask: p.z_mask(),
            j_s: c.re,
        })
        .collect();
    out.sort_by(|a, b| a.d.cmp(&b.d).then(a.s_bitmask.cmp(&b.s_bitmask)));
    Ok(out)
}

/// `max |J_s|` for each consecutive support `d = 1..=n_sites`.
pub fn max_coupling_by_range(couplings: &[Coupling], n_sites: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; n_sites];
    for c in couplings.iter().filter(|c| c.d >= 1) {
        out[c.d - 1] = out[c.d - 1].max(c.j_s.abs());
    }
    out
}

/// Pure-z word helper used by tests and experiments.
pub fn z_word(n_sites: usize, s: u64) -> Result<PauliString> {
    PauliString::new(n_sites, 0, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_hamiltonian, sample_disorder, DisorderRealization};

    #[test]
    fn zero_field_is_identity_flow() {
        let r = sample_disorder(4, 6, 0.0).unwrap();
        let h = build_hamiltonian(&r).unwrap();
        let out = run_flow(&h, &FlowOptions::default()).unwrap();
        assert!(out.steps.is_empty());
        assert!(out.h_diag.sub(&h).unwrap().one_norm() < 1e-12);
    }

    #[test]
    fn single_site_converges_with_signed_field() {
        let r = DisorderRealization::new(vec![0.3], vec![], 0.2).unwrap();
        let h = build_hamiltonian(&r).unwrap();
        let out = run_flow(&h, &FlowOptions::default()).unwrap();
        let js = extract_js(&out.h_diag).unwrap();
        let z = js.iter().find(|c| c.s_bitmask == 1).unwrap();
        assert!((z.j_s - (0.13f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn window_energy_drops_outside_terms() {
        // d = h0 s0 + h1 s1 on two sites, window {0}
        let diag: Vec<f64> = (0..4)
            .map(|b| {
                let s = |i: usize| if (b >> i) & 1 == 0 { 1.0 } else { -1.0 };
                0.3 * s(0) + 0.7 * s(1)
            })
            .collect();
        let e = window_energies(&diag, 2, SupportInterval::site(0));
        assert!((e[0] - 0.3).abs() < 1e-15 && (e[3] + 0.3).abs() < 1e-15);
    }

    fn single_site(h: f64, gamma: f64) -> OperatorSum {
        let r = DisorderRealization::new(vec![h], vec![], gamma).unwrap();
        build_hamiltonian(&r).unwrap()
    }

    #[test]
    fn first_order_generator_angle() {
        let (h, g) = (0.4, 0.01);
        let m = crate::dense::to_dense(&single_site(h, g)).unwrap().into_mat();
        let schedule = LadderSchedule::new(1).unwrap();
        let opts = FlowOptions { eps_res: 1e-3, ..FlowOptions::default() };
        let p = step_generator(m.as_ref(), 1, 1, &schedule, opts.eps_res, &opts).unwrap();
        assert!(p.regions.is_empty());
        // A_{10} = γ/(E_1 − E_0) = −γ/(2h); |θ| solves tan 2θ = γ/h to first order.
        let theta = -p.generator[(1, 0)].re;
        assert!((theta - g / (2.0 * h)).abs() < 1e-15);
        assert!(((2.0 * theta).tan() - g / h).abs() < 1e-5);
    }

    #[test]
    fn large_threshold_rotates_single_site_exactly() {
        let (h, g) = (0.3, 0.2);
        let m = crate::dense::to_dense(&single_site(h, g)).unwrap().into_mat();
        let schedule = LadderSchedule::new(1).unwrap();
        let opts = FlowOptions { eps_res: 1e6, ..FlowOptions::default() };
        let p = step_generator(m.as_ref(), 1, 1, &schedule, opts.eps_res, &opts).unwrap();
        assert!(p.layer.is_empty());
        assert_eq!(p.regions.len(), 1);
        let (out, u, regions) = apply_layer(m.as_ref(), 1, &p).unwrap();
        assert!(off_diagonal_norm(out.as_ref()) < 1e-12);
        let r = regions[0].rotation.as_ref().unwrap();
        let tan_theta = (r[(1, 0)] / r[(0, 0)]).norm();
        let theta = tan_theta.atan();
        assert!(((2.0 * theta).tan() - g / h).abs() < 1e-12);
        assert!((u.adjoint() * &u - Mat::<C64>::identity(2, 2)).norm_max() < 1e-14);
    }

    #[test]
    fn degenerate_exchange_pair_is_one_region() {
        // 0.3 σz_0 + 0.3 σz_1 + 0.05 (σxσx + σyσy): |01⟩ and |10⟩ are degenerate.
        let mut h = OperatorSum::zero(2).unwrap();
        h.add_term(PauliString::parse("ZI").unwrap(), C64::new(0.3, 0.0)).unwrap();
        h.add_term(PauliString::parse("IZ").unwrap(), C64::new(0.3, 0.0)).unwrap();
        h.add_term(PauliString::parse("XX").unwrap(), C64::new(0.05, 0.0)).unwrap();
        h.add_term(PauliString::parse("YY").unwrap(), C64::new(0.05, 0.0)).unwrap();
        let m = crate::dense::to_dense(&h).unwrap().into_mat();
        let schedule = LadderSchedule::new(1).unwrap();
        let opts = FlowOptions::default();
        let p = step_generator(m.as_ref(), 2, 1, &schedule, opts.eps_res, &opts).unwrap();
        assert_eq!(p.regions.len(), 1);
        assert_eq!(p.regions[0].core, SupportInterval::new(0, 1));
        assert!(p.layer.is_empty());
        let (out, _, _) = apply_layer(m.as_ref(), 2, &p).unwrap();
        assert!(off_diagonal_norm(out.as_ref()) < 1e-12);
    }

    #[test]
    fn empty_layer_leaves_matrix_unchanged() {
        let r = sample_disorder(1, 4, 0.0).unwrap();
        let m = crate::dense::to_dense(&build_hamiltonian(&r).unwrap()).unwrap().into_mat();
        let schedule = LadderSchedule::new(1).unwrap();
        let opts = FlowOptions::default();
        let p = step_generator(m.as_ref(), 4, 1, &schedule, opts.eps_res, &opts).unwrap();
        let (out, _, _) = apply_layer(m.as_ref(), 4, &p).unwrap();
        assert_eq!((out - &m).norm_max(), 0.0);
    }

    #[test]
    fn resonant_elements_are_never_divided() {
        let r = sample_disorder(11, 8, 0.05).unwrap();
        let m = crate::dense::to_dense(&build_hamiltonian(&r).unwrap()).unwrap().into_mat();
        let schedule = LadderSchedule::new(1).unwrap();
        let opts = FlowOptions::default();
        let p = step_generator(m.as_ref(), 8, 1, &schedule, opts.eps_res, &opts).unwrap();
        // |ΔE| ≥ eps_res·|V| for every kept element, so |V/ΔE| ≤ 1/eps_res.
        assert!(p.diagnostics.resonant_elements > 0);
        assert!(p.generator.norm_max() <= 1.0 / opts.eps_res + 1e-12);
    }

    #[test]
    fn circuit_matches_dense_unitary() {
        for seed in [11, 18] {
            let r = sample_disorder(seed, 6, 0.05).unwrap();
            let flow = run_flow(&build_hamiltonian(&r).unwrap(), &FlowOptions::default()).unwrap();
            let u = flow.circuit().unwrap().dense_unitary().unwrap();
            let diff = u.sub(flow.unitary.as_ref().unwrap()).unwrap().max_abs();
            assert!(diff < 1e-10, "seed {seed}: {diff}");
        }
    }
}
