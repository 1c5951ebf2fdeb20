//! Sampler for abstract layered circuits that satisfy the support and norm
//! postulates directly, independent of any Hamiltonian.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chain::{rng_for, unit_uniform};
use crate::circuit::{self, Circuit, CircuitStep, Direction, LocalTerm, LocalUnitary, StraddlePolicy, TruncationRecord};
use crate::dense::DenseOperator;
use crate::error::{Error, Result};
use crate::ladder::LadderSchedule;
use crate::operator::OperatorSum;
use crate::pauli::SupportInterval;

/// Widest block the sampler will build densely.
pub const MAX_BLOCK_SITES: usize = 12;

fn default_region_sites() -> usize {
    8
}

fn default_density_bound() -> f64 {
    1.0
}

/// A resonance placed by hand at step `k` on `lo..=hi`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcedRegion {
    pub k: u32,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    pub chi: f64,
    pub c_prime: f64,
    /// Per-site probability of seeding a resonance at each step.
    pub epsilon: f64,
    pub k_max: u32,
    #[serde(rename = "L")]
    pub length: usize,
    pub seed: u64,
    /// Upper limit on resonance interval length, below the schedule cap.
    #[serde(default = "default_region_sites")]
    pub max_region_sites: usize,
    /// Refuse parameters with `α ≥ 1`.
    #[serde(default)]
    pub require_contracting: bool,
    /// Largest allowed fraction of sites seeding a resonance at one step.
    #[serde(default = "default_density_bound")]
    pub density_bound: f64,
    #[serde(default)]
    pub forced_regions: Vec<ForcedRegion>,
}

impl FamilyParams {
    pub fn new(chi: f64, c_prime: f64, epsilon: f64, k_max: u32, length: usize, seed: u64) -> Self {
        FamilyParams {
            chi,
            c_prime,
            epsilon,
            k_max,
            length,
            seed,
            max_region_sites: default_region_sites(),
            require_contracting: false,
            density_bound: default_density_bound(),
            forced_regions: Vec::new(),
        }
    }

    /// `α = 24 c′ χ^{56/225}`.
    pub fn alpha(&self) -> f64 {
        24.0 * self.c_prime * self.chi.powf(56.0 / 225.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::param("chi", format!("{} is not in (0, 1)", self.chi)));
        }
        if !(self.c_prime >= 1.0) || !self.c_prime.is_finite() {
            return Err(Error::param("c_prime", format!("{} is below 1", self.c_prime)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::param("epsilon", format!("{} is not in [0, 1)", self.epsilon)));
        }
        if self.k_max == 0 {
            return Err(Error::param("k_max", "at least one step is required"));
        }
        if self.length == 0 || self.length > 64 {
            return Err(Error::param("L", format!("{} is not in 1..=64", self.length)));
        }
        if self.max_region_sites == 0 || self.max_region_sites > MAX_BLOCK_SITES {
            return Err(Error::param(
                "max_region_sites",
                format!("{} is not in 1..={MAX_BLOCK_SITES}", self.max_region_sites),
            ));
        }
        if !(self.density_bound >= 0.0) {
            return Err(Error::param("density_bound", "must be non-negative"));
        }
        if self.require_contracting && self.alpha() >= 1.0 {
            return Err(Error::AlphaTooLarge { alpha: self.alpha() });
        }
        Ok(())
    }
}

/// Per-step summary of a sampled circuit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSummary {
    pub k: u32,
    pub window: usize,
    pub budget: f64,
    pub max_norm: f64,
    pub seeded_sites: usize,
    pub density: f64,
    pub regions: Vec<SupportInterval>,
}

#[derive(Clone, Debug)]
pub struct SampledCircuit {
    pub params: FamilyParams,
    pub alpha: f64,
    pub circuit: Circuit,
    pub steps: Vec<StepSummary>,
    pub truncation: Vec<TruncationRecord>,
}

impl SampledCircuit {
    pub fn n_sites(&self) -> usize {
        self.circuit.n_sites
    }

    /// True when a truncation dropped or kept a rotation crossing its
    /// window boundary.
    pub fn has_straddling(&self) -> bool {
        self.truncation.iter().any(|r| r.action.ends_with("straddling"))
    }
}

fn complex_normal(rng: &mut impl RngCore) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Anti-Hermitian part of a complex Ginibre matrix.
pub fn random_anti_hermitian(dim: usize, rng: &mut impl RngCore) -> Mat<C64> {
    let g = Mat::from_fn(dim, dim, |_, _| complex_normal(rng));
    Mat::from_fn(dim, dim, |i, j| 0.5 * (g[(i, j)] - g[(j, i)].conj()))
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn haar_unitary(dim: usize, rng: &mut impl RngCore) -> Mat<C64> {
    let g = Mat::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phases: Vec<C64> = (0..dim)
        .map(|i| {
            let d = r[(i, i)];
            if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) }
        })
        .collect();
    Mat::from_fn(dim, dim, |i, j| q[(i, j)] * phases[j])
}

fn resonance_stream(seed: u64) -> ChaCha20Rng {
    let mut rng = rng_for(seed);
    rng.set_stream(1);
    rng
}

/// Draw one circuit. Generator blocks come from stream 0 of the seeded
/// generator and resonances from stream 1, so changing `epsilon` leaves the
/// generators untouched.
pub fn sample_circuit(p: &FamilyParams) -> Result<SampledCircuit> {
    p.validate()?;
    let n = p.length;
    let schedule = LadderSchedule::new(p.k_max)?;
    let mut gen_rng = rng_for(p.seed);
    let mut res_rng = resonance_stream(p.seed);
    let mut steps = Vec::with_capacity(p.k_max as usize);
    let mut summaries = Vec::with_capacity(p.k_max as usize);

    for k in 1..=p.k_max {
        let entry = schedule.step(k);
        let w = entry.support_usize().min(n);
        if w > MAX_BLOCK_SITES {
            return Err(Error::param(
                "k_max",
                format!("step {k} needs {w}-site blocks, above {MAX_BLOCK_SITES}"),
            ));
        }
        let budget = schedule.norm_budget(k, p.chi, p.c_prime);
        let mut terms = Vec::with_capacity(n + 1 - w);
        let mut max_norm = 0.0f64;
        for lo in 0..=(n - w) {
            let a = random_anti_hermitian(1 << w, &mut gen_rng);
            let raw = DenseOperator::from_mat(a.clone())?.scale(C64::new(0.0, 1.0)).op_norm()?;
            let target = (1.0 - unit_uniform(&mut gen_rng)) * budget;
            let scale = if raw > 0.0 { target / raw } else { 0.0 };
            let block = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * scale);
            let term = LocalTerm::new(SupportInterval::new(lo, lo + w - 1), block)?;
            if term.norm > budget * (1.0 + 1e-12) {
                return Err(Error::invariant(
                    "generator norm budget",
                    format!("step {k} term at {lo}: {} > {budget}", term.norm),
                ));
            }
            max_norm = max_norm.max(term.norm);
            terms.push(term);
        }

        let cap = entry.resonance_cap_usize();
        let longest = cap.min(p.max_region_sites).min(n);
        let mut seeds = Vec::new();
        for site in 0..n {
            if unit_uniform(&mut res_rng) < p.epsilon {
                seeds.push(site);
            }
        }
        let mut intervals: Vec<SupportInterval> = seeds
            .iter()
            .map(|&s| {
                let len = 1 + ((unit_uniform(&mut res_rng) * longest as f64) as usize).min(longest - 1);
                SupportInterval::new(s, (s + len - 1).min(n - 1))
            })
            .collect();
        for f in p.forced_regions.iter().filter(|f| f.k == k) {
            if f.lo > f.hi || f.hi >= n {
                return Err(Error::param("forced_regions", format!("{}..={} is outside the chain", f.lo, f.hi)));
            }
            intervals.push(SupportInterval::new(f.lo, f.hi));
        }
        let regions = merge_intervals(intervals, longest.max(forced_longest(p, k)));
        for r in &regions {
            if r.len() > cap {
                return Err(Error::invariant(
                    "resonance size",
                    format!("step {k} region {}..={} has {} sites, cap {cap}", r.lo, r.hi, r.len()),
                ));
            }
        }
        let density = seeds.len() as f64 / n as f64;
        if density > p.density_bound {
            return Err(Error::invariant(
                "resonance density",
                format!("step {k}: {density} > {}", p.density_bound),
            ));
        }
        let rotations = regions
            .iter()
            .map(|&r| LocalUnitary::new(r, haar_unitary(1 << r.len(), &mut res_rng)))
            .collect::<Result<Vec<_>>>()?;
        summaries.push(StepSummary {
            k,
            window: w,
            budget,
            max_norm,
            seeded_sites: seeds.len(),
            density,
            regions: regions.clone(),
        });
        steps.push(CircuitStep { k, terms, rotations });
    }

    Ok(SampledCircuit {
        params: p.clone(),
        alpha: p.alpha(),
        circuit: Circuit { n_sites: n, steps },
        steps: summaries,
        truncation: Vec::new(),
    })
}

fn forced_longest(p: &FamilyParams, k: u32) -> usize {
    p.forced_regions
        .iter()
        .filter(|f| f.k == k && f.lo <= f.hi)
        .map(|f| f.hi - f.lo + 1)
        .max()
        .unwrap_or(0)
}

/// Merge overlapping or touching intervals; a merged run longer than
/// `longest` is clipped on the right.
fn merge_intervals(mut v: Vec<SupportInterval>, longest: usize) -> Vec<SupportInterval> {
    v.sort();
    let mut out: Vec<SupportInterval> = Vec::new();
    for r in v {
        match out.last_mut() {
            Some(last) if r.lo <= last.hi + 1 => {
                last.hi = last.hi.max(r.hi).min(last.lo + longest - 1);
            }
            _ => out.push(r),
        }
    }
    out
}

/// `U_c`: generators inside `base` widened by `c`, rotations per `policy`.
pub fn build_truncated(c: usize, base: SupportInterval, sc: &SampledCircuit, policy: StraddlePolicy) -> SampledCircuit {
    let (circuit, records) = sc.circuit.truncated(base, c, policy);
    let mut truncation = sc.truncation.clone();
    truncation.extend(records);
    SampledCircuit {
        params: sc.params.clone(),
        alpha: sc.alpha,
        circuit,
        steps: sc.steps.clone(),
        truncation,
    }
}

/// `U X U†` or `U† X U` as a Pauli sum.
pub fn conjugate_through(sc: &SampledCircuit, x: &OperatorSum, direction: Direction, dense_limit: usize) -> Result<OperatorSum> {
    circuit::conjugate_operator(&sc.circuit, x, direction, dense_limit)
}
