//! Versioned TOML configuration; unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::circuit::Direction;
use crate::dense::DEFAULT_DENSE_LIMIT;
use crate::error::{Error, Result};
use crate::family::ForcedRegion;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Flow,
    Tails,
    FamilyTails,
    Entropy,
    Jscaling,
    Lrb,
    Timeavg,
    Trotter,
    Bounds,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Flow,
        ExperimentKind::Tails,
        ExperimentKind::FamilyTails,
        ExperimentKind::Entropy,
        ExperimentKind::Jscaling,
        ExperimentKind::Lrb,
        ExperimentKind::Timeavg,
        ExperimentKind::Trotter,
        ExperimentKind::Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Flow => "flow",
            ExperimentKind::Tails => "tails",
            ExperimentKind::FamilyTails => "family-tails",
            ExperimentKind::Entropy => "entropy",
            ExperimentKind::Jscaling => "jscaling",
            ExperimentKind::Lrb => "lrb",
            ExperimentKind::Timeavg => "timeavg",
            ExperimentKind::Trotter => "trotter",
            ExperimentKind::Bounds => "bounds",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A seed count `n` (seeds `1..=n`) or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (1..=*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    /// Chain length for single-length experiments.
    #[serde(rename = "L")]
    pub length: usize,
    /// Lengths for the entropy experiment; empty means `[L]`.
    pub lengths: Vec<usize>,
    pub gamma: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            length: 8,
            lengths: Vec::new(),
            gamma: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub k_max: u32,
    pub eps_res: f64,
    pub tolerance: f64,
    pub max_retries: u32,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            k_max: 12,
            eps_res: 2.0,
            tolerance: 1e-8,
            max_retries: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    pub chi: f64,
    pub c_prime: f64,
    pub epsilon: f64,
    pub k_max: u32,
    pub max_region_sites: usize,
    pub require_contracting: bool,
    pub forced_regions: Vec<ForcedRegion>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            chi: 0.01,
            c_prime: 1.0,
            epsilon: 0.0,
            k_max: 2,
            max_region_sites: 8,
            require_contracting: false,
            forced_regions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailsConfig {
    pub c_max: usize,
    /// Sites `i` of the observables `σz_i`; empty means every site.
    pub sites: Vec<usize>,
    pub direction: Direction,
    /// Chains up to this length use dense norms.
    pub dense_sites: usize,
    pub lanczos_tolerance: f64,
    pub lanczos_max_iterations: usize,
}

impl Default for TailsConfig {
    fn default() -> Self {
        TailsConfig {
            c_max: 6,
            sites: Vec::new(),
            direction: Direction::PhysicalToLogical,
            dense_sites: 10,
            lanczos_tolerance: 1e-4,
            lanczos_max_iterations: 80,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropySource {
    /// Eigenvectors of the chain from exact diagonalization.
    Exact,
    /// `U†|s⟩` for the flow circuit of the chain.
    Flow,
    /// `U†|s⟩` for a sampled family circuit.
    Family,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    pub source: EntropySource,
    /// Cuts (number of sites on the left); empty means every cut.
    pub cuts: Vec<usize>,
    /// Number of basis labels `s` drawn per seed for circuit sources; zero
    /// means all of them.
    pub states: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            source: EntropySource::Exact,
            cuts: Vec::new(),
            states: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JscalingConfig {
    /// Also fit a tail rate from the flow circuit and compare `max |J_s|`
    /// with `12 α̂^d` on resonance-free seeds.
    pub tail_check: bool,
}

impl Default for JscalingConfig {
    fn default() -> Self {
        JscalingConfig { tail_check: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrbConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub n_times: usize,
    /// Front threshold relative to `‖A‖₁ ‖B‖₁`.
    pub threshold: f64,
    pub lanczos_tolerance: f64,
    pub lanczos_max_iterations: usize,
}

impl Default for LrbConfig {
    fn default() -> Self {
        LrbConfig {
            t_min: 1.0,
            t_max: 1e4,
            n_times: 25,
            threshold: 0.1,
            lanczos_tolerance: 1e-2,
            lanczos_max_iterations: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeavgConfig {
    pub times: Vec<f64>,
    pub patch_size: usize,
    /// Collar of the truncated averages; absent means no truncation.
    pub collar: Option<usize>,
}

impl Default for TimeavgConfig {
    fn default() -> Self {
        TimeavgConfig {
            times: vec![1.0, 10.0, 100.0, 1000.0],
            patch_size: 2,
            collar: Some(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrotterMode {
    /// `‖e^A − U_T‖`.
    Unitary,
    /// Collared conjugation error of `σz` at the middle site.
    Conjugation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Bond,
    Paired,
    Triple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrotterConfig {
    pub mode: TrotterMode,
    pub scheme: SchemeName,
    pub steps: Vec<usize>,
    pub gate_norms: Vec<f64>,
}

impl Default for TrotterConfig {
    fn default() -> Self {
        TrotterConfig {
            mode: TrotterMode::Unitary,
            scheme: SchemeName::Bond,
            steps: vec![1, 2, 4, 8, 16],
            gate_norms: vec![0.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Seeds,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub tails: TailsConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub jscaling: JscalingConfig,
    #[serde(default)]
    pub lrb: LrbConfig,
    #[serde(default)]
    pub timeavg: TimeavgConfig,
    #[serde(default)]
    pub trotter: TrotterConfig,
}

fn default_seeds() -> Seeds {
    Seeds::Count(1)
}

fn default_threads() -> usize {
    1
}

fn default_dense_limit() -> usize {
    DEFAULT_DENSE_LIMIT
}

fn config_error(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Defaults for `kind`.
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            experiment: kind,
            seeds: default_seeds(),
            threads: default_threads(),
            dense_limit: default_dense_limit(),
            chain: ChainConfig::default(),
            flow: FlowConfig::default(),
            family: FamilyConfig::default(),
            tails: TailsConfig::default(),
            entropy: EntropyConfig::default(),
            jscaling: JscalingConfig::default(),
            lrb: LrbConfig::default(),
            timeavg: TimeavgConfig::default(),
            trotter: TrotterConfig::default(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(s).map_err(|e| {
            let field = e.span().map_or_else(|| "config".to_string(), |r| format!("bytes {}..{}", r.start, r.end));
            config_error(&field, e.message())
        })?;
        c.validate()?;
        Ok(c)
    }

    /// The fully resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_error("config", e.to_string()))
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.resolve()
    }

    pub fn lengths(&self) -> Vec<usize> {
        if self.chain.lengths.is_empty() {
            vec![self.chain.length]
        } else {
            self.chain.lengths.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_error(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        if self.threads == 0 {
            return Err(config_error("threads", "must be at least 1"));
        }
        let seeds = self.seeds();
        if seeds.is_empty() && self.experiment != ExperimentKind::Bounds {
            return Err(config_error("seeds", "no seeds"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(config_error("seeds", "duplicate seeds"));
        }
        if self.lengths().iter().any(|&l| !(2..=64).contains(&l)) {
            return Err(config_error("chain.L", "lengths must lie in 2..=64"));
        }
        if !(self.chain.gamma >= 0.0) || !self.chain.gamma.is_finite() {
            return Err(config_error("chain.gamma", "must be finite and non-negative"));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lrb.t_min) || !(self.lrb.t_max >= self.lrb.t_min) || self.lrb.n_times == 0 {
            return Err(config_error("lrb", "need 0 < t_min <= t_max and n_times >= 1"));
        }
        if !positive(self.lrb.threshold) {
            return Err(config_error("lrb.threshold", "must be positive"));
        }
        if self.timeavg.times.iter().any(|&t| !positive(t)) || self.timeavg.patch_size == 0 {
            return Err(config_error("timeavg", "times must be positive and patch_size at least 1"));
        }
        if self.trotter.steps.iter().any(|&n| n == 0) || self.trotter.gate_norms.iter().any(|&g| !positive(g)) {
            return Err(config_error("trotter", "steps and gate norms must be positive"));
        }
        Ok(())
    }
}
