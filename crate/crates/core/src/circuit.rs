//! Layered quasi-local unitaries `U = Π_k O_k e^{A^(k)}` built from dense
//! local blocks, with collar truncation and matrix-free application.
//!
//! Step `k` acts as `e^{A^(k)}` followed by its block rotations `O_k`; later
//! steps act after earlier ones, so `U = O_K e^{A^(K)} ⋯ O_1 e^{A^(1)}`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dense::{self, DenseOperator};
use crate::error::{Error, Result};
use crate::operator::OperatorSum;
use crate::pauli::SupportInterval;

/// One anti-Hermitian generator block `A^(k)_i` on `support`.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub support: SupportInterval,
    pub block: Mat<C64>,
    /// Operator norm of `block`.
    pub norm: f64,
}

/// One non-perturbative rotation `O_{k,r}` on `interval`.
#[derive(Clone, Debug)]
pub struct LocalUnitary {
    pub interval: SupportInterval,
    pub unitary: Mat<C64>,
}

#[derive(Clone, Debug)]
pub struct CircuitStep {
    pub k: u32,
    pub terms: Vec<LocalTerm>,
    pub rotations: Vec<LocalUnitary>,
}

#[derive(Clone, Debug)]
pub struct Circuit {
    pub n_sites: usize,
    pub steps: Vec<CircuitStep>,
}

/// Which side of the circuit acts on the operator first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `X ↦ U X U†`: small `k` act first, `X` is a physical operator.
    PhysicalToLogical,
    /// `X ↦ U† X U`: large `k` act first, `X` is a logical operator.
    LogicalToPhysical,
}

/// Handling of rotations that cross the boundary of a truncation window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StraddlePolicy {
    #[default]
    Drop,
    Keep,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationRecord {
    pub k: u32,
    pub kind: String,
    pub lo: usize,
    pub hi: usize,
    pub action: String,
}

/// `dst += scale · (1 ⊗ block ⊗ 1) src` for a block on sites `lo..`; every
/// column of `src` is one vector.
pub fn apply_local_batch(block: MatRef<'_, C64>, lo: usize, src: MatRef<'_, C64>, dst: &mut Mat<C64>, scale: C64) {
    let d = src.nrows();
    let local = block.nrows();
    let inner = 1usize << lo;
    let outer = d / (inner * local);
    let mut buf = Vec::new();
    for j in 0..src.ncols() {
        let s: &[C64] = match src.col(j).try_as_col_major() {
            Some(c) => c.as_slice(),
            None => {
                buf.clear();
                buf.extend(src.col(j).iter().copied());
                &buf
            }
        };
        let t = dst
            .col_mut(j)
            .try_as_col_major_mut()
            .expect("owned columns are contiguous")
            .as_slice_mut();
        apply_local_slice(block, inner, outer, s, t, scale);
    }
}

/// One vector of length `inner · local · outer`, indexed
/// `low + inner · l + inner · local · high`, with `block` acting on `l`.
fn apply_local_slice(block: MatRef<'_, C64>, inner: usize, outer: usize, s: &[C64], t: &mut [C64], scale: C64) {
    let local = block.nrows();
    let span = inner * local;
    assert!(s.len() == span * outer && t.len() == s.len());
    if inner <= outer {
        for low in 0..inner {
            // SAFETY: the views address `low + inner·l + span·h` with
            // `l < local` and `h < outer`, all below `span · outer`, the
            // checked length of both slices. `s` and `t` are distinct
            // borrows, and the views for different `low` are disjoint.
            let (x, y) = unsafe {
                (
                    MatRef::from_raw_parts(s.as_ptr().add(low), local, outer, inner as isize, span as isize),
                    MatMut::from_raw_parts_mut(t.as_mut_ptr().add(low), local, outer, inner as isize, span as isize),
                )
            };
            matmul(y, Accum::Add, block, x, scale, Par::Seq);
        }
    } else {
        for h in 0..outer {
            let range = h * span..(h + 1) * span;
            let x = MatRef::from_column_major_slice(&s[range.clone()], inner, local);
            let y = MatMut::from_column_major_slice_mut(&mut t[range], inner, local);
            matmul(y, Accum::Add, x, block.transpose(), scale, Par::Seq);
        }
    }
}

/// `(1 ⊗ u ⊗ 1) m` for a unitary block.
fn rotate_batch(u: MatRef<'_, C64>, lo: usize, m: &Mat<C64>) -> Mat<C64> {
    let mut out = Mat::<C64>::zeros(m.nrows(), m.ncols());
    apply_local_batch(u, lo, m.as_ref(), &mut out, C64::new(1.0, 0.0));
    out
}

/// `e^{sign·A} m` for `A = Σ terms`, by scaled Taylor series.
pub fn exp_terms_batch(terms: &[LocalTerm], sign: f64, m: Mat<C64>) -> Result<Mat<C64>> {
    if terms.is_empty() {
        return Ok(m);
    }
    let bound: f64 = terms.iter().map(|t| t.norm).sum();
    let substeps = (bound / 0.5).ceil().max(1.0) as usize;
    let h = sign / substeps as f64;
    let mut out = m;
    for _ in 0..substeps {
        let mut term = out.clone();
        let mut acc = out;
        let mut converged = false;
        for order in 1..=60 {
            let mut next = Mat::<C64>::zeros(term.nrows(), term.ncols());
            let s = C64::new(h / order as f64, 0.0);
            for t in terms {
                apply_local_batch(t.block.as_ref(), t.support.lo, term.as_ref(), &mut next, s);
            }
            term = next;
            acc += &term;
            let tn = term.norm_l2();
            if tn <= 0.5 * f64::EPSILON * acc.norm_l2() || tn == 0.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergentSeries {
                order: 60,
                norm: term.norm_l2(),
            });
        }
        out = acc;
    }
    Ok(out)
}

impl LocalTerm {
    /// Wrap an anti-Hermitian block, computing its operator norm.
    pub fn new(support: SupportInterval, block: Mat<C64>) -> Result<Self> {
        if block.nrows() != 1usize << support.len() || block.ncols() != block.nrows() {
            return Err(Error::param("block", "dimension does not match the support"));
        }
        let d = DenseOperator::from_mat(block)?;
        let defect = d.add(&d.adjoint())?.max_abs();
        if defect > 1e-10 * d.max_abs().max(1e-300) {
            return Err(Error::NotAntiHermitian { deviation: defect });
        }
        let norm = dense::op_norm(&d.scale(C64::new(0.0, 1.0)))?;
        Ok(LocalTerm {
            support,
            block: d.into_mat(),
            norm,
        })
    }

    pub fn to_operator(&self, n_sites: usize) -> Result<OperatorSum> {
        dense::block_to_operator(self.block.as_ref(), self.support, n_sites, 0.0)
    }
}

impl LocalUnitary {
    pub fn new(interval: SupportInterval, unitary: Mat<C64>) -> Result<Self> {
        if unitary.nrows() != 1usize << interval.len() || unitary.ncols() != unitary.nrows() {
            return Err(Error::param("unitary", "dimension does not match the interval"));
        }
        let n = unitary.nrows();
        let defect = (unitary.adjoint() * &unitary - Mat::<C64>::identity(n, n)).norm_max();
        if defect > 1e-10 {
            return Err(Error::invariant("rotation unitary", format!("defect {defect:e}")));
        }
        Ok(LocalUnitary { interval, unitary })
    }
}

impl Circuit {
    pub fn identity(n_sites: usize) -> Self {
        Circuit {
            n_sites,
            steps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    pub fn is_identity(&self) -> bool {
        self.steps.iter().all(|s| s.terms.is_empty() && s.rotations.is_empty())
    }

    pub fn term_count(&self) -> usize {
        self.steps.iter().map(|s| s.terms.len()).sum()
    }

    pub fn rotation_count(&self) -> usize {
        self.steps.iter().map(|s| s.rotations.len()).sum()
    }

    /// `U m` (or `U† m` when `adjoint`), column by column.
    pub fn apply(&self, m: Mat<C64>, adjoint: bool) -> Result<Mat<C64>> {
        if m.nrows() != self.dim() {
            return Err(Error::param("vectors", format!("expected {} rows, got {}", self.dim(), m.nrows())));
        }
        let mut out = m;
        if !adjoint {
            for step in &self.steps {
                out = exp_terms_batch(&step.terms, 1.0, out)?;
                for r in &step.rotations {
                    out = rotate_batch(r.unitary.as_ref(), r.interval.lo, &out);
                }
            }
        } else {
            for step in self.steps.iter().rev() {
                for r in step.rotations.iter().rev() {
                    out = rotate_batch(r.unitary.adjoint().to_owned().as_ref(), r.interval.lo, &out);
                }
                out = exp_terms_batch(&step.terms, -1.0, out)?;
            }
        }
        Ok(out)
    }

    pub fn apply_vector(&self, v: &[C64], adjoint: bool) -> Result<Vec<C64>> {
        let m = Mat::from_fn(v.len(), 1, |i, _| v[i]);
        let out = self.apply(m, adjoint)?;
        Ok((0..v.len()).map(|i| out[(i, 0)]).collect())
    }

    pub fn dense_unitary(&self) -> Result<DenseOperator> {
        let d = self.dim();
        DenseOperator::from_mat(self.apply(Mat::identity(d, d), false)?)
    }

    /// `U X U†` or `U† X U` for a dense `X`.
    pub fn conjugate_dense(&self, x: MatRef<'_, C64>, direction: Direction) -> Result<Mat<C64>> {
        let adjoint = direction == Direction::LogicalToPhysical;
        let y = self.apply(x.adjoint().to_owned(), adjoint)?;
        self.apply(y.adjoint().to_owned(), adjoint)
    }

    /// Generators inside `base` widened by `c` are kept; rotations inside it
    /// are kept, rotations crossing its boundary follow `policy`.
    pub fn truncated(
        &self,
        base: SupportInterval,
        c: usize,
        policy: StraddlePolicy,
    ) -> (Circuit, Vec<TruncationRecord>) {
        let window = base.widen(c, self.n_sites);
        let mut records = Vec::new();
        let steps = self
            .steps
            .iter()
            .map(|step| {
                let terms = step
                    .terms
                    .iter()
                    .filter(|t| {
                        let keep = window.contains(&t.support);
                        if !keep {
                            records.push(TruncationRecord {
                                k: step.k,
                                kind: "generator".into(),
                                lo: t.support.lo,
                                hi: t.support.hi,
                                action: "dropped".into(),
                            });
                        }
                        keep
                    })
                    .cloned()
                    .collect();
                let rotations = step
                    .rotations
                    .iter()
                    .filter(|r| {
                        let action = if window.contains(&r.interval) {
                            return true;
                        } else if !window.overlaps(&r.interval) {
                            "dropped"
                        } else if policy == StraddlePolicy::Keep {
                            "kept-straddling"
                        } else {
                            "dropped-straddling"
                        };
                        records.push(TruncationRecord {
                            k: step.k,
                            kind: "rotation".into(),
                            lo: r.interval.lo,
                            hi: r.interval.hi,
                            action: action.into(),
                        });
                        action == "kept-straddling"
                    })
                    .cloned()
                    .collect();
                CircuitStep {
                    k: step.k,
                    terms,
                    rotations,
                }
            })
            .collect();
        (
            Circuit {
                n_sites: self.n_sites,
                steps,
            },
            records,
        )
    }

    /// The same circuit on the sites of `w`, if every element fits in it.
    pub fn restricted_to(&self, w: SupportInterval) -> Option<Circuit> {
        let inside = self.steps.iter().all(|s| {
            s.terms.iter().all(|t| w.contains(&t.support)) && s.rotations.iter().all(|r| w.contains(&r.interval))
        });
        if !inside {
            return None;
        }
        let shift = |i: SupportInterval| SupportInterval::new(i.lo - w.lo, i.hi - w.lo);
        let steps = self
            .steps
            .iter()
            .map(|s| CircuitStep {
                k: s.k,
                terms: s
                    .terms
                    .iter()
                    .map(|t| LocalTerm {
                        support: shift(t.support),
                        ..t.clone()
                    })
                    .collect(),
                rotations: s
                    .rotations
                    .iter()
                    .map(|r| LocalUnitary {
                        interval: shift(r.interval),
                        unitary: r.unitary.clone(),
                    })
                    .collect(),
            })
            .collect();
        Some(Circuit {
            n_sites: w.len(),
            steps,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CircuitFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: CircuitFile = serde_json::from_str(s)?;
        file.into_circuit()
    }
}

/// Conjugate an operator through `circuit` densely and return its Pauli
/// expansion.
pub fn conjugate_operator(circuit: &Circuit, x: &OperatorSum, direction: Direction, dense_limit: usize) -> Result<OperatorSum> {
    if x.n_sites() != circuit.n_sites {
        return Err(Error::MismatchedSites {
            left: circuit.n_sites,
            right: x.n_sites(),
        });
    }
    let xd = dense::to_dense_with_limit(x, dense_limit)?;
    let y = circuit.conjugate_dense(xd.mat(), direction)?;
    dense::from_dense(&DenseOperator::from_mat(y)?, 1e-15)
}

const BLOCK_ENCODING: &str = "f64le-re-im-row-major";
const CIRCUIT_FORMAT: &str = "quasilocal-circuit-v1";

#[derive(Serialize, Deserialize)]
pub(crate) struct BlockFile {
    lo: usize,
    hi: usize,
    encoding: String,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct StepFile {
    k: u32,
    terms: Vec<BlockFile>,
    rotations: Vec<BlockFile>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    format: String,
    n_sites: usize,
    steps: Vec<StepFile>,
}

pub(crate) fn encode_block(interval: SupportInterval, m: MatRef<'_, C64>) -> BlockFile {
    let n = m.nrows();
    let mut bytes = Vec::with_capacity(n * n * 16);
    for i in 0..n {
        for j in 0..n {
            bytes.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            bytes.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    BlockFile {
        lo: interval.lo,
        hi: interval.hi,
        encoding: BLOCK_ENCODING.into(),
        data: B64.encode(bytes),
    }
}

fn decode_block(b: &BlockFile) -> Result<(SupportInterval, Mat<C64>)> {
    if b.encoding != BLOCK_ENCODING {
        return Err(Error::param("encoding", format!("unsupported block encoding {}", b.encoding)));
    }
    if b.hi < b.lo {
        return Err(Error::EmptyInterval);
    }
    let interval = SupportInterval::new(b.lo, b.hi);
    let n = 1usize << interval.len();
    let bytes = B64
        .decode(&b.data)
        .map_err(|e| Error::param("data", e.to_string()))?;
    if bytes.len() != n * n * 16 {
        return Err(Error::param("data", format!("expected {} bytes, got {}", n * n * 16, bytes.len())));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    Ok((
        interval,
        Mat::from_fn(n, n, |i, j| {
            let o = (i * n + j) * 16;
            C64::new(f(o), f(o + 8))
        }),
    ))
}

impl From<&Circuit> for CircuitFile {
    fn from(c: &Circuit) -> Self {
        CircuitFile {
            format: CIRCUIT_FORMAT.into(),
            n_sites: c.n_sites,
            steps: c
                .steps
                .iter()
                .map(|s| StepFile {
                    k: s.k,
                    terms: s.terms.iter().map(|t| encode_block(t.support, t.block.as_ref())).collect(),
                    rotations: s.rotations.iter().map(|r| encode_block(r.interval, r.unitary.as_ref())).collect(),
                })
                .collect(),
        }
    }
}

impl CircuitFile {
    fn into_circuit(self) -> Result<Circuit> {
        if self.format != CIRCUIT_FORMAT {
            return Err(Error::param("format", format!("unknown circuit format {}", self.format)));
        }
        let mut steps = Vec::with_capacity(self.steps.len());
        for s in self.steps {
            let mut terms = Vec::with_capacity(s.terms.len());
            for t in &s.terms {
                let (support, block) = decode_block(t)?;
                terms.push(LocalTerm::new(support, block)?);
            }
            let mut rotations = Vec::with_capacity(s.rotations.len());
            for r in &s.rotations {
                let (interval, unitary) = decode_block(r)?;
                rotations.push(LocalUnitary::new(interval, unitary)?);
            }
            steps.push(CircuitStep {
                k: s.k,
                terms,
                rotations,
            });
        }
        Ok(Circuit {
            n_sites: self.n_sites,
            steps,
        })
    }
}
