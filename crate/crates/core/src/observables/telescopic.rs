//! Split a conjugated operator by how far its terms reach past a base support.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dense::{self, to_dense_with_limit, DenseOperator};
use crate::error::{Error, Result};
use crate::operator::OperatorSum;
use crate::pauli::SupportInterval;

#[derive(Clone, Debug)]
pub struct TelescopicDecomposition {
    pub base: SupportInterval,
    /// `components[j]` holds the terms whose support overhangs `base` by
    /// exactly `j` sites on the wider side.
    pub components: Vec<OperatorSum>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TelescopicNorms {
    pub collar: Vec<usize>,
    pub one_norm: Vec<f64>,
    /// Operator norms, present when computed densely.
    pub op_norm: Option<Vec<f64>>,
}

pub fn telescopic_decompose(x_conj: &OperatorSum, base: SupportInterval) -> Result<TelescopicDecomposition> {
    let n = x_conj.n_sites();
    if base.hi >= n || base.lo > base.hi {
        return Err(Error::param("base", "outside the chain"));
    }
    let reach = base.lo.max(n - 1 - base.hi);
    let mut components = vec![OperatorSum::zero(n)?.with_drop_tolerance(0.0); reach + 1];
    for (p, c) in x_conj.terms() {
        let j = p.support().map_or(0, |s| s.overhang(&base));
        components[j].add_term(p, c)?;
    }
    while components.len() > 1 && components.last().is_some_and(|c| c.is_empty()) {
        components.pop();
    }
    let out = TelescopicDecomposition { base, components };
    out.check_supports()?;
    Ok(out)
}

impl TelescopicDecomposition {
    pub fn n_sites(&self) -> usize {
        self.components[0].n_sites()
    }

    /// Every `X_j` is supported inside `base` widened by `j`.
    pub fn check_supports(&self) -> Result<()> {
        let n = self.n_sites();
        for (j, x) in self.components.iter().enumerate() {
            let allowed = self.base.widen(j, n);
            if let Some(s) = x.support() {
                if !allowed.contains(&s) {
                    return Err(Error::invariant(
                        "telescopic support",
                        format!("component {j} reaches {}..={}, allowed {}..={}", s.lo, s.hi, allowed.lo, allowed.hi),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn reconstruct(&self) -> Result<OperatorSum> {
        let mut out = OperatorSum::zero(self.n_sites())?.with_drop_tolerance(0.0);
        for x in &self.components {
            out = out.add(x)?;
        }
        Ok(out)
    }

    /// `‖Σ_j X_j − reference‖` as a dense operator norm.
    pub fn reconstruction_error(&self, reference: &Mat<C64>, dense_limit: usize) -> Result<f64> {
        let sum = to_dense_with_limit(&self.reconstruct()?, dense_limit)?;
        dense::op_norm(&DenseOperator::from_mat(sum.mat() - reference)?)
    }

    pub fn norms(&self, dense_limit: Option<usize>) -> Result<TelescopicNorms> {
        let op_norm = match dense_limit {
            Some(limit) => Some(
                self.components
                    .iter()
                    .map(|x| dense::op_norm(&to_dense_with_limit(x, limit)?))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(TelescopicNorms {
            collar: (0..self.components.len()).collect(),
            one_norm: self.components.iter().map(|x| x.one_norm()).collect(),
            op_norm,
        })
    }
}
