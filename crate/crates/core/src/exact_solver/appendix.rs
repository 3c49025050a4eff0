use num_bigint::BigInt;

use super::sparse::propagate_sparse;
use super::DEFAULT_RANK_TOL;
use crate::counting::solution_count_sequence;
use crate::error::{Error, Result};
use crate::projectors::ProjectorChain;

/// Outcome of one extension step of the structured construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AppendixStep {
    /// Chain length after the step.
    pub n: usize,
    pub s_n: usize,
    pub expected_s: BigInt,
    pub rank_c: usize,
    pub expected_rank: BigInt,
    /// Every unconstrained lower-half column vector (the explicit choice
    /// `Γ[α_n, i, α_{n+1}] = 1` at `α_{n+1} = ⌊d/2⌋·α_n + i`, `i < ⌊d/2⌋`)
    /// is annihilated by the constraint matrix.
    pub explicit_in_kernel: bool,
}

impl AppendixStep {
    pub fn passed(&self) -> bool {
        BigInt::from(self.s_n) == self.expected_s
            && BigInt::from(self.rank_c) == self.expected_rank
            && self.explicit_in_kernel
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppendixReport {
    pub d: usize,
    pub r: usize,
    pub n_sites: usize,
    pub steps: Vec<AppendixStep>,
    pub passed: bool,
}

/// Propagate the structured block instance and check that every constraint
/// matrix has full row rank `r·D_{n-2}` and every count saturates `D_n`.
pub fn appendix_construction_check(d: usize, r: usize, n_sites: usize) -> Result<AppendixReport> {
    if 4 * r > d * d {
        return Err(Error::InvalidChain(format!("structured construction needs 4r <= d^2, got d={d} r={r}")));
    }
    let chain = ProjectorChain::structured(n_sites, d, r)?;
    let stack = propagate_sparse(&chain, DEFAULT_RANK_TOL, true)?;
    let counts = solution_count_sequence(d, r, n_sites)?;
    let lower = d / 2;

    let steps: Vec<AppendixStep> = stack
        .steps
        .iter()
        .map(|step| {
            let n = step.n;
            let s_prev = stack.s_sequence[n - 1];
            let free_cols = lower * s_prev;
            let explicit_in_kernel = step
                .constraint
                .row_entries
                .iter()
                .flatten()
                .all(|&(col, _)| col >= free_cols);
            AppendixStep {
                n,
                s_n: stack.s_sequence[n],
                expected_s: counts[n].clone(),
                rank_c: step.rank_c,
                expected_rank: BigInt::from(r) * &counts[n - 2],
                explicit_in_kernel,
            }
        })
        .collect();
    let passed = steps.len() == n_sites - 1 && steps.iter().all(AppendixStep::passed);
    Ok(AppendixReport { d, r, n_sites, steps, passed })
}
