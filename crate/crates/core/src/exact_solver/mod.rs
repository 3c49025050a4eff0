//! Explicit construction of the zero-energy space by left-to-right kernel
//! propagation.
//!
//! Solutions on the first `n` sites are kept in the one-sided product form
//! `ψ_{α_n} = Γ^{[1]} Γ^{[2]} ⋯ Γ^{[n]}` with `Γ^{[k]}` of shape
//! `(s_{k-1}, d, s_k)`. Adding site `n+1` imposes the bond constraint
//! `C · Γ^{[n+1]} = 0` where
//! `C[(p, α_{n-1}), (i_{n+1}, α_n)] = Σ_{i_n} <v^p | i_n i_{n+1}> Γ^{[n]}[α_{n-1}, i_n, α_n]`.

mod appendix;
mod product;
pub mod sparse;

pub use appendix::{appendix_construction_check, AppendixReport, AppendixStep};
pub use product::{product_state_energy, product_state_solve};

use ndarray::{s, Array1, Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE};
use crate::projectors::{BondProjector, ProjectorChain};

/// Default relative singular-value threshold for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Default cap on dense state vectors.
pub const DEFAULT_STATE_CAP: usize = 1 << 20;
/// Singular-value gaps below this ratio are reported as suspicious.
pub const MIN_HEALTHY_GAP: f64 = 1e4;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub rank_tol: f64,
    /// Keep at most this many kernel vectors per step (`None` keeps the
    /// full kernel).
    pub keep: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rank_tol: DEFAULT_RANK_TOL, keep: None }
    }
}

/// Orthonormal kernel basis together with the rank diagnostics of the SVD.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    /// Columns span `ker(c)`.
    pub basis: Array2<C64>,
    pub rank: usize,
    pub sigma_max: f64,
    /// Smallest retained over largest discarded singular value, when any
    /// computed singular value was discarded.
    pub sigma_gap: Option<f64>,
    /// Singular values within a factor 100 of the threshold.
    pub near_threshold: usize,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// Orthonormal basis of `ker(c)`; numerical rank counts singular values above
/// `rank_tol · σ_max`.
pub fn kernel_basis(c: &Array2<C64>, rank_tol: f64) -> Result<KernelBasis> {
    let n = c.ncols();
    let identity = || Array2::<f64>::eye(n).mapv(C64::from);
    if c.nrows() == 0 || n == 0 {
        return Ok(KernelBasis { basis: identity(), rank: 0, sigma_max: 0.0, sigma_gap: None, near_threshold: 0 });
    }
    let svd = linalg::svd_full(c.view())?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return Ok(KernelBasis { basis: identity(), rank: 0, sigma_max, sigma_gap: None, near_threshold: 0 });
    }
    let threshold = rank_tol * sigma_max;
    let rank = svd.s.iter().filter(|&&x| x > threshold).count();
    let near_threshold = svd
        .s
        .iter()
        .filter(|&&x| x > threshold * 1e-2 && x < threshold * 1e2)
        .count();
    let sigma_gap = (rank < svd.s.len() && rank > 0).then(|| {
        let discarded = svd.s[rank];
        if discarded > 0.0 { svd.s[rank - 1] / discarded } else { f64::INFINITY }
    });
    if let Some(gap) = sigma_gap {
        if gap < MIN_HEALTHY_GAP {
            log::warn!("weak singular-value gap {gap:.3e} at numerical rank {rank}");
        }
    }
    let basis = svd.vt.slice(s![rank.., ..]).t().mapv(|z| z.conj());
    Ok(KernelBasis { basis, rank, sigma_max, sigma_gap, near_threshold })
}

/// Constraint matrix of shape `(r·s_prev) × (d·s_cur)` for extending the
/// solutions represented by `gamma` (shape `(s_prev, d, s_cur)`) across `bond`.
///
/// Rows are packed `(p major, α_prev minor)`, columns `(i_next major, α_cur minor)`.
pub fn build_constraint_matrix(gamma: &Array3<C64>, bond: &BondProjector) -> Result<Array2<C64>> {
    let (s_prev, d, s_cur) = gamma.dim();
    if d != bond.local_dim {
        return Err(Error::ShapeMismatch(format!(
            "tensor has physical dimension {d}, bond has {}",
            bond.local_dim
        )));
    }
    let r = bond.rank();
    let mut c = Array2::<C64>::zeros((r * s_prev, d * s_cur));
    for p in 0..r {
        for j in 0..d {
            let mut block = c.slice_mut(s![p * s_prev..(p + 1) * s_prev, j * s_cur..(j + 1) * s_cur]);
            for i in 0..d {
                let w = bond.bra(p, i, j);
                if w != C64::new(0.0, 0.0) {
                    block.scaled_add(w, &gamma.index_axis(Axis(1), i));
                }
            }
        }
    }
    Ok(c)
}

/// Rank diagnostics recorded when producing `s_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Index of the solution count this step produced.
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub rank_c: usize,
    pub sigma_gap: Option<f64>,
    pub near_threshold: usize,
}

/// Site tensors and solution counts from kernel propagation.
#[derive(Debug, Clone)]
pub struct SolutionStack {
    pub local_dim: usize,
    pub n_sites: usize,
    /// `gammas[k]` is the tensor of site `k + 1`; the stack stops early if a
    /// kernel comes out empty.
    pub gammas: Vec<Array3<C64>>,
    /// `s_0 ..= s_N`; entries after a frustrated step are zero.
    pub s_sequence: Vec<usize>,
    pub steps: Vec<StepDiagnostics>,
}

impl SolutionStack {
    /// Number of zero-energy states on the full chain.
    pub fn count(&self) -> usize {
        *self.s_sequence.last().unwrap_or(&0)
    }

    pub fn is_frustrated(&self) -> bool {
        self.count() == 0
    }

    /// Whether every site tensor, flattened to `(d·s_{k-1}) × s_k` with rows
    /// `(i_k, α_{k-1})`, has full column rank.
    pub fn has_full_column_rank(&self, rank_tol: f64) -> Result<bool> {
        for g in &self.gammas {
            let (sp, d, sc) = g.dim();
            if sc == 0 {
                continue;
            }
            let flat = Array2::from_shape_fn((d * sp, sc), |(row, b)| g[[row % sp, row / sp, b]]);
            let sv = linalg::singular_values(flat.view())?;
            let smax = sv.first().copied().unwrap_or(0.0);
            let rank = sv.iter().filter(|&&x| x > rank_tol * smax).count();
            if rank != sc {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Identity embedding `Γ^{[1]}[0, i, α] = δ_{iα}`.
pub fn identity_embedding(d: usize) -> Array3<C64> {
    let mut g = Array3::zeros((1, d, d));
    for i in 0..d {
        g[[0, i, i]] = ONE;
    }
    g
}

fn check_chain(chain: &ProjectorChain) -> Result<()> {
    let spec = &chain.spec;
    if chain.bonds.len() != spec.n_bonds() {
        return Err(Error::ShapeMismatch(format!(
            "{} bonds for {} sites",
            chain.bonds.len(),
            spec.n_sites
        )));
    }
    for b in &chain.bonds {
        if b.local_dim != spec.local_dim || b.rank() != spec.rank {
            return Err(Error::ShapeMismatch(format!(
                "bond {} has (d, r) = ({}, {}), chain has ({}, {})",
                b.bond,
                b.local_dim,
                b.rank(),
                spec.local_dim,
                spec.rank
            )));
        }
    }
    Ok(())
}

/// Build the zero-energy space site by site.
pub fn propagate_solutions(chain: &ProjectorChain, opts: SolverOptions) -> Result<SolutionStack> {
    check_chain(chain)?;
    let d = chain.spec.local_dim;
    let n_sites = chain.spec.n_sites;
    let mut gammas = vec![identity_embedding(d)];
    let mut s_sequence = vec![1, d];
    let mut steps = Vec::with_capacity(n_sites.saturating_sub(1));

    for bond in &chain.bonds {
        let last = gammas.last().expect("at least one tensor");
        let s_cur = last.dim().2;
        let c = build_constraint_matrix(last, bond)?;
        let kernel = kernel_basis(&c, opts.rank_tol)?;
        let keep = opts.keep.map_or(kernel.dim(), |k| k.min(kernel.dim()));
        steps.push(StepDiagnostics {
            n: s_sequence.len(),
            rows: c.nrows(),
            cols: c.ncols(),
            rank_c: kernel.rank,
            sigma_gap: kernel.sigma_gap,
            near_threshold: kernel.near_threshold,
        });
        s_sequence.push(keep);
        if keep == 0 {
            break;
        }
        let basis = kernel.basis;
        let next = Array3::from_shape_fn((s_cur, d, keep), |(a, j, b)| basis[[j * s_cur + a, b]]);
        gammas.push(next);
    }
    s_sequence.resize(n_sites + 1, 0);
    Ok(SolutionStack { local_dim: d, n_sites, gammas, s_sequence, steps })
}

fn dense_size(d: usize, n: usize, cap: usize) -> Result<usize> {
    let size = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(size as usize)
}

/// Contract the chain with final boundary index `terminal` (0-based) into a
/// dense vector, site 1 most significant.
pub fn assemble_state(stack: &SolutionStack, terminal: usize, cap: usize, normalize: bool) -> Result<Array1<C64>> {
    if stack.is_frustrated() || terminal >= stack.count() {
        return Err(Error::TerminalIndex { index: terminal, count: stack.count() });
    }
    dense_size(stack.local_dim, stack.n_sites, cap)?;
    // Right-to-left: `right` holds (s_{k-1}) × d^{N-k+1}.
    let last = stack.gammas.last().expect("nonempty");
    let mut right: Array2<C64> = last.index_axis(Axis(2), terminal).to_owned();
    for g in stack.gammas.iter().rev().skip(1) {
        let (sp, d, sc) = g.dim();
        let flat = g.view().into_shape_with_order((sp * d, sc)).expect("contiguous");
        let prod = flat.dot(&right);
        let width = prod.ncols() * d;
        right = prod.into_shape_with_order((sp, width)).expect("contiguous");
    }
    let mut psi = right.into_shape_with_order(right_len(stack)).expect("single row").to_owned();
    if normalize {
        let norm = linalg::vec_norm(psi.as_slice().expect("contiguous"));
        psi.mapv_inplace(|z| z / norm);
    }
    Ok(psi)
}

fn right_len(stack: &SolutionStack) -> usize {
    stack.local_dim.pow(stack.n_sites as u32)
}

/// All `s_N` solutions as columns of a `d^N × s_N` matrix.
pub fn assemble_all(stack: &SolutionStack, cap: usize) -> Result<Array2<C64>> {
    dense_size(stack.local_dim, stack.n_sites, cap)?;
    if stack.is_frustrated() {
        return Ok(Array2::zeros((right_len(stack), 0)));
    }
    // Left-to-right: `left` holds d^k × s_k.
    let mut left = Array2::from_elem((1, 1), ONE);
    for g in &stack.gammas {
        let (sp, d, sc) = g.dim();
        let flat = g.view().into_shape_with_order((sp, d * sc)).expect("contiguous");
        let prod = left.dot(&flat);
        let rows = prod.nrows() * d;
        left = prod.into_shape_with_order((rows, sc)).expect("contiguous");
    }
    Ok(left)
}
