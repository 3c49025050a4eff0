//! Sparse kernel propagation for instances whose tensors stay sparse, such as
//! the structured block construction, where dense constraint matrices would
//! not fit in memory.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE};
use crate::projectors::{BondProjector, ProjectorChain};

/// Site tensor of shape `(left, local_dim, right)` stored by physical slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGamma {
    pub left: usize,
    pub local_dim: usize,
    pub right: usize,
    /// `slices[i]` lists `(α_left, α_right, value)`.
    pub slices: Vec<Vec<(usize, usize, C64)>>,
}

impl SparseGamma {
    pub fn identity(d: usize) -> Self {
        Self {
            left: 1,
            local_dim: d,
            right: d,
            slices: (0..d).map(|i| vec![(0, i, ONE)]).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }
}

/// Row-compressed sparse matrix; each row sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_entries: Vec<Vec<(usize, C64)>>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.row_entries.iter().map(Vec::len).sum()
    }

    /// `self · x` for a sparse vector `x`.
    pub fn apply(&self, x: &[(usize, C64)]) -> Vec<C64> {
        let lookup: HashMap<usize, C64> = x.iter().copied().collect();
        self.row_entries
            .iter()
            .map(|row| row.iter().filter_map(|(c, v)| lookup.get(c).map(|x| v * x)).sum())
            .collect()
    }

    /// Whether column `col` holds no entries.
    pub fn column_is_empty(&self, col: usize) -> bool {
        self.row_entries.iter().all(|row| row.binary_search_by_key(&col, |e| e.0).is_err())
    }

    pub fn to_dense(&self) -> ndarray::Array2<C64> {
        let mut m = ndarray::Array2::zeros((self.rows, self.cols));
        for (i, row) in self.row_entries.iter().enumerate() {
            for &(j, v) in row {
                m[[i, j]] = v;
            }
        }
        m
    }
}

/// Sparse counterpart of [`super::build_constraint_matrix`], same index packing.
pub fn build_sparse_constraint(gamma: &SparseGamma, bond: &BondProjector) -> Result<SparseMatrix> {
    let d = gamma.local_dim;
    if d != bond.local_dim {
        return Err(Error::ShapeMismatch(format!(
            "tensor has physical dimension {d}, bond has {}",
            bond.local_dim
        )));
    }
    let (s_prev, s_cur) = (gamma.left, gamma.right);
    let r = bond.rank();
    let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); r * s_prev];
    for p in 0..r {
        for i in 0..d {
            for j in 0..d {
                let w = bond.bra(p, i, j);
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for &(a, b, val) in &gamma.slices[i] {
                    *rows[p * s_prev + a].entry(j * s_cur + b).or_default() += w * val;
                }
            }
        }
    }
    let row_entries = rows
        .into_iter()
        .map(|m| m.into_iter().filter(|(_, v)| *v != C64::new(0.0, 0.0)).collect())
        .collect();
    Ok(SparseMatrix { rows: r * s_prev, cols: d * s_cur, row_entries })
}

/// Kernel of a sparse matrix from its reduced row echelon form.
#[derive(Debug, Clone)]
pub struct SparseKernel {
    pub rank: usize,
    /// One vector per free column, in ascending free-column order. Each has a
    /// unit entry at its free column and zeros at every other free column.
    pub vectors: Vec<Vec<(usize, C64)>>,
}

/// Entries of pivot-normalized rows below this are cancellation residue.
const CANCELLATION_TOL: f64 = 1e-14;

/// Gauss–Jordan elimination with largest-magnitude pivots. Entries below
/// `rank_tol` times the largest entry of their original row are dropped.
pub fn sparse_kernel(c: &SparseMatrix, rank_tol: f64) -> SparseKernel {
    // Fully reduced pivot rows, each normalized to 1 at its pivot column.
    let mut pivot_rows: Vec<(usize, BTreeMap<usize, C64>)> = Vec::new();
    let mut pivot_of_col: HashMap<usize, usize> = HashMap::new();
    // Column -> pivot rows that may hold a non-pivot entry there.
    let mut occurrences: HashMap<usize, Vec<usize>> = HashMap::new();

    for row in &c.row_entries {
        let scale = row.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        let mut acc: BTreeMap<usize, C64> = row.iter().copied().collect();
        let hits: Vec<(usize, C64)> = row.iter().filter(|(col, _)| pivot_of_col.contains_key(col)).copied().collect();
        for (col, _) in hits {
            let factor = match acc.get(&col) {
                Some(v) => *v,
                None => continue,
            };
            let pr = &pivot_rows[pivot_of_col[&col]].1;
            for (&k, &v) in pr {
                *acc.entry(k).or_default() -= factor * v;
            }
            acc.remove(&col);
        }
        acc.retain(|_, v| v.norm() > rank_tol * scale);
        let Some((&pc, &pv)) = acc.iter().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())) else {
            continue;
        };
        for v in acc.values_mut() {
            *v /= pv;
        }
        acc.insert(pc, ONE);

        // Clear the new pivot column from earlier pivot rows.
        if let Some(users) = occurrences.remove(&pc) {
            for idx in users {
                let factor = match pivot_rows[idx].1.get(&pc) {
                    Some(v) => *v,
                    None => continue,
                };
                let target = &mut pivot_rows[idx].1;
                for (&k, &v) in &acc {
                    *target.entry(k).or_default() -= factor * v;
                }
                target.remove(&pc);
                target.retain(|_, v| v.norm() > CANCELLATION_TOL);
                for &k in acc.keys() {
                    if k != pc {
                        occurrences.entry(k).or_default().push(idx);
                    }
                }
            }
        }
        let idx = pivot_rows.len();
        for &k in acc.keys() {
            if k != pc {
                occurrences.entry(k).or_default().push(idx);
            }
        }
        pivot_of_col.insert(pc, idx);
        pivot_rows.push((pc, acc));
    }

    let mut vectors = Vec::with_capacity(c.cols - pivot_rows.len());
    for f in (0..c.cols).filter(|col| !pivot_of_col.contains_key(col)) {
        let mut v = vec![(f, ONE)];
        if let Some(users) = occurrences.get(&f) {
            let mut seen = users.clone();
            seen.sort_unstable();
            seen.dedup();
            for idx in seen {
                let (pc, row) = &pivot_rows[idx];
                if let Some(val) = row.get(&f) {
                    v.push((*pc, -*val));
                }
            }
        }
        v.sort_by_key(|e| e.0);
        vectors.push(v);
    }
    SparseKernel { rank: pivot_rows.len(), vectors }
}

/// Per-step record of the sparse propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseStep {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub rank_c: usize,
    /// Constraint matrix used at this step, retained for verification.
    pub constraint: SparseMatrix,
}

#[derive(Debug, Clone)]
pub struct SparseSolutionStack {
    pub local_dim: usize,
    pub gammas: Vec<SparseGamma>,
    pub s_sequence: Vec<usize>,
    pub steps: Vec<SparseStep>,
}

/// Kernel propagation with sparse tensors; identical semantics to
/// [`super::propagate_solutions`] except that kernel bases are echelon-form
/// rather than orthonormal.
pub fn propagate_sparse(chain: &ProjectorChain, rank_tol: f64, keep_constraints: bool) -> Result<SparseSolutionStack> {
    super::check_chain(chain)?;
    let d = chain.spec.local_dim;
    let mut gammas = vec![SparseGamma::identity(d)];
    let mut s_sequence = vec![1, d];
    let mut steps = Vec::new();
    for bond in &chain.bonds {
        let last = gammas.last().expect("nonempty");
        let s_cur = last.right;
        let c = build_sparse_constraint(last, bond)?;
        let kernel = sparse_kernel(&c, rank_tol);
        let k = kernel.vectors.len();
        let mut slices = vec![Vec::new(); d];
        for (beta, v) in kernel.vectors.iter().enumerate() {
            for &(col, val) in v {
                slices[col / s_cur].push((col % s_cur, beta, val));
            }
        }
        steps.push(SparseStep {
            n: s_sequence.len(),
            rows: c.rows,
            cols: c.cols,
            rank_c: kernel.rank,
            constraint: if keep_constraints {
                c
            } else {
                SparseMatrix { rows: c.rows, cols: c.cols, row_entries: Vec::new() }
            },
        });
        s_sequence.push(k);
        if k == 0 {
            break;
        }
        gammas.push(SparseGamma { left: s_cur, local_dim: d, right: k, slices });
    }
    s_sequence.resize(chain.spec.n_sites + 1, 0);
    Ok(SparseSolutionStack { local_dim: d, gammas, s_sequence, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainSpec, Field};
    use crate::exact_solver::{build_constraint_matrix, identity_embedding, propagate_solutions, SolverOptions};
    use crate::linalg;
    use crate::projectors::structured_bond_vectors;

    #[test]
    fn sparse_constraint_matches_dense() {
        let chain = ProjectorChain::random(ChainSpec::new(2, 3, 4, 1).unwrap(), Field::Complex).unwrap();
        let sparse = build_sparse_constraint(&SparseGamma::identity(3), &chain.bonds[0]).unwrap();
        let dense = build_constraint_matrix(&identity_embedding(3), &chain.bonds[0]).unwrap();
        assert!(linalg::max_abs_diff(sparse.to_dense().view(), dense.view()) < 1e-15);
    }

    #[test]
    fn echelon_kernel_of_dense_random_matrix() {
        let chain = ProjectorChain::random(ChainSpec::new(2, 3, 4, 7).unwrap(), Field::Complex).unwrap();
        let c = build_sparse_constraint(&SparseGamma::identity(3), &chain.bonds[0]).unwrap();
        let k = sparse_kernel(&c, 1e-12);
        assert_eq!(k.rank, 4);
        assert_eq!(k.vectors.len(), 5);
        for v in &k.vectors {
            let cx = c.apply(v);
            assert!(cx.iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn dependent_rows_are_detected() {
        let row = vec![(0, ONE), (2, ONE * 2.0)];
        let m = SparseMatrix {
            rows: 3,
            cols: 3,
            row_entries: vec![row.clone(), row.iter().map(|&(c, v)| (c, v * 3.0)).collect(), vec![(1, ONE)]],
        };
        let k = sparse_kernel(&m, 1e-12);
        assert_eq!(k.rank, 2);
        assert_eq!(k.vectors.len(), 1);
        assert!(m.apply(&k.vectors[0]).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn sparse_and_dense_propagation_agree_on_structured_chains() {
        for (d, r, n) in [(2, 1, 6), (4, 4, 5), (4, 3, 5), (5, 6, 4), (6, 9, 3)] {
            let bp = structured_bond_vectors(d, r).unwrap();
            let chain = ProjectorChain::uniform(n, &bp).unwrap();
            let dense = propagate_solutions(&chain, SolverOptions::default()).unwrap();
            let sparse = propagate_sparse(&chain, 1e-10, false).unwrap();
            assert_eq!(dense.s_sequence, sparse.s_sequence, "d={d} r={r}");
            let dr: Vec<usize> = dense.steps.iter().map(|s| s.rank_c).collect();
            let sr: Vec<usize> = sparse.steps.iter().map(|s| s.rank_c).collect();
            assert_eq!(dr, sr);
        }
    }

    #[test]
    fn sparse_propagation_on_random_chain_matches_dense_counts() {
        let chain = ProjectorChain::random(ChainSpec::new(4, 2, 1, 3).unwrap(), Field::Complex).unwrap();
        let dense = propagate_solutions(&chain, SolverOptions::default()).unwrap();
        let sparse = propagate_sparse(&chain, 1e-10, false).unwrap();
        assert_eq!(dense.s_sequence, sparse.s_sequence);
    }
}
