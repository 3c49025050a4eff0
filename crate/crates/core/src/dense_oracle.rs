//! Brute-force reference: the full `d^N`-dimensional Hamiltonian, its
//! spectrum, and dense imaginary-time evolution.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::mps::imaginary_gate_from_projector;
use crate::projectors::{BondProjector, ProjectorChain};

/// Default cap on the Hilbert-space dimension for full eigensolves.
pub const DEFAULT_DENSE_CAP: usize = 1 << 14;
/// Default cap for matrix-free application.
pub const DEFAULT_MATRIX_FREE_CAP: usize = 1 << 20;
/// Eigenvalues below this count as zero energy.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-8;

fn checked_dim(d: usize, n: usize, cap: usize) -> Result<usize> {
    let size = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(size as usize)
}

/// Apply a two-site operator `op` (d²×d²) on sites `k, k+1` of a dense state.
pub fn apply_two_site(x: ArrayView1<C64>, op: ArrayView2<C64>, d: usize, n_sites: usize, k: usize) -> Array1<C64> {
    let d2 = d * d;
    let right = d.pow((n_sites - k - 2) as u32);
    let left = x.len() / (d2 * right);
    let mut out = Array1::zeros(x.len());
    let mut buf = vec![C64::new(0.0, 0.0); d2];
    for l in 0..left {
        for rr in 0..right {
            let base = l * d2 * right + rr;
            for (ab, slot) in buf.iter_mut().enumerate() {
                *slot = x[base + ab * right];
            }
            for a in 0..d2 {
                let row = op.row(a);
                out[base + a * right] = row.iter().zip(&buf).map(|(o, v)| o * v).sum();
            }
        }
    }
    out
}

/// Sum of bond projectors applied without materializing the full matrix.
#[derive(Debug, Clone)]
pub struct MatrixFreeHamiltonian {
    pub n_sites: usize,
    pub local_dim: usize,
    pub dim: usize,
    pub bond_matrices: Vec<Array2<C64>>,
}

impl MatrixFreeHamiltonian {
    pub fn new(chain: &ProjectorChain, cap: usize) -> Result<Self> {
        let spec = chain.spec;
        let dim = checked_dim(spec.local_dim, spec.n_sites, cap)?;
        Ok(Self {
            n_sites: spec.n_sites,
            local_dim: spec.local_dim,
            dim,
            bond_matrices: chain.bonds.iter().map(BondProjector::projector_matrix).collect(),
        })
    }

    pub fn apply(&self, x: ArrayView1<C64>) -> Array1<C64> {
        let mut out = Array1::zeros(self.dim);
        for (k, p) in self.bond_matrices.iter().enumerate() {
            out += &apply_two_site(x, p.view(), self.local_dim, self.n_sites, k);
        }
        out
    }

    /// `<x|H|x> / <x|x>`.
    pub fn expectation(&self, x: ArrayView1<C64>) -> f64 {
        let hx = self.apply(x);
        let num: C64 = x.iter().zip(hx.iter()).map(|(a, b)| a.conj() * b).sum();
        num.re / x.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Dense Hamiltonian `Σ_k I ⊗ P_k ⊗ I`, site 1 most significant.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    pub matrix: Array2<C64>,
    pub operator: MatrixFreeHamiltonian,
}

/// Number of zero-energy eigenvalues and how many eigenvalues fall in the
/// ambiguous band `[tol, 100·tol]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelCount {
    pub dim: usize,
    pub ambiguous: usize,
}

pub fn build_dense_hamiltonian(chain: &ProjectorChain, cap: usize) -> Result<DenseHamiltonian> {
    let operator = MatrixFreeHamiltonian::new(chain, cap)?;
    let (d, n, dim) = (operator.local_dim, operator.n_sites, operator.dim);
    let d2 = d * d;
    let mut matrix = Array2::<C64>::zeros((dim, dim));
    for (k, p) in operator.bond_matrices.iter().enumerate() {
        let right = d.pow((n - k - 2) as u32);
        let left = dim / (d2 * right);
        for l in 0..left {
            for rr in 0..right {
                let base = l * d2 * right + rr;
                for a in 0..d2 {
                    for b in 0..d2 {
                        matrix[[base + a * right, base + b * right]] += p[[a, b]];
                    }
                }
            }
        }
    }
    Ok(DenseHamiltonian { matrix, operator })
}

impl DenseHamiltonian {
    pub fn dim(&self) -> usize {
        self.operator.dim
    }

    pub fn apply(&self, x: ArrayView1<C64>) -> Array1<C64> {
        self.matrix.dot(&x)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::eigvalsh(self.matrix.view())
    }

    pub fn kernel_dimension(&self, tol: f64) -> Result<KernelCount> {
        let w = self.eigenvalues()?;
        let dim = w.iter().filter(|&&e| e < tol).count();
        let ambiguous = w.iter().filter(|&&e| e >= tol && e <= 100.0 * tol).count();
        if ambiguous > 0 {
            log::warn!("{ambiguous} eigenvalues in the ambiguous band [{tol:e}, {:e}]", 100.0 * tol);
        }
        Ok(KernelCount { dim, ambiguous })
    }

    /// Smallest eigenvalue.
    pub fn ground_energy(&self) -> Result<f64> {
        let w = self.eigenvalues()?;
        Ok(w.first().copied().unwrap_or(0.0))
    }
}

pub fn kernel_dimension(h: &DenseHamiltonian, tol: f64) -> Result<KernelCount> {
    h.kernel_dimension(tol)
}

pub fn ground_energy(h: &DenseHamiltonian) -> Result<f64> {
    h.ground_energy()
}

/// How each imaginary-time step is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionMode {
    /// Odd bonds then even bonds, one closed-form gate each.
    Trotterized,
    /// `exp(-τH)` from the eigendecomposition.
    Exact,
}

#[derive(Debug, Clone)]
pub struct DenseEvolution {
    pub state: Array1<C64>,
    /// Energy after each step.
    pub energies: Vec<f64>,
}

/// Uniform superposition over all `d^N` basis states.
pub fn uniform_state(dim: usize) -> Array1<C64> {
    Array1::from_elem(dim, C64::new(1.0 / (dim as f64).sqrt(), 0.0))
}

/// Imaginary-time evolution from the uniform state, normalizing after every
/// step.
pub fn dense_imaginary_evolution(h: &DenseHamiltonian, tau: f64, steps: usize, mode: EvolutionMode) -> Result<DenseEvolution> {
    let op = &h.operator;
    let mut state = uniform_state(op.dim);
    let mut energies = Vec::with_capacity(steps);
    match mode {
        EvolutionMode::Trotterized => {
            let gates: Vec<Array2<C64>> = op
                .bond_matrices
                .iter()
                .map(|p| imaginary_gate_from_projector(p.view(), tau))
                .collect();
            let order: Vec<usize> = (0..gates.len()).step_by(2).chain((1..gates.len()).step_by(2)).collect();
            for _ in 0..steps {
                for &k in &order {
                    state = apply_two_site(state.view(), gates[k].view(), op.local_dim, op.n_sites, k);
                }
                normalize(&mut state);
                energies.push(op.expectation(state.view()));
            }
        }
        EvolutionMode::Exact => {
            let (w, u) = linalg::eigh(h.matrix.view())?;
            let mut coeffs = linalg::adjoint(u.view()).dot(&state);
            for _ in 0..steps {
                for (c, &e) in coeffs.iter_mut().zip(&w) {
                    *c *= (-tau * e).exp();
                }
                normalize(&mut coeffs);
                energies.push(coeffs.iter().zip(&w).map(|(c, e)| c.norm_sqr() * e).sum());
            }
            state = u.dot(&coeffs);
        }
    }
    Ok(DenseEvolution { state, energies })
}

fn normalize(x: &mut Array1<C64>) {
    let norm = linalg::vec_norm(x.as_slice().expect("contiguous"));
    if norm > 0.0 {
        x.mapv_inplace(|z| z / norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainSpec, Field};

    fn chain(n: usize, d: usize, r: usize, seed: u64) -> ProjectorChain {
        ProjectorChain::random(ChainSpec::new(n, d, r, seed).unwrap(), Field::Complex).unwrap()
    }

    #[test]
    fn two_sites_give_the_bond_projector() {
        let c = chain(2, 3, 4, 1);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        assert!(linalg::max_abs_diff(h.matrix.view(), c.bonds[0].projector_matrix().view()) < 1e-15);
    }

    #[test]
    fn full_rank_terms_sum_to_scaled_identity() {
        let c = chain(4, 2, 4, 3);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        let expect = Array2::<f64>::eye(16).mapv(|x| C64::from(3.0 * x));
        assert!(linalg::max_abs_diff(h.matrix.view(), expect.view()) < 1e-12);
        assert!((h.ground_energy().unwrap() - 3.0).abs() < 1e-12);
        let c3 = chain(3, 2, 4, 3);
        let h3 = build_dense_hamiltonian(&c3, DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(h3.kernel_dimension(DEFAULT_KERNEL_TOL).unwrap().dim, 0);
    }

    #[test]
    fn matrix_free_apply_agrees_with_dense() {
        let c = chain(3, 2, 1, 5);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        let x = Array1::from_shape_fn(8, |i| C64::new(i as f64 - 3.0, (i * i) as f64 * 0.1));
        let a = h.apply(x.view());
        let b = h.operator.apply(x.view());
        assert!(a.iter().zip(b.iter()).all(|(p, q)| (p - q).norm() < 1e-12));
    }

    #[test]
    fn hamiltonian_is_hermitian_and_psd() {
        let c = chain(4, 2, 2, 8);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        assert!(linalg::max_abs_diff(h.matrix.view(), linalg::adjoint(h.matrix.view()).view()) < 1e-12);
        assert!(h.ground_energy().unwrap() > -1e-9);
    }

    #[test]
    fn kernel_counts_for_small_instances() {
        let h = build_dense_hamiltonian(&chain(3, 2, 1, 2), DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(h.kernel_dimension(DEFAULT_KERNEL_TOL).unwrap(), KernelCount { dim: 4, ambiguous: 0 });
        let h = build_dense_hamiltonian(&chain(3, 2, 2, 2), DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(h.kernel_dimension(DEFAULT_KERNEL_TOL).unwrap().dim, 0);
        let h = build_dense_hamiltonian(&chain(4, 2, 2, 2), DEFAULT_DENSE_CAP).unwrap();
        assert!(h.ground_energy().unwrap() > 1e-6);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(build_dense_hamiltonian(&chain(5, 4, 1, 0), 1 << 8), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn exact_evolution_reaches_the_kernel_monotonically() {
        let c = chain(4, 2, 1, 6);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        let evo = dense_imaginary_evolution(&h, 1.0, 300, EvolutionMode::Exact).unwrap();
        for w in evo.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
        let last = *evo.energies.last().unwrap();
        assert!(last < 1e-10, "final energy {last}");
    }

    #[test]
    fn zero_step_evolution_keeps_uniform_state() {
        let c = chain(3, 2, 1, 6);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        let evo = dense_imaginary_evolution(&h, 0.0, 3, EvolutionMode::Trotterized).unwrap();
        let u = uniform_state(8);
        assert!(evo.state.iter().zip(u.iter()).all(|(a, b)| (a - b).norm() < 1e-14));
    }

    #[test]
    fn trotterized_and_exact_agree_for_small_steps() {
        let c = chain(4, 2, 1, 12);
        let h = build_dense_hamiltonian(&c, DEFAULT_DENSE_CAP).unwrap();
        let t = dense_imaginary_evolution(&h, 0.02, 3000, EvolutionMode::Trotterized).unwrap();
        let e = dense_imaginary_evolution(&h, 0.02, 3000, EvolutionMode::Exact).unwrap();
        assert!((t.energies.last().unwrap() - e.energies.last().unwrap()).abs() < 1e-6);
    }
}
