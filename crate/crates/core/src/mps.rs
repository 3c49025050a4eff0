//! Vidal-form matrix product states and imaginary-time TEBD.
//!
//! A state on `N` sites is `Γ^{[1]} λ^{[1]} Γ^{[2]} ⋯ λ^{[N-1]} Γ^{[N]}` with
//! site tensors of shape `(χ_{k-1}, d, χ_k)` and Schmidt weights on each
//! interior bond. Gates are applied Vidal-style; after every full sweep the
//! state is brought back to exact canonical form, which also normalizes it.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE, ZERO};
use crate::projectors::BondProjector;

/// Normalized Schmidt values at or below this are dropped.
pub const SCHMIDT_CUTOFF: f64 = 1e-12;
/// Weights below this are treated as exact zeros when dividing them out.
pub const INVERSE_GUARD: f64 = 1e-12;
/// Bond-dimension cap meaning "never truncate".
pub const UNBOUNDED_CHI: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct MpsState {
    pub local_dim: usize,
    /// Site tensors, shape `(χ_{k-1}, d, χ_k)` with `χ_0 = χ_N = 1`.
    pub gammas: Vec<Array3<C64>>,
    /// Schmidt weights of the `N - 1` interior bonds, descending.
    pub lambdas: Vec<Array1<f64>>,
    pub chi_max: usize,
}

/// Product state with every site in the uniform superposition `(1, …, 1)/√d`.
pub fn uniform_initial_state(spec: &ChainSpec, chi_max: usize) -> MpsState {
    let d = spec.local_dim;
    let site = Array1::from_elem(d, C64::new(1.0 / (d as f64).sqrt(), 0.0));
    MpsState::from_product(&vec![site; spec.n_sites], chi_max)
}

/// `exp(-τ P) = I + (e^{-τ} - 1) P` for a projector `P`.
pub fn imaginary_gate_from_projector(p: ArrayView2<C64>, tau: f64) -> Array2<C64> {
    let n = p.nrows();
    let factor = (-tau).exp_m1();
    let mut g = p.mapv(|z| z * factor);
    for i in 0..n {
        g[[i, i]] += ONE;
    }
    g
}

/// Two-site imaginary-time gate for one bond term.
pub fn two_site_imaginary_gate(bond: &BondProjector, tau: f64) -> Array2<C64> {
    imaginary_gate_from_projector(bond.projector_matrix().view(), tau)
}

fn site_matrix_view(g: &Array3<C64>, rows: usize, cols: usize) -> ArrayView2<'_, C64> {
    g.view().into_shape_with_order((rows, cols)).expect("contiguous site tensor")
}

/// Number of singular values to keep: above the relative cutoff, at most `chi_max`, at least one.
fn kept_count(s: &Array1<f64>, chi_max: usize) -> usize {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return 1.min(s.len());
    }
    let norm = total.sqrt();
    s.iter().take_while(|&&x| x / norm > SCHMIDT_CUTOFF).count().clamp(1, chi_max.max(1)).min(s.len())
}

impl MpsState {
    pub fn n_sites(&self) -> usize {
        self.gammas.len()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.lambdas.iter().map(Array1::len).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Normalized product state from per-site vectors.
    pub fn from_product(sites: &[Array1<C64>], chi_max: usize) -> Self {
        let ms = sites
            .iter()
            .map(|v| v.clone().into_shape_with_order((1, v.len(), 1)).expect("vector"))
            .collect();
        Self::from_site_matrices(ms, chi_max)
    }

    /// Decompose a dense state (site 1 most significant) into canonical form.
    pub fn from_dense(psi: &Array1<C64>, local_dim: usize, n_sites: usize, chi_max: usize) -> Result<Self> {
        let expect = local_dim.pow(n_sites as u32);
        if psi.len() != expect {
            return Err(Error::ShapeMismatch(format!("state has {} amplitudes, expected {expect}", psi.len())));
        }
        let mut ms = Vec::with_capacity(n_sites);
        let mut rest = psi.clone().into_shape_with_order((1, expect)).expect("vector");
        for _ in 0..n_sites - 1 {
            let chi = rest.nrows();
            let cols = rest.ncols() / local_dim;
            let mat = rest.into_shape_with_order((chi * local_dim, cols)).expect("contiguous");
            let svd = linalg::svd(mat.view())?;
            let keep = kept_count(&svd.s, UNBOUNDED_CHI);
            let u = svd.u.slice(s![.., ..keep]).to_owned();
            ms.push(u.into_shape_with_order((chi, local_dim, keep)).expect("contiguous"));
            let mut sv = svd.vt.slice(s![..keep, ..]).to_owned();
            for (mut row, &x) in sv.rows_mut().into_iter().zip(svd.s.iter()) {
                row.mapv_inplace(|z| z * x);
            }
            rest = sv;
        }
        let chi = rest.nrows();
        ms.push(rest.into_shape_with_order((chi, local_dim, 1)).expect("contiguous"));
        Ok(Self::from_site_matrices(ms, chi_max))
    }

    /// Canonical Vidal form of a general MPS given by its site tensors.
    /// The result is normalized; bonds are truncated to `chi_max`.
    pub fn from_site_matrices(mut ms: Vec<Array3<C64>>, chi_max: usize) -> Self {
        let n = ms.len();
        let d = ms[0].dim().1;
        // Left sweep: left-orthonormalize, pushing the remainder right.
        for k in 0..n - 1 {
            let (chi_l, _, chi_r) = ms[k].dim();
            let mat = site_matrix_view(&ms[k], chi_l * d, chi_r);
            let svd = linalg::svd(mat).expect("svd of site tensor");
            let keep = kept_count(&svd.s, UNBOUNDED_CHI);
            ms[k] = svd.u.slice(s![.., ..keep]).to_owned().into_shape_with_order((chi_l, d, keep)).expect("contiguous");
            let mut carry = svd.vt.slice(s![..keep, ..]).to_owned();
            for (mut row, &x) in carry.rows_mut().into_iter().zip(svd.s.iter()) {
                row.mapv_inplace(|z| z * x);
            }
            let (_, _, chi_next) = ms[k + 1].dim();
            let next = site_matrix_view(&ms[k + 1], chi_r, d * chi_next);
            let merged = carry.dot(&next);
            ms[k + 1] = merged.into_shape_with_order((keep, d, chi_next)).expect("contiguous");
        }
        // Right sweep: Schmidt decomposition of every bond.
        let mut lambdas = vec![Array1::zeros(0); n - 1];
        let mut right = vec![Array3::zeros((0, 0, 0)); n];
        let mut cur = ms.pop().expect("nonempty");
        for k in (1..n).rev() {
            let (chi_l, _, chi_r) = cur.dim();
            let mat = site_matrix_view(&cur, chi_l, d * chi_r);
            let svd = linalg::svd(mat).expect("svd of site tensor");
            let keep = kept_count(&svd.s, chi_max);
            let norm = svd.s.slice(s![..keep]).iter().map(|x| x * x).sum::<f64>().sqrt();
            let lam = if norm > 0.0 { svd.s.slice(s![..keep]).mapv(|x| x / norm) } else { Array1::from_elem(keep, 1.0 / (keep as f64).sqrt()) };
            right[k] = svd.vt.slice(s![..keep, ..]).to_owned().into_shape_with_order((keep, d, chi_r)).expect("contiguous");
            let mut us = svd.u.slice(s![.., ..keep]).to_owned();
            linalg::scale_columns(&mut us, lam.as_slice().expect("contiguous"));
            let prev = ms.pop().expect("site tensor");
            let (pl, _, pr) = prev.dim();
            let merged = site_matrix_view(&prev, pl * d, pr).dot(&us);
            cur = merged.into_shape_with_order((pl, d, keep)).expect("contiguous");
            lambdas[k - 1] = lam;
        }
        if n == 1 {
            let norm = linalg::vec_norm(cur.as_slice().expect("contiguous"));
            if norm > 0.0 {
                cur.mapv_inplace(|z| z / norm);
            }
        }
        right[0] = cur;
        // Divide the right weights out: Γ_k = B_k λ_k^{-1}.
        for k in 0..n - 1 {
            let inv: Vec<f64> = lambdas[k].iter().map(|&x| if x > INVERSE_GUARD { 1.0 / x } else { 0.0 }).collect();
            for (mut slab, &w) in right[k].axis_iter_mut(Axis(2)).zip(&inv) {
                slab.mapv_inplace(|z| z * w);
            }
        }
        Self { local_dim: d, gammas: right, lambdas, chi_max }
    }

    /// Site tensors with the right Schmidt weights absorbed, `Γ_k λ_k`.
    pub fn site_matrices(&self) -> Vec<Array3<C64>> {
        self.gammas
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let mut m = g.clone();
                if let Some(lam) = self.lambdas.get(k) {
                    for (mut slab, &w) in m.axis_iter_mut(Axis(2)).zip(lam.iter()) {
                        slab.mapv_inplace(|z| z * w);
                    }
                }
                m
            })
            .collect()
    }

    /// Re-derive exact Schmidt weights and normalize.
    pub fn canonicalize(&mut self) {
        *self = Self::from_site_matrices(self.site_matrices(), self.chi_max);
    }

    /// Dense amplitudes, site 1 most significant.
    pub fn to_dense(&self, cap: usize) -> Result<Array1<C64>> {
        let size = (self.local_dim as u128).checked_pow(self.n_sites() as u32).unwrap_or(u128::MAX);
        if size > cap as u128 {
            return Err(Error::CapExceeded { size, cap });
        }
        let mut left = Array2::from_elem((1, 1), ONE);
        for m in self.site_matrices() {
            let (cl, d, cr) = m.dim();
            let prod = left.dot(&site_matrix_view(&m, cl, d * cr));
            let rows = prod.nrows() * d;
            left = prod.into_shape_with_order((rows, cr)).expect("contiguous");
        }
        let len = left.len();
        Ok(left.into_shape_with_order(len).expect("single column"))
    }

    /// `<ψ|ψ>` by transfer-matrix contraction.
    pub fn norm_sqr(&self) -> f64 {
        let envs = left_environments(&self.site_matrices());
        envs.last().map_or(0.0, |e| e[[0, 0]].re)
    }

    /// Apply a d²×d² gate on bond `bond` (sites `bond`, `bond + 1`), keeping
    /// at most `chi_max` Schmidt values. Returns the discarded fraction of
    /// squared Schmidt weight.
    pub fn apply_gate_and_truncate(&mut self, bond: usize, gate: ArrayView2<C64>, chi_max: usize) -> f64 {
        let d = self.local_dim;
        let n = self.n_sites();
        assert!(bond + 1 < n, "bond {bond} out of range for {n} sites");
        let lam_l = if bond > 0 { self.lambdas[bond - 1].clone() } else { Array1::ones(1) };
        let lam_r = if bond + 2 < n { self.lambdas[bond + 1].clone() } else { Array1::ones(1) };
        let lam_c = &self.lambdas[bond];
        let (chi_l, _, chi_c) = self.gammas[bond].dim();
        let (_, _, chi_r) = self.gammas[bond + 1].dim();

        let mut a = site_matrix_view(&self.gammas[bond], chi_l * d, chi_c).to_owned();
        for (row, mut r) in a.rows_mut().into_iter().enumerate() {
            let w = lam_l[row / d];
            r.mapv_inplace(|z| z * w);
        }
        linalg::scale_columns(&mut a, lam_c.as_slice().expect("contiguous"));
        let mut b = site_matrix_view(&self.gammas[bond + 1], chi_c, d * chi_r).to_owned();
        let scale: Vec<f64> = (0..d * chi_r).map(|c| lam_r[c % chi_r]).collect();
        linalg::scale_columns(&mut b, &scale);
        let theta = a.dot(&b).into_shape_with_order((chi_l, d * d, chi_r)).expect("contiguous");

        let mut gated = Array3::<C64>::zeros((chi_l, d * d, chi_r));
        for (src, mut dst) in theta.axis_iter(Axis(0)).zip(gated.axis_iter_mut(Axis(0))) {
            dst.assign(&gate.dot(&src));
        }
        let mat = gated.into_shape_with_order((chi_l * d, d * chi_r)).expect("contiguous");
        let svd = linalg::svd(mat.view()).expect("svd of two-site tensor");
        let total: f64 = svd.s.iter().map(|x| x * x).sum();
        let keep = kept_count(&svd.s, chi_max);
        let kept: f64 = svd.s.slice(s![..keep]).iter().map(|x| x * x).sum();
        let discarded = if total > 0.0 { ((total - kept) / total).max(0.0) } else { 0.0 };

        let lam_new = if kept > 0.0 {
            svd.s.slice(s![..keep]).mapv(|x| x / kept.sqrt())
        } else {
            Array1::from_elem(keep, 1.0 / (keep as f64).sqrt())
        };
        let mut left = svd.u.slice(s![.., ..keep]).to_owned();
        for (i, mut r) in left.rows_mut().into_iter().enumerate() {
            let w = lam_l[i / d];
            let inv = if w > INVERSE_GUARD { 1.0 / w } else { 0.0 };
            r.mapv_inplace(|z| z * inv);
        }
        let mut right = svd.vt.slice(s![..keep, ..]).to_owned();
        let inv: Vec<f64> = (0..d * chi_r)
            .map(|c| {
                let w = lam_r[c % chi_r];
                if w > INVERSE_GUARD { 1.0 / w } else { 0.0 }
            })
            .collect();
        linalg::scale_columns(&mut right, &inv);

        self.gammas[bond] = left.into_shape_with_order((chi_l, d, keep)).expect("contiguous");
        self.gammas[bond + 1] = right.into_shape_with_order((keep, d, chi_r)).expect("contiguous");
        self.lambdas[bond] = lam_new;
        discarded
    }

    /// Largest violation of the Vidal-form weight invariants: normalization
    /// `Σλ² = 1`, descending order, nonnegativity, and the `χ` cap.
    pub fn weight_invariant_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for lam in &self.lambdas {
            let sum: f64 = lam.iter().map(|x| x * x).sum();
            worst = worst.max((sum - 1.0).abs());
            for w in lam.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
            worst = worst.max(-lam.iter().copied().fold(0.0, f64::min));
            if lam.len() > self.chi_max {
                worst = f64::INFINITY;
            }
        }
        worst
    }
}

fn left_environments(ms: &[Array3<C64>]) -> Vec<Array2<C64>> {
    let mut envs = Vec::with_capacity(ms.len() + 1);
    envs.push(Array2::from_elem((1, 1), ONE));
    for m in ms {
        let prev = envs.last().expect("nonempty");
        let (_, d, cr) = m.dim();
        let mut next = Array2::<C64>::zeros((cr, cr));
        for i in 0..d {
            let mi = m.slice(s![.., i, ..]);
            let lm = prev.dot(&mi);
            next += &linalg::adjoint(mi).dot(&lm);
        }
        envs.push(next);
    }
    envs
}

fn right_environments(ms: &[Array3<C64>]) -> Vec<Array2<C64>> {
    let n = ms.len();
    let mut envs = vec![Array2::zeros((0, 0)); n + 1];
    envs[n] = Array2::from_elem((1, 1), ONE);
    for k in (0..n).rev() {
        let m = &ms[k];
        let (cl, d, _) = m.dim();
        let mut next = Array2::<C64>::zeros((cl, cl));
        for i in 0..d {
            let mi = m.slice(s![.., i, ..]);
            // R[a, a'] = Σ M[a,i,b] R[b,b'] conj(M[a',i,b'])
            next += &mi.dot(&envs[k + 1]).dot(&linalg::adjoint(mi));
        }
        envs[k] = next;
    }
    envs
}

/// Energy of a state, evaluated by local contraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    /// `max(0, raw)`.
    pub value: f64,
    pub raw: f64,
    /// Imaginary part of `<ψ|H|ψ>/<ψ|ψ>`, which should vanish.
    pub imag_residue: f64,
}

/// `Σ_k <ψ|P_k|ψ> / <ψ|ψ>` without densifying.
pub fn energy(state: &MpsState, bonds: &[BondProjector]) -> EnergyEstimate {
    let d = state.local_dim;
    let ms = state.site_matrices();
    let lefts = left_environments(&ms);
    let rights = right_environments(&ms);
    let norm = lefts.last().expect("nonempty")[[0, 0]].re;
    let mut total = ZERO;
    for bond in bonds {
        let k = bond.bond;
        let (cl, _, cc) = ms[k].dim();
        let (_, _, cr) = ms[k + 1].dim();
        let pair = site_matrix_view(&ms[k], cl * d, cc).dot(&site_matrix_view(&ms[k + 1], cc, d * cr));
        let pair = pair.into_shape_with_order((cl, d * d, cr)).expect("contiguous");
        for p in 0..bond.rank() {
            let mut w = Array2::<C64>::zeros((cl, cr));
            for ij in 0..d * d {
                let c = bond.vectors[[p, ij]].conj();
                if c != ZERO {
                    w.scaled_add(c, &pair.slice(s![.., ij, ..]));
                }
            }
            let lwr = lefts[k].dot(&w).dot(&rights[k + 2]);
            total += w.iter().zip(lwr.iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
        }
    }
    let raw = total.re / norm;
    EnergyEstimate { value: raw.max(0.0), raw, imag_residue: total.im / norm }
}

/// Von Neumann entropy `-Σ λ² ln λ²` of every interior bond.
pub fn bond_entropies(state: &MpsState) -> Vec<f64> {
    state
        .lambdas
        .iter()
        .map(|lam| {
            lam.iter()
                .map(|&x| x * x)
                .filter(|&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TrotterOrder {
    /// Odd bonds, then even bonds.
    #[default]
    First,
    /// Half step on odd bonds, full step on even bonds, half step on odd bonds.
    Second,
}

/// One row of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub sweep: usize,
    pub tau: f64,
    pub energy: f64,
    pub max_truncation_error: f64,
    pub min_bond_entropy: f64,
    pub max_bond_entropy: f64,
}

/// One full imaginary-time step: gates on bonds 1, 3, 5, … (1-based) then on
/// bonds 2, 4, …, followed by canonicalization, which renormalizes.
pub fn sweep(state: &mut MpsState, bonds: &[BondProjector], tau: f64, chi_max: usize, order: TrotterOrder) -> ConvergenceRow {
    let odd: Vec<&BondProjector> = bonds.iter().filter(|b| b.bond % 2 == 0).collect();
    let even: Vec<&BondProjector> = bonds.iter().filter(|b| b.bond % 2 == 1).collect();
    let mut max_trunc: f64 = 0.0;
    let mut layer = |state: &mut MpsState, layer: &[&BondProjector], t: f64| {
        for b in layer {
            let gate = two_site_imaginary_gate(b, t);
            max_trunc = max_trunc.max(state.apply_gate_and_truncate(b.bond, gate.view(), chi_max));
        }
    };
    match order {
        TrotterOrder::First => {
            layer(state, &odd, tau);
            layer(state, &even, tau);
        }
        TrotterOrder::Second => {
            layer(state, &odd, tau / 2.0);
            layer(state, &even, tau);
            layer(state, &odd, tau / 2.0);
        }
    }
    state.canonicalize();
    let entropies = bond_entropies(state);
    ConvergenceRow {
        sweep: 0,
        tau,
        energy: energy(state, bonds).value,
        max_truncation_error: max_trunc,
        min_bond_entropy: if entropies.is_empty() { 0.0 } else { entropies.iter().copied().fold(f64::INFINITY, f64::min) },
        max_bond_entropy: entropies.iter().copied().fold(0.0, f64::max),
    }
}

pub type ConvergenceTrace = Vec<ConvergenceRow>;

/// Staged step sizes; the next stage starts once the relative energy
/// improvement of a sweep falls below `advance_below`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSchedule {
    pub taus: Vec<f64>,
    pub advance_below: f64,
}

impl Default for TauSchedule {
    fn default() -> Self {
        Self { taus: vec![0.5, 0.1, 0.02], advance_below: 1e-3 }
    }
}

/// Stop once, in the final stage, the relative energy change stays below
/// `rel_tol` for `patience` consecutive sweeps, the energy drops below
/// `energy_floor`, or `max_sweeps` is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub rel_tol: f64,
    pub patience: usize,
    pub max_sweeps: usize,
    pub energy_floor: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { rel_tol: 1e-9, patience: 10, max_sweeps: 5000, energy_floor: 1e-13 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    EnergyFloor,
    MaxSweeps,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub state: MpsState,
    pub trace: ConvergenceTrace,
    pub stop: StopReason,
}

impl SearchOutcome {
    pub fn final_energy(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.energy)
    }
}

/// Imaginary-time ground-state search from the uniform product state.
pub fn ground_search(
    spec: &ChainSpec,
    bonds: &[BondProjector],
    schedule: &TauSchedule,
    chi_max: usize,
    stop: StopRule,
    order: TrotterOrder,
) -> Result<SearchOutcome> {
    if schedule.taus.is_empty() {
        return Err(Error::InvalidChain("empty tau schedule".into()));
    }
    let mut state = uniform_initial_state(spec, chi_max);
    let mut prev = energy(&state, bonds).value;
    let mut stage = 0;
    let mut calm = 0;
    let mut trace = Vec::new();
    for sweep_index in 1..=stop.max_sweeps {
        let tau = schedule.taus[stage];
        let mut row = sweep(&mut state, bonds, tau, chi_max, order);
        row.sweep = sweep_index;
        trace.push(row);
        let e = row.energy;
        if e <= stop.energy_floor {
            return Ok(SearchOutcome { state, trace, stop: StopReason::EnergyFloor });
        }
        let change = (prev - e) / prev.max(f64::MIN_POSITIVE);
        prev = e;
        if stage + 1 < schedule.taus.len() {
            if change < schedule.advance_below {
                stage += 1;
            }
            continue;
        }
        calm = if change.abs() < stop.rel_tol { calm + 1 } else { 0 };
        if calm >= stop.patience {
            return Ok(SearchOutcome { state, trace, stop: StopReason::Converged });
        }
    }
    Ok(SearchOutcome { state, trace, stop: StopReason::MaxSweeps })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Field;
    use crate::dense_oracle::{build_dense_hamiltonian, DEFAULT_DENSE_CAP};
    use crate::projectors::ProjectorChain;

    fn random_dense(len: usize, seed: u64) -> Array1<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        Array1::from_shape_fn(len, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn normalized(v: &Array1<C64>) -> Array1<C64> {
        let n = linalg::vec_norm(v.as_slice().unwrap());
        v.mapv(|z| z / n)
    }

    fn overlap_abs(a: &Array1<C64>, b: &Array1<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
    }

    #[test]
    fn dense_round_trip_is_exact_without_truncation() {
        let psi = normalized(&random_dense(3usize.pow(5), 4));
        let mps = MpsState::from_dense(&psi, 3, 5, UNBOUNDED_CHI).unwrap();
        assert!(mps.weight_invariant_error() < 1e-12);
        assert_eq!(mps.bond_dims(), vec![3, 9, 9, 3]);
        let back = mps.to_dense(1 << 20).unwrap();
        assert!((overlap_abs(&psi, &back) - 1.0).abs() < 1e-12);
        assert!((mps.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_state_is_product() {
        let spec = ChainSpec::new(6, 3, 2, 0).unwrap();
        let mps = uniform_initial_state(&spec, 8);
        assert_eq!(mps.bond_dims(), vec![1; 5]);
        assert!(bond_entropies(&mps).iter().all(|&s| s.abs() < 1e-14));
        let dense = mps.to_dense(1 << 12).unwrap();
        let expect = 1.0 / (3f64.powi(6)).sqrt();
        assert!(dense.iter().all(|z| (z.re - expect).abs() < 1e-14 && z.im.abs() < 1e-14));
    }

    #[test]
    fn gate_matches_dense_application() {
        let chain = ProjectorChain::random(ChainSpec::new(5, 2, 2, 9).unwrap(), Field::Complex).unwrap();
        let psi = normalized(&random_dense(32, 1));
        let mut mps = MpsState::from_dense(&psi, 2, 5, UNBOUNDED_CHI).unwrap();
        let gate = two_site_imaginary_gate(&chain.bonds[2], 0.3);
        let trunc = mps.apply_gate_and_truncate(2, gate.view(), UNBOUNDED_CHI);
        assert!(trunc < 1e-14);
        let expect = normalized(&crate::dense_oracle::apply_two_site(psi.view(), gate.view(), 2, 5, 2));
        let got = normalized(&mps.to_dense(1 << 10).unwrap());
        assert!((overlap_abs(&expect, &got) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn gate_equals_matrix_exponential_of_projector() {
        let chain = ProjectorChain::random(ChainSpec::new(2, 3, 4, 2).unwrap(), Field::Complex).unwrap();
        let b = &chain.bonds[0];
        let tau = 0.7;
        let g = two_site_imaginary_gate(b, tau);
        let p = b.projector_matrix();
        // P² = P, so the series collapses; check against a direct Taylor sum.
        let mut term = Array2::<C64>::eye(9);
        let mut sum = term.clone();
        for k in 1..40 {
            term = term.dot(&p).mapv(|z| z * (-tau / k as f64));
            sum += &term;
        }
        assert!(linalg::max_abs_diff(g.view(), sum.view()) < 1e-13);
    }

    #[test]
    fn energy_matches_dense_expectation() {
        let chain = ProjectorChain::random(ChainSpec::new(6, 2, 2, 5).unwrap(), Field::Complex).unwrap();
        let psi = random_dense(64, 8);
        let mps = MpsState::from_dense(&psi, 2, 6, UNBOUNDED_CHI).unwrap();
        let h = build_dense_hamiltonian(&chain, DEFAULT_DENSE_CAP).unwrap();
        let hpsi = h.apply(psi.view());
        let num: C64 = psi.iter().zip(hpsi.iter()).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let e = energy(&mps, &chain.bonds);
        assert!((e.raw - num.re / den).abs() < 1e-12);
        assert!(e.imag_residue.abs() < 1e-12);
    }

    #[test]
    fn truncation_respects_cap() {
        let psi = normalized(&random_dense(2usize.pow(8), 3));
        let mut mps = MpsState::from_dense(&psi, 2, 8, 4).unwrap();
        assert!(mps.bond_dims().iter().all(|&c| c <= 4));
        assert!(mps.weight_invariant_error() < 1e-12);
        mps.canonicalize();
        assert!(mps.weight_invariant_error() < 1e-12);
    }

    #[test]
    fn sweep_keeps_invariants_and_lowers_energy() {
        let spec = ChainSpec::new(8, 3, 2, 11).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let mut mps = uniform_initial_state(&spec, 6);
        let e0 = energy(&mps, &chain.bonds).value;
        let mut last = e0;
        for _ in 0..20 {
            let row = sweep(&mut mps, &chain.bonds, 0.1, 6, TrotterOrder::First);
            assert!(mps.weight_invariant_error() < 1e-10);
            assert!(row.energy >= 0.0);
            assert!(row.max_truncation_error >= 0.0);
            last = row.energy;
        }
        assert!(last < e0);
        assert!(mps.max_bond_dim() <= 6);
    }

    #[test]
    fn ground_search_finds_frustration_free_state() {
        let spec = ChainSpec::new(8, 3, 2, 3).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let out = ground_search(&spec, &chain.bonds, &TauSchedule::default(), 32, StopRule::default(), TrotterOrder::First).unwrap();
        assert!(out.final_energy() < 1e-6, "energy {}", out.final_energy());
    }

    #[test]
    fn second_order_sweep_runs() {
        let spec = ChainSpec::new(5, 2, 1, 3).unwrap();
        let chain = ProjectorChain::random(spec, Field::Real).unwrap();
        let mut mps = uniform_initial_state(&spec, 4);
        let row = sweep(&mut mps, &chain.bonds, 0.2, 4, TrotterOrder::Second);
        assert!(row.energy.is_finite());
    }
    #[test]
    fn gate_limits() {
        let chain = ProjectorChain::random(ChainSpec::new(2, 3, 4, 6).unwrap(), Field::Complex).unwrap();
        let b = &chain.bonds[0];
        let id = Array2::<C64>::eye(9);
        assert!(linalg::max_abs_diff(two_site_imaginary_gate(b, 0.0).view(), id.view()) == 0.0);
        let complement = &id - &b.projector_matrix();
        assert!(linalg::max_abs_diff(two_site_imaginary_gate(b, 60.0).view(), complement.view()) < 1e-20 * 9.0 + 1e-15);
        let mut eig = linalg::eigvalsh(two_site_imaginary_gate(b, 0.3).view()).unwrap();
        eig.sort_by(f64::total_cmp);
        for (k, x) in eig.iter().enumerate() {
            let expect = if k < 4 { (-0.3f64).exp() } else { 1.0 };
            assert!((x - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_projectors_keep_energy_at_bond_count() {
        let spec = ChainSpec::new(5, 2, 4, 0).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let mut mps = uniform_initial_state(&spec, 4);
        for _ in 0..5 {
            let row = sweep(&mut mps, &chain.bonds, 0.3, 4, TrotterOrder::First);
            assert!((row.energy - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_step_sweep_leaves_state_unchanged() {
        let spec = ChainSpec::new(6, 2, 1, 2).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let psi = normalized(&random_dense(64, 5));
        let mut mps = MpsState::from_dense(&psi, 2, 6, UNBOUNDED_CHI).unwrap();
        sweep(&mut mps, &chain.bonds, 0.0, UNBOUNDED_CHI, TrotterOrder::First);
        let back = mps.to_dense(1 << 10).unwrap();
        let diff = back.iter().zip(psi.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-10);
    }

    #[test]
    fn singlet_bond_annihilates_uniform_state() {
        let s = 1.0 / 2f64.sqrt();
        let v = Array2::from_shape_vec((1, 4), vec![ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO]).unwrap();
        let bond = BondProjector::new(0, 2, v).unwrap();
        let spec = ChainSpec::new(2, 2, 1, 0).unwrap();
        let e = energy(&uniform_initial_state(&spec, 2), &[bond]);
        assert!(e.value.abs() < 1e-15);
    }

    #[test]
    fn excited_bond_contributes_one() {
        let chain = ProjectorChain::random(ChainSpec::new(4, 2, 1, 3).unwrap(), Field::Complex).unwrap();
        // |v^1> on sites 2,3 and arbitrary product vectors elsewhere.
        let v = chain.bonds[1].vectors.row(0).to_owned();
        let a = Array1::from(vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)]);
        let mut psi = Array1::<C64>::zeros(16);
        for i in 0..2 {
            for jk in 0..4 {
                for l in 0..2 {
                    psi[i * 8 + jk * 2 + l] = a[i] * v[jk] * a[l];
                }
            }
        }
        let mps = MpsState::from_dense(&psi, 2, 4, UNBOUNDED_CHI).unwrap();
        assert!(energy(&mps, &chain.bonds).value >= 1.0 - 1e-12);
    }

    #[test]
    fn bell_pair_entropy_is_ln2() {
        let s = 1.0 / 2f64.sqrt();
        let psi = Array1::from(vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]);
        let mps = MpsState::from_dense(&psi, 2, 2, UNBOUNDED_CHI).unwrap();
        assert!((bond_entropies(&mps)[0] - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rank_one_truncation_reports_discarded_weight() {
        let chain = ProjectorChain::random(ChainSpec::new(2, 3, 2, 8).unwrap(), Field::Complex).unwrap();
        let b = &chain.bonds[0];
        let site = Array1::from(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), ZERO]);
        let mut mps = MpsState::from_product(&[site.clone(), site.clone()], 1);
        let gate = two_site_imaginary_gate(b, 60.0);
        let w = mps.apply_gate_and_truncate(0, gate.view(), 1);
        // Oracle: SVD of the projected two-site state.
        let mut two = Array1::<C64>::zeros(9);
        for i in 0..3 {
            for j in 0..3 {
                two[i * 3 + j] = site[i] * site[j];
            }
        }
        let projected = gate.dot(&two).into_shape_with_order((3, 3)).unwrap();
        let sv = linalg::singular_values(projected.view()).unwrap();
        let total: f64 = sv.iter().map(|x| x * x).sum();
        assert!((w - (1.0 - sv[0] * sv[0] / total)).abs() < 1e-12);
        let best = normalized(&mps.to_dense(9).unwrap());
        let svd = linalg::svd(projected.view()).unwrap();
        let mut rank_one = Array1::<C64>::zeros(9);
        for i in 0..3 {
            for j in 0..3 {
                rank_one[i * 3 + j] = svd.u[[i, 0]] * svd.vt[[0, j]];
            }
        }
        assert!((overlap_abs(&best, &rank_one) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_unfrustrated_chain_reaches_zero_energy() {
        let spec = ChainSpec::new(4, 2, 1, 5).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let out = ground_search(&spec, &chain.bonds, &TauSchedule::default(), 4, StopRule::default(), TrotterOrder::First).unwrap();
        assert!(out.final_energy() < 1e-8);
        let h = build_dense_hamiltonian(&chain, DEFAULT_DENSE_CAP).unwrap();
        assert!(h.ground_energy().unwrap().abs() < 1e-10);
    }

    #[test]
    fn assembled_zero_energy_state_has_zero_mps_energy() {
        let spec = ChainSpec::new(6, 3, 2, 2).unwrap();
        let chain = ProjectorChain::random(spec, Field::Complex).unwrap();
        let stack = crate::exact_solver::propagate_solutions(&chain, Default::default()).unwrap();
        let psi = crate::exact_solver::assemble_state(&stack, 0, 1 << 12, true).unwrap();
        let mps = MpsState::from_dense(&psi, 3, 6, UNBOUNDED_CHI).unwrap();
        assert!(energy(&mps, &chain.bonds).value < 1e-8);
    }
}
