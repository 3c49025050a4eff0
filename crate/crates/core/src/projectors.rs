//! Local projector interaction terms: the random ensemble, the structured
//! block construction, and reduction of a general two-site term.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chain::{check_rank, ChainSpec, Field};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE, ZERO};

/// Default relative tolerance for merging near-degenerate levels.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

/// One interaction term: `rank` orthonormal vectors in the two-site space.
///
/// Row `p` of `vectors` holds the components of `|v^p>` in the product basis
/// `|i j>`, flattened as `i * d + j`. The projector is `P = sum_p |v^p><v^p|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BondProjector {
    /// 0-based bond index; bond `k` couples sites `k` and `k + 1`.
    pub bond: usize,
    pub local_dim: usize,
    pub vectors: Array2<C64>,
}

impl BondProjector {
    pub fn new(bond: usize, local_dim: usize, vectors: Array2<C64>) -> Result<Self> {
        let d2 = local_dim * local_dim;
        if vectors.ncols() != d2 {
            return Err(Error::ShapeMismatch(format!(
                "bond vectors have {} components, expected d^2 = {d2}",
                vectors.ncols()
            )));
        }
        check_rank(local_dim, vectors.nrows())?;
        Ok(Self { bond, local_dim, vectors })
    }

    pub fn rank(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn with_bond(mut self, bond: usize) -> Self {
        self.bond = bond;
        self
    }

    /// `<v^p | i j>`, i.e. the conjugated component.
    #[inline]
    pub fn bra(&self, p: usize, i: usize, j: usize) -> C64 {
        self.vectors[[p, i * self.local_dim + j]].conj()
    }

    /// The d²×d² projector matrix `sum_p |v^p><v^p|`.
    pub fn projector_matrix(&self) -> Array2<C64> {
        let v = &self.vectors;
        v.t().dot(&v.mapv(|z| z.conj()))
    }

    /// Largest entrywise deviation of the row Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.dot(&linalg::adjoint(self.vectors.view()));
        linalg::max_abs_diff(g.view(), Array2::<C64>::eye(self.rank()).view())
    }
}

/// Draw a Haar-random rank-`r` projector on the two-site space of qudits of
/// dimension `d`: Gaussian rows, then two-pass Gram–Schmidt.
pub fn sample_bond_projector<R: Rng + ?Sized>(
    d: usize,
    r: usize,
    field: Field,
    rng: &mut R,
) -> Result<BondProjector> {
    check_rank(d, r)?;
    let d2 = d * d;
    loop {
        let mut v = Array2::from_shape_fn((r, d2), |_| match field {
            Field::Complex => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
            Field::Real => C64::new(rng.sample(StandardNormal), 0.0),
        });
        // A collapse has probability zero; redraw if it ever happens.
        if linalg::orthonormalize_rows(&mut v) {
            return BondProjector::new(0, d, v);
        }
    }
}

/// Deterministic vectors supported only on `|i j>` with `i < floor(d/2) <= j`,
/// chosen as the first `r` standard basis vectors of that block in
/// lexicographic `(i, j)` order.
pub fn structured_bond_vectors(d: usize, r: usize) -> Result<BondProjector> {
    check_rank(d, r)?;
    let lower = d / 2;
    let block = lower * (d - lower);
    if r > block {
        return Err(Error::RankOutOfRange { rank: r, local_dim: d, max: block });
    }
    let mut v = Array2::zeros((r, d * d));
    let slots = (0..lower).flat_map(|i| (lower..d).map(move |j| (i, j)));
    for (p, (i, j)) in slots.take(r).enumerate() {
        v[[p, i * d + j]] = ONE;
    }
    BondProjector::new(0, d, v)
}

/// A full chain of bond projectors together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorChain {
    pub spec: ChainSpec,
    pub field: Field,
    pub bonds: Vec<BondProjector>,
}

impl ProjectorChain {
    /// Random instance; bond `k` draws from its own substream of `spec.seed`.
    pub fn random(spec: ChainSpec, field: Field) -> Result<Self> {
        spec.validate()?;
        let bonds = (0..spec.n_bonds())
            .map(|k| {
                let mut rng = spec.bond_rng(k);
                sample_bond_projector(spec.local_dim, spec.rank, field, &mut rng)
                    .map(|b| b.with_bond(k))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { spec, field, bonds })
    }

    /// Every bond carries the structured block vectors.
    pub fn structured(n_sites: usize, d: usize, r: usize) -> Result<Self> {
        let spec = ChainSpec::new(n_sites, d, r, 0)?;
        let proto = structured_bond_vectors(d, r)?;
        let bonds = (0..spec.n_bonds()).map(|k| proto.clone().with_bond(k)).collect();
        Ok(Self { spec, field: Field::Real, bonds })
    }

    /// Same projector on every bond.
    pub fn uniform(n_sites: usize, bond: &BondProjector) -> Result<Self> {
        let spec = ChainSpec::new(n_sites, bond.local_dim, bond.rank(), 0)?;
        let field = if bond.vectors.iter().all(|z| z.im == 0.0) { Field::Real } else { Field::Complex };
        let bonds = (0..spec.n_bonds()).map(|k| bond.clone().with_bond(k)).collect();
        Ok(Self { spec, field, bonds })
    }
}

/// Spectral decomposition of a two-site term into energy levels.
#[derive(Debug, Clone)]
pub struct LocalTermSpectrum {
    pub local_dim: usize,
    /// Strictly ascending level energies.
    pub energies: Vec<f64>,
    /// Orthogonal projector onto each level, d²×d².
    pub projectors: Vec<Array2<C64>>,
}

impl LocalTermSpectrum {
    /// Diagonalize a Hermitian d²×d² term, merging eigenvalues that agree
    /// within `tol · max(1, |E|)` into one level.
    pub fn from_hermitian(local_dim: usize, h: ArrayView2<C64>, tol: f64) -> Result<Self> {
        let d2 = local_dim * local_dim;
        if h.dim() != (d2, d2) {
            return Err(Error::ShapeMismatch(format!("term is {:?}, expected {d2}x{d2}", h.dim())));
        }
        let (w, vecs) = linalg::eigh(h)?;
        let mut energies: Vec<f64> = Vec::new();
        let mut projectors: Vec<Array2<C64>> = Vec::new();
        for (k, &e) in w.iter().enumerate() {
            let col = vecs.column(k);
            let outer = Array2::from_shape_fn((d2, d2), |(a, b)| col[a] * col[b].conj());
            match energies.last() {
                Some(&last) if (e - last).abs() <= tol * last.abs().max(1.0) => {
                    *projectors.last_mut().unwrap() += &outer;
                }
                _ => {
                    energies.push(e);
                    projectors.push(outer);
                }
            }
        }
        Ok(Self { local_dim, energies, projectors })
    }
}

/// Projector onto every level strictly above the ground level, returned as an
/// orthonormal row basis.
pub fn reduce_to_projector(spectrum: &LocalTermSpectrum, degeneracy_tol: f64) -> Result<BondProjector> {
    let d = spectrum.local_dim;
    let d2 = d * d;
    let e0 = *spectrum.energies.first().ok_or(Error::NoExcitedSpace)?;
    let mut excited = Array2::<C64>::zeros((d2, d2));
    for (e, p) in spectrum.energies.iter().zip(&spectrum.projectors) {
        if (e - e0).abs() > degeneracy_tol * e0.abs().max(1.0) {
            excited += p;
        }
    }
    let (w, vecs) = linalg::eigh(excited.view())?;
    let keep: Vec<usize> = (0..d2).filter(|&k| w[k] > 0.5).collect();
    if keep.is_empty() {
        return Err(Error::NoExcitedSpace);
    }
    let mut v = Array2::from_elem((keep.len(), d2), ZERO);
    for (p, &k) in keep.iter().enumerate() {
        v.row_mut(p).assign(&vecs.column(k));
    }
    BondProjector::new(0, d, v)
}
