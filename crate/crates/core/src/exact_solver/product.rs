use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ONE};
use crate::projectors::{BondProjector, ProjectorChain};

/// Left-to-right product-state solution for `r < d`.
///
/// Site 1 is the first basis vector. Each next site is the right singular
/// vector, for the smallest singular value, of the `r × d` matrix
/// `M[p, j] = Σ_i <v^p | i j> ψ_i`, phased so its largest entry is real
/// positive. Since `r < d` that vector always lies in `ker M`.
pub fn product_state_solve(chain: &ProjectorChain) -> Result<Vec<Array1<C64>>> {
    let spec = chain.spec;
    let (d, r) = (spec.local_dim, spec.rank);
    if r >= d {
        return Err(Error::NotProductSoluble { rank: r, local_dim: d });
    }
    super::check_chain(chain)?;
    let mut first = Array1::zeros(d);
    first[0] = ONE;
    let mut sites = vec![first];
    for bond in &chain.bonds {
        let prev = sites.last().expect("nonempty");
        let m = Array2::from_shape_fn((r, d), |(p, j)| (0..d).map(|i| bond.bra(p, i, j) * prev[i]).sum::<C64>());
        let svd = linalg::svd_full(m.view())?;
        let mut next: Array1<C64> = svd.vt.row(d - 1).mapv(|z| z.conj());
        let pivot = next
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .expect("d >= 2");
        let phase = pivot.conj() / pivot.norm();
        next.mapv_inplace(|z| z * phase);
        sites.push(next);
    }
    Ok(sites)
}

/// `Σ_k Σ_p |<v^p | ψ_k ⊗ ψ_{k+1}>|²` for normalized site vectors.
pub fn product_state_energy(sites: &[Array1<C64>], bonds: &[BondProjector]) -> f64 {
    bonds
        .iter()
        .zip(sites.windows(2))
        .map(|(bond, pair)| {
            let d = bond.local_dim;
            (0..bond.rank())
                .map(|p| {
                    let mut amp = C64::new(0.0, 0.0);
                    for i in 0..d {
                        for j in 0..d {
                            amp += bond.bra(p, i, j) * pair[0][i] * pair[1][j];
                        }
                    }
                    amp.norm_sqr()
                })
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainSpec, Field};

    #[test]
    fn singlet_bonds_give_all_up_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = Array2::zeros((1, 4));
        v[[0, 1]] = ONE * s;
        v[[0, 2]] = ONE * -s;
        let singlet = BondProjector::new(0, 2, v).unwrap();
        let chain = ProjectorChain::uniform(5, &singlet).unwrap();
        let sites = product_state_solve(&chain).unwrap();
        for site in &sites {
            assert!((site[0] - ONE).norm() < 1e-12);
            assert!(site[1].norm() < 1e-12);
        }
        assert!(product_state_energy(&sites, &chain.bonds) < 1e-20);
    }

    #[test]
    fn random_product_soluble_chain_has_zero_residual() {
        let chain = ProjectorChain::random(ChainSpec::new(20, 3, 2, 4).unwrap(), Field::Complex).unwrap();
        let sites = product_state_solve(&chain).unwrap();
        assert_eq!(sites.len(), 20);
        for site in &sites {
            assert!((linalg::vec_norm(site.as_slice().unwrap()) - 1.0).abs() < 1e-12);
        }
        assert!(product_state_energy(&sites, &chain.bonds) < 1e-10);
    }

    #[test]
    fn rejects_rank_at_least_dimension() {
        let chain = ProjectorChain::random(ChainSpec::new(3, 2, 2, 0).unwrap(), Field::Complex).unwrap();
        assert!(matches!(product_state_solve(&chain), Err(Error::NotProductSoluble { .. })));
    }
}
