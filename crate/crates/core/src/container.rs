//! Self-describing binary and JSON containers for chains, solution stacks
//! and matrix product states.
//!
//! Binary layout, all integers little-endian `u64` unless noted:
//!
//! ```text
//! magic    8 bytes  "FRUSTRA\0"
//! version  u32
//! kind     u8       1 chain, 2 solution stack, 3 mps
//! field    u8       0 real, 1 complex
//! n_sites, local_dim, rank, seed
//! n_aux, aux[n_aux]
//! n_arrays
//! per array: ndim, shape[ndim], then re/im f64 pairs in row-major order
//! ```
//!
//! Both encodings reproduce every float bit for bit.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, Field};
use crate::error::{Error, Result};
use crate::exact_solver::SolutionStack;
use crate::linalg::C64;
use crate::mps::MpsState;
use crate::projectors::{BondProjector, ProjectorChain};

pub const MAGIC: [u8; 8] = *b"FRUSTRA\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerKind {
    ProjectorChain,
    SolutionStack,
    Mps,
}

impl ContainerKind {
    fn code(self) -> u8 {
        match self {
            ContainerKind::ProjectorChain => 1,
            ContainerKind::SolutionStack => 2,
            ContainerKind::Mps => 3,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(ContainerKind::ProjectorChain),
            2 => Ok(ContainerKind::SolutionStack),
            3 => Ok(ContainerKind::Mps),
            other => Err(Error::Format(format!("unknown container kind {other}"))),
        }
    }
}

/// A complex array of arbitrary rank, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorArray {
    pub shape: Vec<usize>,
    /// Interleaved real and imaginary parts.
    pub data: Vec<f64>,
}

impl TensorArray {
    fn from_iter<'a>(shape: &[usize], values: impl Iterator<Item = &'a C64>) -> Self {
        let data = values.flat_map(|z| [z.re, z.im]).collect();
        Self { shape: shape.to_vec(), data }
    }

    fn real(values: &[f64]) -> Self {
        Self { shape: vec![values.len()], data: values.iter().flat_map(|&x| [x, 0.0]).collect() }
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    fn check(&self) -> Result<()> {
        if self.data.len() != 2 * self.len() {
            return Err(Error::Format(format!(
                "array of shape {:?} carries {} floats",
                self.shape,
                self.data.len()
            )));
        }
        Ok(())
    }

    fn complex(&self) -> Vec<C64> {
        self.data.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
    }

    pub fn to_array(&self) -> Result<ArrayD<C64>> {
        self.check()?;
        ArrayD::from_shape_vec(IxDyn(&self.shape), self.complex())
            .map_err(|e| Error::Format(e.to_string()))
    }

    fn to_array2(&self) -> Result<Array2<C64>> {
        self.to_array()?
            .into_dimensionality()
            .map_err(|_| Error::Format(format!("expected a matrix, got shape {:?}", self.shape)))
    }

    fn to_array3(&self) -> Result<Array3<C64>> {
        self.to_array()?
            .into_dimensionality()
            .map_err(|_| Error::Format(format!("expected a 3-tensor, got shape {:?}", self.shape)))
    }

    fn to_real(&self) -> Result<Vec<f64>> {
        self.check()?;
        Ok(self.data.chunks_exact(2).map(|c| c[0]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub version: u32,
    pub kind: ContainerKind,
    pub n_sites: usize,
    pub local_dim: usize,
    pub rank: usize,
    pub seed: u64,
    pub field: Field,
    /// Kind-specific integers: the `s_n` sequence of a solution stack, or
    /// the bond-dimension cap of an MPS.
    pub aux: Vec<u64>,
    pub arrays: Vec<TensorArray>,
}

impl Container {
    pub fn from_chain(chain: &ProjectorChain) -> Self {
        let arrays = chain
            .bonds
            .iter()
            .map(|b| TensorArray::from_iter(b.vectors.shape(), b.vectors.iter()))
            .collect();
        Self::with_header(ContainerKind::ProjectorChain, &chain.spec, chain.field, Vec::new(), arrays)
    }

    pub fn to_chain(&self) -> Result<ProjectorChain> {
        self.expect_kind(ContainerKind::ProjectorChain)?;
        let spec = self.spec()?;
        let bonds = self
            .arrays
            .iter()
            .enumerate()
            .map(|(k, a)| Ok(BondProjector { bond: k, local_dim: self.local_dim, vectors: a.to_array2()? }))
            .collect::<Result<Vec<_>>>()?;
        if bonds.len() != spec.n_bonds() {
            return Err(Error::Format(format!("{} bonds for {} sites", bonds.len(), spec.n_sites)));
        }
        Ok(ProjectorChain { spec, field: self.field, bonds })
    }

    /// Step diagnostics are not stored.
    pub fn from_solution_stack(stack: &SolutionStack, spec: &ChainSpec, field: Field) -> Self {
        let arrays = stack.gammas.iter().map(|g| TensorArray::from_iter(g.shape(), g.iter())).collect();
        let aux = stack.s_sequence.iter().map(|&s| s as u64).collect();
        Self::with_header(ContainerKind::SolutionStack, spec, field, aux, arrays)
    }

    pub fn to_solution_stack(&self) -> Result<SolutionStack> {
        self.expect_kind(ContainerKind::SolutionStack)?;
        let gammas = self.arrays.iter().map(TensorArray::to_array3).collect::<Result<Vec<_>>>()?;
        Ok(SolutionStack {
            local_dim: self.local_dim,
            n_sites: self.n_sites,
            gammas,
            s_sequence: self.aux.iter().map(|&s| s as usize).collect(),
            steps: Vec::new(),
        })
    }

    /// Site tensors first, then the bond weights as real vectors.
    pub fn from_mps(state: &MpsState, spec: &ChainSpec, field: Field) -> Self {
        let mut arrays: Vec<TensorArray> =
            state.gammas.iter().map(|g| TensorArray::from_iter(g.shape(), g.iter())).collect();
        arrays.extend(state.lambdas.iter().map(|l| TensorArray::real(l.as_slice().expect("contiguous"))));
        let aux = vec![state.chi_max as u64];
        Self::with_header(ContainerKind::Mps, spec, field, aux, arrays)
    }

    pub fn to_mps(&self) -> Result<MpsState> {
        self.expect_kind(ContainerKind::Mps)?;
        let n = self.n_sites;
        if self.arrays.len() != 2 * n - 1 || self.aux.len() != 1 {
            return Err(Error::Format("malformed mps container".into()));
        }
        let gammas = self.arrays[..n].iter().map(TensorArray::to_array3).collect::<Result<Vec<_>>>()?;
        let lambdas = self.arrays[n..]
            .iter()
            .map(|a| a.to_real().map(Array1::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(MpsState { local_dim: self.local_dim, gammas, lambdas, chi_max: self.aux[0] as usize })
    }

    fn with_header(kind: ContainerKind, spec: &ChainSpec, field: Field, aux: Vec<u64>, arrays: Vec<TensorArray>) -> Self {
        Self {
            version: FORMAT_VERSION,
            kind,
            n_sites: spec.n_sites,
            local_dim: spec.local_dim,
            rank: spec.rank,
            seed: spec.seed,
            field,
            aux,
            arrays,
        }
    }

    fn expect_kind(&self, kind: ContainerKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected {kind:?} container, found {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ChainSpec> {
        ChainSpec::new(self.n_sites, self.local_dim, self.rank, self.seed)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&[self.kind.code(), self.field.code()])?;
        for x in [self.n_sites as u64, self.local_dim as u64, self.rank as u64, self.seed] {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.aux.len() as u64).to_le_bytes())?;
        for x in &self.aux {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(&(self.arrays.len() as u64).to_le_bytes())?;
        for a in &self.arrays {
            a.check()?;
            w.write_all(&(a.shape.len() as u64).to_le_bytes())?;
            for &dim in &a.shape {
                w.write_all(&(dim as u64).to_le_bytes())?;
            }
            for x in &a.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let kind = ContainerKind::from_code(b2[0])?;
        let field = Field::from_code(b2[1]).ok_or_else(|| Error::Format(format!("unknown field code {}", b2[1])))?;
        let mut next = || -> Result<u64> {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n_sites = next()? as usize;
        let local_dim = next()? as usize;
        let rank = next()? as usize;
        let seed = next()?;
        let n_aux = next()?;
        let aux = (0..n_aux).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let n_arrays = next()?;
        let mut arrays = Vec::new();
        for _ in 0..n_arrays {
            let ndim = next()?;
            let shape = (0..ndim).map(|_| next().map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let data = (0..2 * len).map(|_| next().map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            arrays.push(TensorArray { shape, data });
        }
        Ok(Self { version, kind, n_sites, local_dim, rank, seed, field, aux, arrays })
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf)?;
        Ok(buf)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        Self::read_binary(bytes)
    }

    pub fn to_json(&self) -> Result<String> {
        for a in &self.arrays {
            if a.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format("non-finite values cannot be written as JSON".into()));
            }
        }
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        for a in &c.arrays {
            a.check()?;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_solver::{propagate_solutions, SolverOptions};
    use crate::mps::uniform_initial_state;

    fn same_bits(a: &Container, b: &Container) -> bool {
        a.arrays.len() == b.arrays.len()
            && a.arrays.iter().zip(&b.arrays).all(|(x, y)| {
                x.shape == y.shape && x.data.iter().zip(&y.data).all(|(p, q)| p.to_bits() == q.to_bits())
            })
    }

    #[test]
    fn chain_round_trips_bit_exactly() {
        let chain = ProjectorChain::random(ChainSpec::new(6, 3, 4, 77).unwrap(), Field::Complex).unwrap();
        let c = Container::from_chain(&chain);
        let bin = Container::from_binary(&c.to_binary().unwrap()).unwrap();
        let json = Container::from_json(&c.to_json().unwrap()).unwrap();
        assert!(same_bits(&c, &bin) && same_bits(&c, &json));
        assert_eq!(bin.to_chain().unwrap(), chain);
        assert_eq!(json.to_chain().unwrap(), chain);
    }

    #[test]
    fn stack_and_mps_round_trip() {
        let spec = ChainSpec::new(5, 3, 2, 1).unwrap();
        let chain = ProjectorChain::random(spec, Field::Real).unwrap();
        let stack = propagate_solutions(&chain, SolverOptions::default()).unwrap();
        let c = Container::from_solution_stack(&stack, &spec, Field::Real);
        let back = Container::from_binary(&c.to_binary().unwrap()).unwrap().to_solution_stack().unwrap();
        assert_eq!(back.gammas, stack.gammas);
        assert_eq!(back.s_sequence, stack.s_sequence);

        let mps = uniform_initial_state(&spec, 4);
        let c = Container::from_mps(&mps, &spec, Field::Real);
        let back = Container::from_json(&c.to_json().unwrap()).unwrap().to_mps().unwrap();
        assert_eq!(back.gammas, mps.gammas);
        assert_eq!(back.lambdas, mps.lambdas);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(Container::from_binary(b"NOTMAGIC").is_err());
        let chain = ProjectorChain::random(ChainSpec::new(3, 2, 1, 0).unwrap(), Field::Real).unwrap();
        let bytes = Container::from_chain(&chain).to_binary().unwrap();
        assert!(Container::from_binary(&bytes[..bytes.len() - 3]).is_err());
        let c = Container::from_chain(&chain);
        assert!(c.to_solution_stack().is_err());
    }
}
