//! Projected entangled-pair states on open square lattices.
//!
//! Each site carries a real tensor with axes `[phys, legs...]`, legs in
//! the order up, left, down, right (only those present). Every
//! nearest-neighbour bond carries a diagonal weight vector (the
//! simple-update environment); the represented wavefunction contracts the
//! site tensors with every bond weight inserted once.

mod checkpoint;
mod config;
mod contract;
pub(crate) mod tensor;
mod update;

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

pub use config::SpinConfiguration;
pub use contract::{peps_to_statevector, STATEVECTOR_MAX_SITES};
pub use update::{
    heisenberg_gate, itebd_evolve, simple_update_bond, simple_update_chain, EvolutionReport,
    EvolutionSchedule, Gate, REGULARIZATION_FLOOR,
};

/// Physical dimension of a spin-1/2 site.
pub const PHYS_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    /// Nearest-neighbour bond index of each virtual leg.
    pub bonds: Vec<usize>,
    /// Axes `[phys, legs...]`.
    pub data: ArrayD<f64>,
}

impl SiteTensor {
    pub fn leg_dims(&self) -> &[usize] {
        &self.data.shape()[1..]
    }

    /// Position of the leg attached to `bond`.
    pub fn leg_of(&self, bond: usize) -> Option<usize> {
        self.bonds.iter().position(|&b| b == bond)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PepsState {
    geometry: LatticeGeometry,
    bond_dim: usize,
    tensors: Vec<SiteTensor>,
    bond_weights: Vec<Vec<f64>>,
    regularizations: usize,
}

/// Random PEPS with entries uniform in `[-0.5, 0.5]`, every leg of
/// dimension `bond_dim`, and all-ones bond weights.
pub fn init_peps(geometry: &LatticeGeometry, bond_dim: usize, seed: u64) -> Result<PepsState> {
    if bond_dim == 0 {
        return Err(Error::invalid("bond dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = (0..geometry.num_sites())
        .map(|site| {
            let bonds = leg_bonds(geometry, site);
            let mut shape = vec![PHYS_DIM];
            shape.extend(std::iter::repeat_n(bond_dim, bonds.len()));
            let n: usize = shape.iter().product();
            let values = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            SiteTensor {
                bonds,
                data: ArrayD::from_shape_vec(IxDyn(&shape), values).expect("shape"),
            }
        })
        .collect();
    let bond_weights = vec![vec![1.0; bond_dim]; geometry.nn_bonds().len()];
    Ok(PepsState {
        geometry: geometry.clone(),
        bond_dim,
        tensors,
        bond_weights,
        regularizations: 0,
    })
}

fn leg_bonds(geometry: &LatticeGeometry, site: usize) -> Vec<usize> {
    geometry
        .neighbors(site)
        .into_iter()
        .map(|n| geometry.nn_bond_index(site, n).expect("neighbour bond"))
        .collect()
}

impl PepsState {
    /// Assembles a state from parts, checking the leg layout against the
    /// lattice.
    pub fn from_parts(
        geometry: LatticeGeometry,
        bond_dim: usize,
        tensors: Vec<SiteTensor>,
        bond_weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if tensors.len() != geometry.num_sites() {
            return Err(Error::invalid("one tensor per site required"));
        }
        if bond_weights.len() != geometry.nn_bonds().len() {
            return Err(Error::invalid("one weight vector per bond required"));
        }
        for (site, t) in tensors.iter().enumerate() {
            if t.bonds != leg_bonds(&geometry, site) {
                return Err(Error::invalid(format!("site {site} has the wrong legs")));
            }
            if t.data.ndim() != t.bonds.len() + 1 || t.data.shape()[0] != PHYS_DIM {
                return Err(Error::invalid(format!("site {site} has the wrong rank")));
            }
            for (leg, &b) in t.bonds.iter().enumerate() {
                let dim = t.data.shape()[leg + 1];
                if dim != bond_weights[b].len() || dim > bond_dim {
                    return Err(Error::invalid(format!(
                        "site {site} leg {leg} has dimension {dim}, bond {b} has {} weights",
                        bond_weights[b].len()
                    )));
                }
            }
        }
        Ok(PepsState {
            geometry,
            bond_dim,
            tensors,
            bond_weights,
            regularizations: 0,
        })
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    /// Maximum virtual bond dimension `D`.
    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn phys_dim(&self) -> usize {
        PHYS_DIM
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &SiteTensor {
        &self.tensors[site]
    }

    pub fn bond_weights(&self) -> &[Vec<f64>] {
        &self.bond_weights
    }

    /// Number of bond-weight entries clamped to the floor before division.
    pub fn regularizations(&self) -> usize {
        self.regularizations
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
            && self.bond_weights.iter().flatten().all(|x| x.is_finite())
    }

    /// Inserts `x` on `bond`'s lower-index side and `x^-1` on the other.
    /// The represented wavefunction is unchanged; bond weights must be
    /// all-ones on that bond for this to hold (they are absorbed first).
    pub fn gauge_transform(&mut self, bond: usize, x: &ndarray::Array2<f64>) -> Result<()> {
        let (a, b) = self.geometry.nn_bonds()[bond];
        let w = std::mem::take(&mut self.bond_weights[bond]);
        let dim = w.len();
        if x.dim() != (dim, dim) {
            return Err(Error::invalid("gauge matrix has the wrong size"));
        }
        let inv = {
            let m = nalgebra::DMatrix::from_fn(dim, dim, |i, j| x[(i, j)]);
            m.try_inverse()
                .ok_or_else(|| Error::invalid("gauge matrix is singular"))?
        };
        // absorb weights into site a
        let la = self.tensors[a].leg_of(bond).unwrap();
        tensor::scale_axis(&mut self.tensors[a].data, la + 1, &w);
        self.bond_weights[bond] = vec![1.0; dim];
        // A_a[.., i, ..] -> sum_i A_a[.., i, ..] X[i, j]
        let xa = ndarray::ArrayD::from_shape_fn(IxDyn(&[dim, dim]), |ix| x[(ix[0], ix[1])]);
        let xi = ndarray::ArrayD::from_shape_fn(IxDyn(&[dim, dim]), |ix| inv[(ix[0], ix[1])]);
        for (site, mat, leg) in [(a, &xa, la), (b, &xi, self.tensors[b].leg_of(bond).unwrap())] {
            let t = &self.tensors[site].data;
            let out = tensor::tensordot(t, &[leg + 1], mat, &[if site == a { 0 } else { 1 }]);
            // the contracted leg moved to the end; move it back
            let n = out.ndim();
            let mut perm: Vec<usize> = (0..n - 1).collect();
            perm.insert(leg + 1, n - 1);
            self.tensors[site].data = tensor::permute(out, &perm);
        }
        Ok(())
    }

    /// Site tensors with `sqrt` of each bond weight absorbed on both sides.
    pub(crate) fn amplitude_tensors(&self) -> Vec<ArrayD<f64>> {
        self.tensors
            .iter()
            .map(|t| {
                let mut d = t.data.clone();
                for (leg, &b) in t.bonds.iter().enumerate() {
                    let w: Vec<f64> = self.bond_weights[b].iter().map(|x| x.sqrt()).collect();
                    tensor::scale_axis(&mut d, leg + 1, &w);
                }
                d
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn init_shapes_and_determinism() {
        let g = LatticeGeometry::with_limit(4, 5, 20).unwrap();
        let p = init_peps(&g, 6, 42).unwrap();
        let q = init_peps(&g, 6, 42).unwrap();
        assert_eq!(p, q);
        for (site, t) in p.tensors().iter().enumerate() {
            let s = g.site(site);
            let edge_r = s.row == 0 || s.row == 3;
            let edge_c = s.col == 0 || s.col == 4;
            let legs = 4 - edge_r as usize - edge_c as usize;
            assert_eq!(t.bonds.len(), legs);
            assert_eq!(t.data.len(), 2 * 6usize.pow(legs as u32));
            assert!(t.data.iter().all(|x| (-0.5..=0.5).contains(x)));
        }
        assert!(p.bond_weights().iter().all(|w| w == &vec![1.0; 6]));
        assert_ne!(init_peps(&g, 6, 43).unwrap(), p);
    }

    #[test]
    fn corner_edge_bulk_legs() {
        let g = build_lattice(3, 3).unwrap();
        let p = init_peps(&g, 2, 0).unwrap();
        assert_eq!(p.tensor(0).bonds.len(), 2);
        assert_eq!(p.tensor(1).bonds.len(), 3);
        assert_eq!(p.tensor(4).bonds.len(), 4);
    }
}
