//! Exact contraction of the single-layer network.
//!
//! Sites are absorbed one at a time along the long axis of the lattice,
//! so the open boundary never carries more than `min(rows, cols) + 1`
//! virtual legs. Full statevectors are built from two such boundaries,
//! grown from opposite ends and joined in the middle.

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;

use super::tensor::{permute, reshape, tensordot};
use super::{PepsState, SpinConfiguration};
use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;
use crate::statevector::Statevector;

/// Largest lattice `peps_to_statevector` accepts.
pub const STATEVECTOR_MAX_SITES: usize = 20;
const ENERGY_MAX_SITES: usize = 24;

/// Partially contracted network: axes `[phys, open legs...]`.
struct Boundary {
    data: ArrayD<f64>,
    legs: Vec<usize>,
    sites: Vec<usize>,
}

impl Boundary {
    fn empty() -> Self {
        Boundary {
            data: ArrayD::from_elem(IxDyn(&[1]), 1.0),
            legs: Vec::new(),
            sites: Vec::new(),
        }
    }

    /// Absorbs a site tensor with axes `[phys, legs...]`.
    fn absorb(self, site: usize, tensor: &ArrayD<f64>, bonds: &[usize]) -> Self {
        let mut ax_env = Vec::new();
        let mut ax_site = Vec::new();
        for (i, b) in self.legs.iter().enumerate() {
            if let Some(j) = bonds.iter().position(|x| x == b) {
                ax_env.push(i + 1);
                ax_site.push(j + 1);
            }
        }
        let env_rest: Vec<usize> = self
            .legs
            .iter()
            .enumerate()
            .filter(|(i, _)| !ax_env.contains(&(i + 1)))
            .map(|(_, &b)| b)
            .collect();
        let site_rest: Vec<usize> = bonds
            .iter()
            .enumerate()
            .filter(|(j, _)| !ax_site.contains(&(j + 1)))
            .map(|(_, &b)| b)
            .collect();
        // [p_env, env_rest.., p_site, site_rest..]
        let out = tensordot(&self.data, &ax_env, tensor, &ax_site);
        let n_env = 1 + env_rest.len();
        let mut perm = vec![0, n_env];
        perm.extend(1..n_env);
        perm.extend(n_env + 1..out.ndim());
        let out = permute(out, &perm);
        let mut shape = vec![out.shape()[0] * out.shape()[1]];
        shape.extend_from_slice(&out.shape()[2..]);
        let data = reshape(out, &shape);
        let mut legs = env_rest;
        legs.extend(site_rest);
        let mut sites = self.sites;
        sites.push(site);
        Boundary { data, legs, sites }
    }
}

/// Site order along the longer lattice axis.
fn sweep_order(peps: &PepsState) -> Vec<usize> {
    let g = peps.geometry();
    let (rows, cols) = (g.rows(), g.cols());
    if rows <= cols {
        (0..cols)
            .flat_map(|c| (0..rows).map(move |r| (r, c)))
            .map(|(r, c)| g.index(r, c))
            .collect()
    } else {
        (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .map(|(r, c)| g.index(r, c))
            .collect()
    }
}

impl PepsState {
    /// Unnormalized amplitude `W(S)`.
    pub fn amplitude(&self, config: SpinConfiguration) -> Complex64 {
        assert_eq!(config.len(), self.num_sites(), "configuration length");
        let tensors = self.amplitude_tensors();
        Complex64::new(self.amplitude_with(&tensors, config), 0.0)
    }

    pub(crate) fn amplitude_with(&self, tensors: &[ArrayD<f64>], config: SpinConfiguration) -> f64 {
        let mut env = Boundary::empty();
        for site in sweep_order(self) {
            let s = config.is_up(site) as usize;
            let slice = tensors[site]
                .index_axis(Axis(0), s)
                .insert_axis(Axis(0))
                .to_owned();
            env = env.absorb(site, &slice, &self.tensor(site).bonds);
        }
        debug_assert!(env.legs.is_empty());
        env.data.iter().copied().next().unwrap_or(0.0)
    }

    /// All `2^L` amplitudes in basis order, unnormalized.
    pub(crate) fn dense_amplitudes(&self, max_sites: usize) -> Result<Vec<f64>> {
        let l = self.num_sites();
        if l > max_sites {
            return Err(Error::Capacity {
                what: "PEPS statevector sites",
                requested: l,
                limit: max_sites,
            });
        }
        let tensors = self.amplitude_tensors();
        let order = sweep_order(self);
        let split = l / 2;
        let mut left = Boundary::empty();
        for &site in &order[..split] {
            left = left.absorb(site, &tensors[site], &self.tensor(site).bonds);
        }
        let mut right = Boundary::empty();
        for &site in order[split..].iter().rev() {
            right = right.absorb(site, &tensors[site], &self.tensor(site).bonds);
        }
        // align the right boundary's legs with the left one's
        let mut right_axes = Vec::with_capacity(left.legs.len());
        for b in &left.legs {
            let pos = right
                .legs
                .iter()
                .position(|x| x == b)
                .expect("halves share their cut bonds");
            right_axes.push(pos + 1);
        }
        let left_axes: Vec<usize> = (1..=left.legs.len()).collect();
        let joined = tensordot(&left.data, &left_axes, &right.data, &right_axes);
        let (nl, nr) = (joined.shape()[0], joined.shape()[1]);

        let basis_of = |sites: &[usize], p: usize| -> usize {
            let n = sites.len();
            sites
                .iter()
                .enumerate()
                .map(|(t, &site)| ((p >> (n - 1 - t)) & 1) << site)
                .fold(0, |acc, x| acc | x)
        };
        let lmap: Vec<usize> = (0..nl).map(|p| basis_of(&left.sites, p)).collect();
        let rmap: Vec<usize> = (0..nr).map(|p| basis_of(&right.sites, p)).collect();
        let mut out = vec![0.0; 1 << l];
        let flat = joined.as_slice().expect("standard layout");
        for (pl, &bl) in lmap.iter().enumerate() {
            let row = &flat[pl * nr..(pl + 1) * nr];
            for (pr, &br) in rmap.iter().enumerate() {
                out[bl | br] = row[pr];
            }
        }
        Ok(out)
    }

    /// Per-site energy `<v|H|v> / (<v|v> L)` of the exactly contracted state.
    pub fn energy_per_site(&self, h: &SparseHamiltonian) -> Result<f64> {
        if h.num_sites() != self.num_sites() {
            return Err(Error::invalid("Hamiltonian and PEPS sizes differ"));
        }
        let v = self.dense_amplitudes(ENERGY_MAX_SITES)?;
        let hv = h.apply_real(&v);
        let num: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        if !(den > 0.0) {
            return Err(Error::invalid("PEPS contracts to the zero vector"));
        }
        Ok(num / den / self.num_sites() as f64)
    }
}

/// Contracts the PEPS to a statevector; returns it normalized along with
/// the norm it had before normalization.
pub fn peps_to_statevector(peps: &PepsState) -> Result<(Statevector, f64)> {
    let amps = peps.dense_amplitudes(STATEVECTOR_MAX_SITES)?;
    let mut sv = Statevector::from_real(peps.num_sites(), &amps)?;
    let norm = sv.normalize()?;
    Ok((sv, norm))
}
