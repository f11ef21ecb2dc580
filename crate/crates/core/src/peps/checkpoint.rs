//! Binary PEPS checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "GSPP"  u32 rows  u32 cols  u32 D  u32 d
//! per site:  u32 n_legs, n_legs x u32 leg dim, f64 entries of [phys, legs...]
//! per bond:  u32 len, len x f64 weight
//! ```

use std::io::{Read, Write};

use ndarray::{ArrayD, IxDyn};

use super::{PepsState, SiteTensor, PHYS_DIM};
use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

const MAGIC: &[u8; 4] = b"GSPP";
const MAX_BOND_DIM: usize = 64;

fn put_u32<W: Write>(w: &mut W, x: usize) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| Error::format("GSPP", "value exceeds u32"))?;
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::format("GSPP", format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)
        .map_err(|e| Error::format("GSPP", format!("truncated payload: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl PepsState {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        let g = self.geometry();
        for x in [g.rows(), g.cols(), self.bond_dim(), PHYS_DIM] {
            put_u32(&mut w, x)?;
        }
        let mut buf = Vec::new();
        for t in self.tensors() {
            put_u32(&mut w, t.bonds.len())?;
            for &d in t.leg_dims() {
                put_u32(&mut w, d)?;
            }
            buf.clear();
            for x in t.data.as_standard_layout().iter() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        for wts in self.bond_weights() {
            put_u32(&mut w, wts.len())?;
            for x in wts {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::format("GSPP", "missing magic"))?;
        if &magic != MAGIC {
            return Err(Error::format("GSPP", "bad magic"));
        }
        let rows = get_u32(&mut r)?;
        let cols = get_u32(&mut r)?;
        let bond_dim = get_u32(&mut r)?;
        let d = get_u32(&mut r)?;
        if d != PHYS_DIM {
            return Err(Error::format("GSPP", format!("physical dimension {d}, expected 2")));
        }
        if bond_dim == 0 || bond_dim > MAX_BOND_DIM {
            return Err(Error::format("GSPP", format!("bond dimension {bond_dim}")));
        }
        let geometry = LatticeGeometry::with_limit(rows, cols, 64)
            .map_err(|e| Error::format("GSPP", e.to_string()))?;
        let mut tensors = Vec::with_capacity(geometry.num_sites());
        for site in 0..geometry.num_sites() {
            let n_legs = get_u32(&mut r)?;
            if n_legs > 4 {
                return Err(Error::format("GSPP", format!("site {site} has {n_legs} legs")));
            }
            let mut shape = vec![PHYS_DIM];
            for _ in 0..n_legs {
                let dim = get_u32(&mut r)?;
                if dim == 0 || dim > bond_dim {
                    return Err(Error::format("GSPP", format!("site {site} leg dimension {dim}")));
                }
                shape.push(dim);
            }
            let values = get_f64s(&mut r, shape.iter().product())?;
            let data = ArrayD::from_shape_vec(IxDyn(&shape), values).expect("sized payload");
            let bonds = super::leg_bonds(&geometry, site);
            if bonds.len() != n_legs {
                return Err(Error::format("GSPP", format!("site {site} has the wrong leg count")));
            }
            tensors.push(SiteTensor { bonds, data });
        }
        let mut weights = Vec::with_capacity(geometry.nn_bonds().len());
        for _ in 0..geometry.nn_bonds().len() {
            let len = get_u32(&mut r)?;
            if len > bond_dim {
                return Err(Error::format("GSPP", format!("bond weight length {len}")));
            }
            weights.push(get_f64s(&mut r, len)?);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::format("GSPP", "trailing bytes"));
        }
        let state = PepsState::from_parts(geometry, bond_dim, tensors, weights)
            .map_err(|e| Error::format("GSPP", e.to_string()))?;
        if !state.is_finite() {
            return Err(Error::format("GSPP", "non-finite entries"));
        }
        Ok(state)
    }
}
