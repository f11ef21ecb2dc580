//! J1-J2 Heisenberg Hamiltonian on an open square lattice, applied
//! matrix-free on the computational basis (bit `i` set = site `i` up).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeGeometry};

/// Basis states handled per parallel task. Fixed so results do not depend
/// on the thread count.
const CHUNK: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergSpec {
    pub j1: f64,
    pub j2: f64,
    pub geometry: LatticeGeometry,
}

impl HeisenbergSpec {
    pub fn new(rows: usize, cols: usize, j1: f64, j2: f64) -> Result<Self> {
        let spec = HeisenbergSpec {
            j1,
            j2,
            geometry: build_lattice(rows, cols)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j1.is_finite() && self.j1 > 0.0) {
            return Err(Error::invalid(format!("j1 must be positive, got {}", self.j1)));
        }
        if !(self.j2.is_finite() && self.j2 >= 0.0) {
            return Err(Error::invalid(format!(
                "j2 must be non-negative, got {}",
                self.j2
            )));
        }
        Ok(())
    }

    pub fn num_sites(&self) -> usize {
        self.geometry.num_sites()
    }

    /// Rigorous upper bound on the largest eigenvalue: every `S_i . S_j`
    /// term has largest eigenvalue 1/4.
    pub fn lambda_max_bound(&self) -> f64 {
        (self.j1 * self.geometry.nn_bonds().len() as f64
            + self.j2 * self.geometry.nnn_bonds().len() as f64)
            / 4.0
    }
}

/// One isotropic exchange term `coefficient * S_i . S_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeTerm {
    pub coefficient: f64,
    pub i: usize,
    pub j: usize,
}

impl ExchangeTerm {
    fn mask(&self) -> usize {
        (1 << self.i) | (1 << self.j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseHamiltonian {
    num_sites: usize,
    terms: Vec<ExchangeTerm>,
}

/// `H = J1 sum_NN S_i.S_j + J2 sum_NNN S_i.S_j` with `S = sigma / 2`.
pub fn build_hamiltonian(spec: &HeisenbergSpec) -> Result<SparseHamiltonian> {
    spec.validate()?;
    let g = &spec.geometry;
    let mut terms = Vec::with_capacity(g.nn_bonds().len() + g.nnn_bonds().len());
    terms.extend(g.nn_bonds().iter().map(|&(i, j)| ExchangeTerm {
        coefficient: spec.j1,
        i,
        j,
    }));
    if spec.j2 != 0.0 {
        terms.extend(g.nnn_bonds().iter().map(|&(i, j)| ExchangeTerm {
            coefficient: spec.j2,
            i,
            j,
        }));
    }
    SparseHamiltonian::from_terms(g.num_sites(), terms)
}

impl SparseHamiltonian {
    pub fn from_terms(num_sites: usize, terms: Vec<ExchangeTerm>) -> Result<Self> {
        if num_sites == 0 || num_sites > 30 {
            return Err(Error::Capacity {
                what: "Hamiltonian sites",
                requested: num_sites,
                limit: 30,
            });
        }
        for t in &terms {
            if t.i == t.j || t.i >= num_sites || t.j >= num_sites {
                return Err(Error::invalid(format!("bad term sites ({}, {})", t.i, t.j)));
            }
        }
        Ok(SparseHamiltonian { num_sites, terms })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Hilbert-space dimension `2^L`.
    pub fn dimension(&self) -> usize {
        1 << self.num_sites
    }

    pub fn terms(&self) -> &[ExchangeTerm] {
        &self.terms
    }

    /// Sum of absolute term coefficients.
    pub fn coefficient_one_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    #[inline]
    fn row<T>(&self, s: usize, v: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let mut diag = 0.0;
        let mut acc = v[s] * 0.0;
        for t in &self.terms {
            let m = t.mask();
            let x = s & m;
            if x == 0 || x == m {
                diag += 0.25 * t.coefficient;
            } else {
                diag -= 0.25 * t.coefficient;
                acc = acc + v[s ^ m] * (0.5 * t.coefficient);
            }
        }
        acc + v[s] * diag
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.dimension(), "vector length does not match 2^L");
    }

    /// `out = H v` for complex vectors.
    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.check_len(v.len());
        self.check_len(out.len());
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, o) in chunk.iter_mut().enumerate() {
                *o = self.row(base + k, v);
            }
        });
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        out
    }

    /// `out = H v` for real vectors.
    pub fn apply_real_into(&self, v: &[f64], out: &mut [f64]) {
        self.check_len(v.len());
        self.check_len(out.len());
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, o) in chunk.iter_mut().enumerate() {
                *o = self.row(base + k, v);
            }
        });
    }

    pub fn apply_real(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.apply_real_into(v, &mut out);
        out
    }

    /// `<v|H|v>` (real because `H` is Hermitian).
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        let hv = self.apply(v);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Dense matrix; intended for oracles on small lattices.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        const LIMIT: usize = 14;
        if self.num_sites > LIMIT {
            return Err(Error::Capacity {
                what: "dense Hamiltonian sites",
                requested: self.num_sites,
                limit: LIMIT,
            });
        }
        let n = self.dimension();
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            for t in &self.terms {
                let mask = t.mask();
                let x = s & mask;
                if x == 0 || x == mask {
                    m[(s, s)] += 0.25 * t.coefficient;
                } else {
                    m[(s, s)] -= 0.25 * t.coefficient;
                    m[(s ^ mask, s)] += 0.5 * t.coefficient;
                }
            }
        }
        Ok(m)
    }
}

/// `(H - shift) / scale`, intended to have its spectrum inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedHamiltonian {
    base: SparseHamiltonian,
    shift: f64,
    scale: f64,
}

/// Maps `[lambda0_est, lambdam_est]` affinely onto `[0, 1]`.
pub fn shift_spectrum(
    h: &SparseHamiltonian,
    lambda0_est: f64,
    lambdam_est: f64,
) -> Result<ShiftedHamiltonian> {
    let scale = lambdam_est - lambda0_est;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!(
            "spectral window [{lambda0_est}, {lambdam_est}] has non-positive width"
        )));
    }
    Ok(ShiftedHamiltonian {
        base: h.clone(),
        shift: lambda0_est,
        scale,
    })
}

impl ShiftedHamiltonian {
    pub fn base(&self) -> &SparseHamiltonian {
        &self.base
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn num_sites(&self) -> usize {
        self.base.num_sites()
    }

    pub fn dimension(&self) -> usize {
        self.base.dimension()
    }

    /// Maps an eigenvalue of the base Hamiltonian to the shifted one.
    pub fn map_eigenvalue(&self, lambda: f64) -> f64 {
        (lambda - self.shift) / self.scale
    }

    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.base.apply_into(v, out);
        let inv = 1.0 / self.scale;
        out.par_iter_mut().zip(v.par_iter()).for_each(|(o, x)| {
            *o = (*o - x * self.shift) * inv;
        });
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let mut m = self.base.to_dense()?;
        for i in 0..m.nrows() {
            m[(i, i)] -= self.shift;
        }
        Ok(m / self.scale)
    }
}
