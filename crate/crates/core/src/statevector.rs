//! Dense statevectors over `L` spins and the observables computed on them.
//!
//! Binary layout (`GSPV`, little-endian):
//!
//! ```text
//! b"GSPV"  u32 L  then 2^L pairs of (re: f64, im: f64) in basis order
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::LatticeGeometry;

const MAGIC: &[u8; 4] = b"GSPV";
const MAX_SITES: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn new(num_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if num_sites > MAX_SITES {
            return Err(Error::Capacity {
                what: "statevector sites",
                requested: num_sites,
                limit: MAX_SITES,
            });
        }
        if amplitudes.len() != 1 << num_sites {
            return Err(Error::invalid(format!(
                "expected 2^{num_sites} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        Ok(Statevector {
            num_sites,
            amplitudes,
        })
    }

    pub fn from_real(num_sites: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::new(
            num_sites,
            amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Computational basis state `|index>`.
    pub fn basis(num_sites: usize, index: usize) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_sites];
        if index >= amps.len() {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        amps[index] = Complex64::new(1.0, 0.0);
        Self::new(num_sites, amps)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Scales to unit norm and returns the previous norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        let inv = 1.0 / n;
        self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        Ok(n)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        assert_eq!(self.dimension(), other.dimension());
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies `sigma_x` on every site.
    pub fn spin_flipped(&self) -> Statevector {
        let all = self.dimension() - 1;
        let amps = (0..self.dimension())
            .map(|s| self.amplitudes[s ^ all])
            .collect();
        Statevector {
            num_sites: self.num_sites,
            amplitudes: amps,
        }
    }

    /// Fixes the global phase so that the largest-magnitude amplitude is
    /// real and positive (first such index on ties).
    pub fn fix_phase(&mut self) {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (i, a) in self.amplitudes.iter().enumerate() {
            let m = a.norm_sqr();
            if m > best_mag * (1.0 + 1e-12) {
                best = i;
                best_mag = m;
            }
        }
        if best_mag > 0.0 {
            let a = self.amplitudes[best];
            let phase = a.conj() / a.norm();
            self.amplitudes.iter_mut().for_each(|x| *x *= phase);
        }
    }

    /// `<S_total^z>`.
    pub fn total_sz(&self) -> f64 {
        let l = self.num_sites as f64;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(s, a)| a.norm_sqr() * (s.count_ones() as f64 - 0.5 * l))
            .sum::<f64>()
            / self.norm().powi(2)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.num_sites as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.dimension());
        for a in &self.amplitudes {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("GSPV", "bad magic"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let l = u32::from_le_bytes(word) as usize;
        if l > MAX_SITES {
            return Err(Error::format("GSPV", format!("site count {l} too large")));
        }
        let n = 1usize << l;
        let mut buf = vec![0u8; 16 * n];
        r.read_exact(&mut buf)
            .map_err(|e| Error::format("GSPV", format!("truncated payload: {e}")))?;
        let amps = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::format("GSPV", "trailing bytes"));
        }
        Self::new(l, amps)
    }
}

/// `<S_i . S_j>` for every ordered pair, as an `L x L` row-major table.
pub fn spin_correlations(state: &Statevector) -> Vec<f64> {
    let l = state.num_sites();
    let v = state.amplitudes();
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|i| (i + 1..l).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mask = (1usize << i) | (1usize << j);
            let mut acc = 0.0;
            for (s, a) in v.iter().enumerate() {
                let x = s & mask;
                if x == 0 || x == mask {
                    acc += 0.25 * a.norm_sqr();
                } else {
                    acc -= 0.25 * a.norm_sqr();
                    acc += 0.5 * (v[s ^ mask].conj() * a).re;
                }
            }
            acc
        })
        .collect();
    let mut table = vec![0.0; l * l];
    for i in 0..l {
        table[i * l + i] = 0.75;
    }
    for (&(i, j), &c) in pairs.iter().zip(&values) {
        table[i * l + j] = c;
        table[j * l + i] = c;
    }
    table
}

/// Magnetic structure factor
/// `m_k^2 = (1/L^2) sum_ij <S_i.S_j> exp(i k.(r_i - r_j))`, with `r = (row, col)`.
pub fn structure_factor(
    state: &Statevector,
    geometry: &LatticeGeometry,
    k: (f64, f64),
) -> Result<f64> {
    if state.num_sites() != geometry.num_sites() {
        return Err(Error::invalid("state and lattice sizes differ"));
    }
    if !state.is_normalized(1e-10) {
        return Err(Error::invalid(format!(
            "structure factor needs a normalized state (norm {})",
            state.norm()
        )));
    }
    let corr = spin_correlations(state);
    Ok(structure_factor_from_correlations(&corr, geometry, k))
}

/// Same as [`structure_factor`] starting from a precomputed correlation table.
pub fn structure_factor_from_correlations(
    corr: &[f64],
    geometry: &LatticeGeometry,
    k: (f64, f64),
) -> f64 {
    let l = geometry.num_sites();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..l {
        let ri = geometry.site(i);
        for j in 0..l {
            let rj = geometry.site(j);
            let dr = (
                ri.row as f64 - rj.row as f64,
                ri.col as f64 - rj.col as f64,
            );
            let phase = k.0 * dr.0 + k.1 * dr.1;
            acc += Complex64::from_polar(corr[i * l + j], phase);
        }
    }
    let value = acc / (l * l) as f64;
    debug_assert!(value.im.abs() < 1e-10);
    value.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use std::f64::consts::PI;

    fn neel_2x2() -> Statevector {
        // sites 0,3 up, 1,2 down
        Statevector::basis(4, 0b1001).unwrap()
    }

    #[test]
    fn neel_structure_factor_matches_table() {
        let g = build_lattice(2, 2).unwrap();
        let s = neel_2x2();
        // product state: <S_i.S_j> = <Sz_i><Sz_j> for i != j, 3/4 on the diagonal
        let sz = |i: usize| if (0b1001 >> i) & 1 == 1 { 0.5 } else { -0.5 };
        let mut oracle = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let c = if i == j { 0.75 } else { sz(i) * sz(j) };
                let (ri, rj) = (g.site(i), g.site(j));
                let ph = PI * (ri.row as f64 - rj.row as f64) + PI * (ri.col as f64 - rj.col as f64);
                oracle += c * ph.cos();
            }
        }
        oracle /= 16.0;
        let got = structure_factor(&s, &g, (PI, PI)).unwrap();
        assert!((got - oracle).abs() < 1e-14, "{got} vs {oracle}");
        assert!((got - 0.375).abs() < 1e-14);
    }

    #[test]
    fn zero_wavevector_is_total_spin() {
        // singlet-like state in the Sz = 0 sector of 2x2: (|0011> - |1100>)/sqrt2
        let mut amps = vec![Complex64::new(0.0, 0.0); 16];
        amps[0b0011] = Complex64::new(1.0, 0.0);
        amps[0b1100] = Complex64::new(-1.0, 0.0);
        amps[0b0101] = Complex64::new(0.3, 0.2);
        let mut s = Statevector::new(4, amps).unwrap();
        s.normalize().unwrap();
        let g = build_lattice(2, 2).unwrap();
        let corr = spin_correlations(&s);
        let total: f64 = corr.iter().sum();
        let got = structure_factor(&s, &g, (0.0, 0.0)).unwrap();
        assert!((got - total / 16.0).abs() < 1e-14);
    }

    #[test]
    fn flip_invariance() {
        let mut amps: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        amps[3] = Complex64::new(2.0, 0.0);
        let mut s = Statevector::new(4, amps).unwrap();
        s.normalize().unwrap();
        let g = build_lattice(2, 2).unwrap();
        for k in [(PI, PI), (PI, 0.0), (0.3, 1.1)] {
            let a = structure_factor(&s, &g, k).unwrap();
            let b = structure_factor(&s.spin_flipped(), &g, k).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_unnormalized() {
        let g = build_lattice(2, 2).unwrap();
        let s = Statevector::new(4, vec![Complex64::new(1.0, 0.0); 16]).unwrap();
        assert!(structure_factor(&s, &g, (PI, PI)).is_err());
    }

    #[test]
    fn gspv_layout() {
        let s = Statevector::new(
            1,
            vec![Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.25)],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"GSPV");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..16], &0.5f64.to_le_bytes());
        assert_eq!(&buf[16..24], &(-1.0f64).to_le_bytes());
        assert_eq!(buf.len(), 8 + 32);
        assert_eq!(Statevector::read_from(&buf[..]).unwrap(), s);
        assert!(Statevector::read_from(&buf[..30]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Statevector::read_from(&bad[..]).is_err());
    }

    #[test]
    fn phase_fixing() {
        let mut s = Statevector::new(
            1,
            vec![Complex64::new(0.0, 0.6), Complex64::new(0.0, -0.8)],
        )
        .unwrap();
        s.fix_phase();
        assert!((s.amplitudes()[1] - Complex64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes()[0] - Complex64::new(-0.6, 0.0)).norm() < 1e-15);
    }
}
