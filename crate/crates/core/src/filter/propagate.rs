//! `exp(-2 i k H)` applied to vectors, for a shifted Hamiltonian `H`.
//!
//! Small systems diagonalize `H` once and apply every function of it in
//! the eigenbasis. Larger ones run a Lanczos-based exponential per time
//! step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use super::lcu::LcuWeights;
use crate::error::{Error, Result};
use crate::hamiltonian::ShiftedHamiltonian;

/// Up to this many sites the shifted Hamiltonian is diagonalized densely.
pub const DENSE_MAX_SITES: usize = 10;
/// Target error of each Krylov exponential.
pub const KRYLOV_TOL: f64 = 1e-10;
const KRYLOV_MAX_DIM: usize = 60;

enum Mode {
    Dense {
        values: Vec<f64>,
        vectors: DMatrix<f64>,
    },
    Krylov,
}

type Trajectory = Vec<Vec<Complex64>>;

pub struct Propagator<'a> {
    h: &'a ShiftedHamiltonian,
    mode: Mode,
}

impl<'a> Propagator<'a> {
    /// Picks the dense path up to [`DENSE_MAX_SITES`] sites.
    pub fn new(h: &'a ShiftedHamiltonian) -> Result<Self> {
        if h.num_sites() <= DENSE_MAX_SITES {
            Self::dense(h)
        } else {
            Ok(Self::krylov(h))
        }
    }

    pub fn dense(h: &'a ShiftedHamiltonian) -> Result<Self> {
        let eig = SymmetricEigen::new(h.to_dense()?);
        Ok(Propagator {
            h,
            mode: Mode::Dense {
                values: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
            },
        })
    }

    pub fn krylov(h: &'a ShiftedHamiltonian) -> Self {
        Propagator {
            h,
            mode: Mode::Krylov,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.mode, Mode::Dense { .. })
    }

    pub fn dimension(&self) -> usize {
        self.h.dimension()
    }

    /// `exp(-2 i k H) v`.
    pub fn evolve(&self, v: &[Complex64], k: isize) -> Result<Vec<Complex64>> {
        self.check(v)?;
        match &self.mode {
            Mode::Dense { values, vectors } => Ok(dense_apply(values, vectors, v, |lam| {
                Complex64::from_polar(1.0, -2.0 * k as f64 * lam)
            })),
            Mode::Krylov => expv(|x, y| self.h.apply_into(x, y), v, 2.0 * k as f64, KRYLOV_TOL),
        }
    }

    /// `(1 / alpha_s) sum_k alpha_k exp(-2 i k H) v` for each weight set.
    pub fn filter_many(&self, v: &[Complex64], weights: &[LcuWeights]) -> Result<Vec<Vec<Complex64>>> {
        self.check(v)?;
        match &self.mode {
            Mode::Dense { values, vectors } => {
                let coeffs = to_eigenbasis(vectors, v);
                Ok(weights
                    .par_iter()
                    .map(|w| {
                        let f = |lam: f64| lcu_scalar(w, lam);
                        from_eigenbasis(values, vectors, &coeffs, f)
                    })
                    .collect())
            }
            Mode::Krylov => {
                let m0 = weights.iter().map(|w| w.m0()).max().unwrap_or(0);
                let (fwd, bwd) = self.trajectory(v, m0)?;
                Ok(weights
                    .iter()
                    .map(|w| {
                        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
                        for (k, a) in w.iter() {
                            let term = if k >= 0 { &fwd[k as usize] } else { &bwd[(-k) as usize] };
                            let c = a / w.alpha_s();
                            out.par_iter_mut().zip(term.par_iter()).for_each(|(o, t)| *o += t * c);
                        }
                        out
                    })
                    .collect())
            }
        }
    }

    pub fn filter(&self, v: &[Complex64], weights: &LcuWeights) -> Result<Vec<Complex64>> {
        Ok(self.filter_many(v, std::slice::from_ref(weights))?.remove(0))
    }

    /// `exp(-2 i k H) v` and `exp(2 i k H) v` for `k = 0..=m0`, stepping
    /// one unit of time at a time.
    fn trajectory(&self, v: &[Complex64], m0: usize) -> Result<(Trajectory, Trajectory)> {
        let step = |x: &[Complex64], t: f64| expv(|a, b| self.h.apply_into(a, b), x, t, KRYLOV_TOL);
        let mut fwd = vec![v.to_vec()];
        let mut bwd = vec![v.to_vec()];
        for k in 1..=m0 {
            let next = step(&fwd[k - 1], 2.0)?;
            fwd.push(next);
            let prev = step(&bwd[k - 1], -2.0)?;
            bwd.push(prev);
        }
        Ok((fwd, bwd))
    }

    fn check(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.h.dimension() {
            return Err(Error::invalid(format!(
                "vector of length {} for a Hamiltonian of dimension {}",
                v.len(),
                self.h.dimension()
            )));
        }
        Ok(())
    }
}

/// `(1 / alpha_s) sum_k alpha_k e^{-2 i k lam}`.
pub(crate) fn lcu_scalar(w: &LcuWeights, lam: f64) -> Complex64 {
    let s: Complex64 = w
        .iter()
        .map(|(k, a)| Complex64::from_polar(a, -2.0 * k as f64 * lam))
        .sum();
    s / w.alpha_s()
}

fn to_eigenbasis(vectors: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    let re = DVector::from_iterator(v.len(), v.iter().map(|c| c.re));
    let im = DVector::from_iterator(v.len(), v.iter().map(|c| c.im));
    let cr = vectors.tr_mul(&re);
    let ci = vectors.tr_mul(&im);
    cr.iter().zip(ci.iter()).map(|(&r, &i)| Complex64::new(r, i)).collect()
}

fn from_eigenbasis<F: Fn(f64) -> Complex64>(
    values: &[f64],
    vectors: &DMatrix<f64>,
    coeffs: &[Complex64],
    f: F,
) -> Vec<Complex64> {
    let scaled: Vec<Complex64> = values.iter().zip(coeffs).map(|(&l, &c)| f(l) * c).collect();
    let re = DVector::from_iterator(scaled.len(), scaled.iter().map(|c| c.re));
    let im = DVector::from_iterator(scaled.len(), scaled.iter().map(|c| c.im));
    let r = vectors * re;
    let i = vectors * im;
    r.iter().zip(i.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

fn dense_apply<F: Fn(f64) -> Complex64>(
    values: &[f64],
    vectors: &DMatrix<f64>,
    v: &[Complex64],
    f: F,
) -> Vec<Complex64> {
    from_eigenbasis(values, vectors, &to_eigenbasis(vectors, v), f)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.par_iter().zip(b.par_iter()).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.par_iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(-i t A) v` for Hermitian `A` given as a matvec, by Lanczos with
/// full reorthogonalization. The step is split in halves until the
/// a-posteriori error estimate drops below `tol`.
pub fn expv<F>(apply: F, v: &[Complex64], t: f64, tol: f64) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let mut substeps = 1usize;
    loop {
        let dt = t / substeps as f64;
        let mut x = v.to_vec();
        let mut ok = true;
        for _ in 0..substeps {
            match expv_step(&apply, &x, dt, tol / substeps as f64) {
                Some(y) => x = y,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(x);
        }
        substeps *= 2;
        if substeps > 1 << 12 {
            return Err(Error::Convergence {
                iterations: KRYLOV_MAX_DIM * substeps,
                best_residual: f64::NAN,
            });
        }
    }
}

fn expv_step<F>(apply: &F, v: &[Complex64], t: f64, tol: f64) -> Option<Vec<Complex64>>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let n = v.len();
    let beta0 = norm(v);
    if beta0 == 0.0 || t == 0.0 {
        return Some(v.to_vec());
    }
    let kmax = KRYLOV_MAX_DIM.min(n);
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / beta0).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..kmax {
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                w.par_iter_mut().zip(q.par_iter()).for_each(|(x, y)| *x -= y * c);
            }
        }
        let b = norm(&w);
        let m = j + 1;
        let (y, last) = small_exp(&alpha, &beta, t);
        let err = beta0 * b * last;
        if b < 1e-14 || err < tol || m == n {
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            for (q, c) in basis.iter().zip(&y) {
                let c = c * beta0;
                out.par_iter_mut().zip(q.par_iter()).for_each(|(o, x)| *o += x * c);
            }
            return Some(out);
        }
        if m == kmax {
            return None;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    None
}

/// `exp(-i t T) e_1` for the tridiagonal `T`, and the magnitude of its
/// last entry.
fn small_exp(alpha: &[f64], beta: &[f64], t: f64) -> (Vec<Complex64>, f64) {
    let m = alpha.len();
    let mut tm = DMatrix::zeros(m, m);
    for i in 0..m {
        tm[(i, i)] = alpha[i];
        if i + 1 < m {
            tm[(i, i + 1)] = beta[i];
            tm[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(tm);
    let y: Vec<Complex64> = (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    let u = &eig.eigenvectors;
                    Complex64::from_polar(u[(r, c)] * u[(0, c)], -t * eig.eigenvalues[c])
                })
                .sum()
        })
        .collect();
    let last = y[m - 1].norm();
    (y, last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::lcu::binomial_weights;
    use crate::hamiltonian::{build_hamiltonian, shift_spectrum, HeisenbergSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shifted(rows: usize, cols: usize, j2: f64) -> ShiftedHamiltonian {
        let spec = HeisenbergSpec::new(rows, cols, 1.0, j2).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let d = h.to_dense().unwrap();
        let eig = SymmetricEigen::new(d);
        let lo = eig.eigenvalues.min();
        let hi = eig.eigenvalues.max();
        shift_spectrum(&h, lo, hi).unwrap()
    }

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn krylov_matches_dense() {
        let h = shifted(2, 3, 0.5);
        let dense = Propagator::dense(&h).unwrap();
        let kry = Propagator::krylov(&h);
        let v = random_vec(64, 1);
        for k in [-3, -1, 0, 1, 4, 25] {
            let a = dense.evolve(&v, k).unwrap();
            let b = kry.evolve(&v, k).unwrap();
            let err: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "k = {k}: {err}");
        }
        let ws: Vec<LcuWeights> = [(3, 3), (8, 5), (12, 12)]
            .iter()
            .map(|&(n, m0)| binomial_weights(n, m0).unwrap())
            .collect();
        let a = dense.filter_many(&v, &ws).unwrap();
        let b = kry.filter_many(&v, &ws).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let err: f64 = x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn evolution_is_unitary_and_invertible() {
        let h = shifted(2, 2, 0.0);
        let p = Propagator::krylov(&h);
        let v = random_vec(16, 2);
        let w = p.evolve(&v, 7).unwrap();
        assert!((norm(&w) - norm(&v)).abs() < 1e-10);
        let back = p.evolve(&w, -7).unwrap();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let h = shifted(1, 2, 0.0);
        let p = Propagator::new(&h).unwrap();
        assert!(p.is_dense());
        assert!(p.evolve(&random_vec(8, 0), 1).is_err());
    }
}
