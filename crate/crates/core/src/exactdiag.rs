//! Restarted Lanczos with full reorthogonalization.
//!
//! Supplies the exact reference data the rest of the pipeline is scored
//! against: the ground energy and vector, the top of the spectrum, and the
//! gap to the first excited level.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::SparseHamiltonian;
use crate::statevector::Statevector;

/// Gaps below this are treated as a degenerate ground level.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EdResult {
    pub lambda0: f64,
    pub lambda_max: f64,
    /// `lambda1 - lambda0`.
    pub gap: f64,
    pub ground_vector: Statevector,
    /// `||H v - lambda0 v||` of the returned ground vector.
    pub residual: f64,
    pub degenerate: bool,
}

/// Scalar summary written by the `ed` subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct EdSummary {
    pub lambda0: f64,
    pub lambda_max: f64,
    pub gap: f64,
    pub residual: f64,
}

impl EdResult {
    pub fn summary(&self) -> EdSummary {
        EdSummary {
            lambda0: self.lambda0,
            lambda_max: self.lambda_max,
            gap: self.gap,
            residual: self.residual,
        }
    }
}

/// Ground state, top eigenvalue, and gap of `h`.
pub fn lanczos_extremes(
    h: &SparseHamiltonian,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EdResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if h.num_sites() > 24 {
        return Err(Error::Capacity {
            what: "exact diagonalization sites",
            requested: h.num_sites(),
            limit: 24,
        });
    }
    let dim = h.dimension();
    let apply = |v: &[f64], out: &mut [f64]| h.apply_real_into(v, out);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_unit(dim, &mut rng);
    let ground = lowest_eigenpair(&apply, &start, &[], tol, max_iter)?;

    let neg = |v: &[f64], out: &mut [f64]| {
        h.apply_real_into(v, out);
        out.iter_mut().for_each(|x| *x = -*x);
    };
    let start = random_unit(dim, &mut rng);
    let top = lowest_eigenpair(&neg, &start, &[], tol, max_iter)?;
    let lambda_max = -top.value;

    let (lambda1, degenerate) = if dim == 1 {
        (ground.value, true)
    } else {
        let start = random_unit(dim, &mut rng);
        let first = lowest_eigenpair(&apply, &start, std::slice::from_ref(&ground.vector), tol, max_iter)?;
        (first.value, first.value - ground.value < DEGENERACY_THRESHOLD)
    };

    let mut gv = Statevector::from_real(h.num_sites(), &ground.vector)?;
    gv.fix_phase();
    Ok(EdResult {
        lambda0: ground.value,
        lambda_max,
        gap: (lambda1 - ground.value).max(0.0),
        ground_vector: gv,
        residual: ground.residual,
        degenerate,
    })
}

/// Gap used by the filter and cost model; errors on a degenerate bottom.
pub fn spectral_gap(ed: &EdResult) -> Result<f64> {
    if ed.degenerate || ed.gap < DEGENERACY_THRESHOLD {
        return Err(Error::Degenerate { gap: ed.gap });
    }
    Ok(ed.gap)
}

pub(crate) struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(q, v);
        v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
    }
}

fn krylov_size(dim: usize) -> usize {
    let cap = if dim <= 1 << 18 { 80 } else { 40 };
    dim.min(cap)
}

/// Smallest eigenpair of a symmetric operator restricted to the orthogonal
/// complement of `deflate` (which must be orthonormal).
pub(crate) fn lowest_eigenpair<F>(
    apply: &F,
    start: &[f64],
    deflate: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<Eigenpair>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = start.len();
    let kmax = krylov_size(dim.saturating_sub(deflate.len()).max(1));
    let mut x = start.to_vec();
    project_out(&mut x, deflate);
    let mut hx = vec![0.0; dim];
    let mut best_residual = f64::INFINITY;
    let mut iterations = 0;

    loop {
        let nx = norm(&x);
        if nx < 1e-300 {
            return Err(Error::invalid("start vector lies in the deflated subspace"));
        }
        x.iter_mut().for_each(|v| *v /= nx);

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(kmax);
        let mut alpha = Vec::with_capacity(kmax);
        let mut beta: Vec<f64> = Vec::with_capacity(kmax);
        basis.push(x.clone());
        let mut w = vec![0.0; dim];
        for j in 0..kmax {
            apply(&basis[j], &mut w);
            iterations += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                project_out(&mut w, &basis);
                project_out(&mut w, deflate);
            }
            let b = norm(&w);
            if j + 1 == kmax || b < 1e-13 || iterations >= max_iter {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }

        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let y = eig.eigenvectors.column(imin);
        x.iter_mut().for_each(|v| *v = 0.0);
        for (c, q) in y.iter().zip(&basis) {
            x.iter_mut().zip(q).for_each(|(xv, qv)| *xv += c * qv);
        }
        project_out(&mut x, deflate);
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);

        apply(&x, &mut hx);
        let rayleigh = dot(&x, &hx);
        let residual = x
            .iter()
            .zip(&hx)
            .map(|(a, b)| (b - rayleigh * a).powi(2))
            .sum::<f64>()
            .sqrt();
        best_residual = best_residual.min(residual);
        if residual <= tol {
            return Ok(Eigenpair {
                value: rayleigh,
                vector: x,
                residual,
            });
        }
        if iterations >= max_iter {
            return Err(Error::Convergence {
                iterations,
                best_residual,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_hamiltonian, HeisenbergSpec};

    fn dense_eigs(h: &SparseHamiltonian) -> Vec<f64> {
        let mut e: Vec<f64> = h
            .to_dense()
            .unwrap()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn two_spins() {
        let h = build_hamiltonian(&HeisenbergSpec::new(1, 2, 1.0, 0.0).unwrap()).unwrap();
        let ed = lanczos_extremes(&h, 1e-12, 1000, 1).unwrap();
        assert!((ed.lambda0 + 0.75).abs() < 1e-12);
        assert!((ed.lambda_max - 0.25).abs() < 1e-12);
        assert!((ed.gap - 1.0).abs() < 1e-12);
        assert!((spectral_gap(&ed).unwrap() - 1.0).abs() < 1e-12);
        assert!(ed.residual <= 1e-8);
        // singlet (|01> - |10>)/sqrt2 up to the phase convention
        let a = ed.ground_vector.amplitudes();
        assert!((a[1].norm() - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((a[1] + a[2]).norm() < 1e-10);
    }

    #[test]
    fn exhaustive_small_lattices_match_dense() {
        for (r, c) in [(1, 2), (1, 3), (1, 4), (2, 2)] {
            for j2 in [0.0, 0.5, 1.0] {
                let h = build_hamiltonian(&HeisenbergSpec::new(r, c, 1.0, j2).unwrap()).unwrap();
                let e = dense_eigs(&h);
                let ed = lanczos_extremes(&h, 1e-11, 2000, 7).unwrap();
                assert!((ed.lambda0 - e[0]).abs() < 1e-10, "{r}x{c} j2={j2}");
                assert!((ed.lambda_max - e[e.len() - 1]).abs() < 1e-10);
                let l1 = e.iter().copied().find(|x| *x > e[0] + 1e-9).unwrap_or(e[0]);
                if !ed.degenerate {
                    assert!((ed.gap - (l1 - e[0])).abs() < 1e-8, "{r}x{c} j2={j2}");
                }
            }
        }
    }

    #[test]
    fn variational_bound() {
        let h = build_hamiltonian(&HeisenbergSpec::new(2, 3, 1.0, 0.4).unwrap()).unwrap();
        let ed = lanczos_extremes(&h, 1e-10, 2000, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let v = random_unit(h.dimension(), &mut rng);
            let e = dot(&v, &h.apply_real(&v));
            assert!(e >= ed.lambda0 - 1e-9);
        }
    }

    #[test]
    fn reproducible_across_seeds() {
        let h = build_hamiltonian(&HeisenbergSpec::new(2, 3, 1.0, 0.0).unwrap()).unwrap();
        let a = lanczos_extremes(&h, 1e-10, 2000, 1).unwrap();
        let b = lanczos_extremes(&h, 1e-10, 2000, 99).unwrap();
        assert!(!a.degenerate);
        assert!(a.ground_vector.inner(&b.ground_vector).norm() > 1.0 - 1e-8);
    }

    #[test]
    fn degenerate_gap_is_an_error() {
        // three spins: the ground level is a spin-1/2 doublet
        let h = build_hamiltonian(&HeisenbergSpec::new(1, 3, 1.0, 0.0).unwrap()).unwrap();
        let ed = lanczos_extremes(&h, 1e-11, 2000, 5).unwrap();
        assert!(ed.degenerate);
        assert!(matches!(spectral_gap(&ed), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn iteration_cap_reports_residual() {
        let h = build_hamiltonian(&HeisenbergSpec::new(2, 3, 1.0, 0.0).unwrap()).unwrap();
        match lanczos_extremes(&h, 1e-14, 3, 1) {
            Err(Error::Convergence { best_residual, .. }) => assert!(best_residual.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
