//! Simple-update imaginary-time evolution.
//!
//! A gate acts on the two end sites of a short chain of nearest-neighbour
//! sites. Nearest-neighbour terms use a two-site chain; a diagonal pair
//! is routed through the corner site that shares a row with the first
//! end and a column with the second, so both touched bonds are truncated
//! back to `D` and the lattice keeps its square connectivity.

use ndarray::{Array2, ArrayD};
use serde::Serialize;

use super::tensor::{matricize, permute, qr, reshape, scale_axis, svd, tensordot};
use super::{PepsState, PHYS_DIM};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, HeisenbergSpec};

/// Bond weights below this are clamped before they are divided out.
pub const REGULARIZATION_FLOOR: f64 = 1e-14;
/// Singular values below this fraction of the largest are discarded.
const SVD_CUTOFF: f64 = 1e-13;

/// Two-site operator, indexed `[(s_a', s_b'), (s_a, s_b)]` with `s = 1`
/// meaning spin up.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub matrix: Array2<f64>,
}

impl Gate {
    pub fn identity() -> Self {
        Gate {
            matrix: Array2::eye(PHYS_DIM * PHYS_DIM),
        }
    }
}

/// `exp(-tau J S_a.S_b)`.
///
/// With `P` the singlet projector, `S_a.S_b = 1/4 - P`, so the exponential
/// is `e^{-tau J/4} (1 - P) + e^{3 tau J/4} P`.
pub fn heisenberg_gate(j: f64, tau: f64) -> Gate {
    let triplet = (-tau * j / 4.0).exp();
    let singlet = (3.0 * tau * j / 4.0).exp();
    // singlet (|01> - |10>)/sqrt2 in the (s_a, s_b) index 2 s_a + s_b
    let mut m = Array2::eye(4) * triplet;
    let d = (singlet - triplet) / 2.0;
    m[(1, 1)] += d;
    m[(2, 2)] += d;
    m[(1, 2)] -= d;
    m[(2, 1)] -= d;
    Gate { matrix: m }
}

/// Ordered list of `(tau, steps)` stages with strictly decreasing `tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionSchedule {
    stages: Vec<(f64, usize)>,
}

impl EvolutionSchedule {
    pub fn new(stages: Vec<(f64, usize)>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::invalid("schedule has no stages"));
        }
        for &(tau, steps) in &stages {
            if !(tau > 0.0 && tau.is_finite()) || steps == 0 {
                return Err(Error::invalid(format!("bad stage (tau {tau}, steps {steps})")));
            }
        }
        if stages.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(Error::invalid("schedule taus must be strictly decreasing"));
        }
        Ok(EvolutionSchedule { stages })
    }

    /// The given taus with the same number of steps each.
    pub fn uniform(taus: &[f64], steps: usize) -> Result<Self> {
        Self::new(taus.iter().map(|&t| (t, steps)).collect())
    }

    pub fn stages(&self) -> &[(f64, usize)] {
        &self.stages
    }
}

impl Default for EvolutionSchedule {
    fn default() -> Self {
        Self::uniform(&[0.1, 0.01, 0.001, 0.0001, 0.00001], 300).expect("valid default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionReport {
    /// Per-site energy at the end of each stage.
    pub stage_energies: Vec<f64>,
    /// Final per-site energy.
    pub e0: f64,
    pub regularizations: usize,
}

impl EvolutionReport {
    /// Whether each stage ends no higher than the previous one, up to `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.stage_energies.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Applies `gate` to a nearest-neighbour bond.
pub fn simple_update_bond(peps: &mut PepsState, bond: usize, gate: &Gate) -> Result<()> {
    let &(a, b) = peps
        .geometry()
        .nn_bonds()
        .get(bond)
        .ok_or_else(|| Error::invalid(format!("bond {bond} out of range")))?;
    simple_update_chain(peps, &[a, b], gate)
}

/// Applies `gate` to the end sites of `chain`, a path of sites joined by
/// nearest-neighbour bonds. Interior sites are acted on by the identity.
pub fn simple_update_chain(peps: &mut PepsState, chain: &[usize], gate: &Gate) -> Result<()> {
    let n = chain.len();
    if n < 2 {
        return Err(Error::invalid("a chain needs at least two sites"));
    }
    if gate.matrix.dim() != (4, 4) {
        return Err(Error::invalid("gate must be 4x4"));
    }
    let inner: Vec<usize> = chain
        .windows(2)
        .map(|w| {
            peps.geometry()
                .nn_bond_index(w[0], w[1])
                .ok_or_else(|| Error::invalid(format!("sites {} and {} are not neighbours", w[0], w[1])))
        })
        .collect::<Result<_>>()?;

    // 1. absorb outer weights, split each site into Q (outer legs) and R
    let mut qs = Vec::with_capacity(n);
    let mut rs = Vec::with_capacity(n);
    let mut outer_legs = Vec::with_capacity(n);
    for (i, &site) in chain.iter().enumerate() {
        let t = peps.tensor(site);
        let mut data = t.data.clone();
        let own_inner: Vec<usize> = [i.checked_sub(1).map(|k| inner[k]), inner.get(i).copied()]
            .into_iter()
            .flatten()
            .collect();
        let mut outer = Vec::new();
        for (leg, &bd) in t.bonds.iter().enumerate() {
            if !own_inner.contains(&bd) {
                scale_axis(&mut data, leg + 1, &peps.bond_weights()[bd]);
                outer.push(leg + 1);
            }
        }
        let mut cols = vec![0];
        cols.extend(own_inner.iter().map(|&bd| t.leg_of(bd).unwrap() + 1));
        let (m, row_shape, col_shape) = matricize(&data, &outer, &cols);
        let (q, r) = qr(&m);
        let k = q.ncols();
        let mut qshape = row_shape;
        qshape.push(k);
        let mut rshape = vec![k];
        rshape.extend(col_shape);
        qs.push(reshape(q.into_dyn(), &qshape));
        rs.push(reshape(r.into_dyn(), &rshape));
        outer_legs.push(outer);
    }

    // 2. theta[k0, p0, k1, p1, ...] with the inner weights inserted
    let mut theta = rs[0].clone();
    for i in 1..n {
        let last = theta.ndim() - 1;
        scale_axis(&mut theta, last, &peps.bond_weights()[inner[i - 1]]);
        theta = tensordot(&theta, &[last], &rs[i], &[2]);
    }

    // 3. gate on the physical legs of the two ends
    let p_first = 1;
    let p_last = theta.ndim() - 1;
    let g = reshape(gate.matrix.clone().into_dyn(), &[2, 2, 2, 2]);
    let gated = tensordot(&g, &[2, 3], &theta, &[p_first, p_last]);
    // gated: [pa', pb', rest of theta without p_first, p_last]
    let nd = gated.ndim();
    let mut perm = Vec::with_capacity(nd);
    // original theta axes: 0 k0, 1 p0, ..., nd-1 p_last
    let mut rest = 2..nd;
    for axis in 0..nd {
        if axis == p_first {
            perm.push(0);
        } else if axis == p_last {
            perm.push(1);
        } else {
            perm.push(rest.next().unwrap());
        }
    }
    let mut remainder = permute(gated, &perm);

    // 4. sequential SVD from the first site; each new piece carries
    //    [left inner, k_i, p_i, right inner]
    let d = peps.bond_dim();
    let mut pieces: Vec<ArrayD<f64>> = Vec::with_capacity(n);
    let mut new_weights: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    let mut regularized = 0;
    for i in 0..n - 1 {
        let split = if i == 0 { 2 } else { 3 };
        let rows: Vec<usize> = (0..split).collect();
        let cols: Vec<usize> = (split..remainder.ndim()).collect();
        let (m, row_shape, col_shape) = matricize(&remainder, &rows, &cols);
        let dec = svd(&m);
        let smax = dec.s.first().copied().unwrap_or(0.0);
        if !(smax > 0.0 && smax.is_finite()) {
            return Err(Error::NumericalDivergence { stage: 0 });
        }
        let keep = dec
            .s
            .iter()
            .take(d)
            .take_while(|&&s| s > SVD_CUTOFF * smax)
            .count()
            .max(1);
        let u = dec.u.slice(ndarray::s![.., ..keep]).to_owned();
        let lam: Vec<f64> = dec.s[..keep].iter().map(|s| s / smax).collect();
        let mut ushape = row_shape;
        ushape.push(keep);
        let mut piece = reshape(u.into_dyn(), &ushape);
        if i > 0 {
            let inv = inverse_weights(&new_weights[i - 1], &mut regularized);
            scale_axis(&mut piece, 0, &inv);
        }
        pieces.push(piece);
        let mut sv = dec.vt.slice(ndarray::s![..keep, ..]).to_owned();
        for (r, mut row) in sv.rows_mut().into_iter().enumerate() {
            row *= lam[r];
        }
        let mut vshape = vec![keep];
        vshape.extend(col_shape);
        remainder = reshape(sv.into_dyn(), &vshape);
        new_weights.push(lam);
    }
    // the last piece is lambda V; strip lambda back off
    let inv = inverse_weights(&new_weights[n - 2], &mut regularized);
    scale_axis(&mut remainder, 0, &inv);
    pieces.push(remainder);

    // 5. recombine with Q, divide the outer weights back out, restore leg order
    for (i, &site) in chain.iter().enumerate() {
        // piece axes: first site [k, p, r]; interior [l, k, p, r]; last [l, k, p]
        let piece = &pieces[i];
        let k_axis = if i == 0 { 0 } else { 1 };
        let q = &qs[i];
        let nq = q.ndim();
        let mut t = tensordot(q, &[nq - 1], piece, &[k_axis]);
        // t axes: outer legs..., then piece axes without k
        let n_outer = outer_legs[i].len();
        let old = peps.tensor(site);
        let mut axis_of_leg = vec![0usize; old.bonds.len() + 1];
        for (pos, &leg) in outer_legs[i].iter().enumerate() {
            axis_of_leg[leg] = pos;
        }
        let mut next = n_outer;
        if i > 0 {
            axis_of_leg[old.leg_of(inner[i - 1]).unwrap() + 1] = next;
            next += 1;
        }
        axis_of_leg[0] = next;
        next += 1;
        if i < n - 1 {
            axis_of_leg[old.leg_of(inner[i]).unwrap() + 1] = next;
        }
        t = permute(t, &axis_of_leg);
        for &leg in &outer_legs[i] {
            let bd = old.bonds[leg - 1];
            let inv = inverse_weights(&peps.bond_weights()[bd], &mut regularized);
            scale_axis(&mut t, leg, &inv);
        }
        let scale = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale > 0.0 && scale.is_finite() {
            t /= scale;
        }
        peps.tensors[site].data = t;
    }
    for (k, w) in new_weights.into_iter().enumerate() {
        peps.bond_weights[inner[k]] = w;
    }
    if regularized > 0 {
        log::warn!("simple update clamped {regularized} bond weights to {REGULARIZATION_FLOOR:e}");
        peps.regularizations += regularized;
    }
    Ok(())
}

fn inverse_weights(w: &[f64], regularized: &mut usize) -> Vec<f64> {
    w.iter()
        .map(|&x| {
            if x < REGULARIZATION_FLOOR {
                *regularized += 1;
                1.0 / REGULARIZATION_FLOOR
            } else {
                1.0 / x
            }
        })
        .collect()
}

/// Chain routing a diagonal pair `(a, b)` through the corner site in
/// `a`'s row and `b`'s column.
pub(crate) fn diagonal_chain(peps: &PepsState, a: usize, b: usize) -> [usize; 3] {
    let g = peps.geometry();
    let (sa, sb) = (g.site(a), g.site(b));
    [a, g.index(sa.row, sb.col), b]
}

/// Imaginary-time evolution of `peps` under the spec's Hamiltonian,
/// first-order Trotter with nearest-neighbour bonds by index followed by
/// the diagonal pairs.
pub fn itebd_evolve(
    peps: &mut PepsState,
    spec: &HeisenbergSpec,
    schedule: &EvolutionSchedule,
) -> Result<EvolutionReport> {
    spec.validate()?;
    if spec.geometry != *peps.geometry() {
        return Err(Error::invalid("PEPS and Hamiltonian lattices differ"));
    }
    let h = build_hamiltonian(spec)?;
    let nn = peps.geometry().nn_bonds().to_vec();
    let nnn = peps.geometry().nnn_bonds().to_vec();
    let chains: Vec<[usize; 3]> = nnn.iter().map(|&(a, b)| diagonal_chain(peps, a, b)).collect();
    let mut stage_energies = Vec::with_capacity(schedule.stages().len());
    for (stage, &(tau, steps)) in schedule.stages().iter().enumerate() {
        let g1 = heisenberg_gate(spec.j1, tau);
        let g2 = heisenberg_gate(spec.j2, tau);
        for _ in 0..steps {
            for &(a, b) in &nn {
                simple_update_chain(peps, &[a, b], &g1).map_err(|e| divergence(e, stage))?;
            }
            if spec.j2 != 0.0 {
                for chain in &chains {
                    simple_update_chain(peps, chain, &g2).map_err(|e| divergence(e, stage))?;
                }
            }
            if !peps.is_finite() {
                return Err(Error::NumericalDivergence { stage });
            }
        }
        let e = peps
            .energy_per_site(&h)
            .map_err(|e| divergence(e, stage))?;
        if !e.is_finite() {
            return Err(Error::NumericalDivergence { stage });
        }
        log::info!("stage {stage} tau {tau:e}: E/L = {e:.8}");
        stage_energies.push(e);
    }
    Ok(EvolutionReport {
        e0: *stage_energies.last().expect("at least one stage"),
        stage_energies,
        regularizations: peps.regularizations(),
    })
}

fn divergence(e: Error, stage: usize) -> Error {
    match e {
        Error::NumericalDivergence { .. } => Error::NumericalDivergence { stage },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdiag::lanczos_extremes;
    use crate::lattice::build_lattice;
    use ndarray::IxDyn;
    use crate::peps::{init_peps, peps_to_statevector, SpinConfiguration};
    use nalgebra::DMatrix;

    fn dense_gate(j: f64, tau: f64) -> DMatrix<f64> {
        // S.S in the (s_a, s_b) basis, index 2 s_a + s_b, diagonalized numerically
        let mut h = DMatrix::zeros(4, 4);
        for sa in 0..2 {
            for sb in 0..2 {
                let i = 2 * sa + sb;
                h[(i, i)] = if sa == sb { 0.25 } else { -0.25 };
            }
        }
        h[(1, 2)] = 0.5;
        h[(2, 1)] = 0.5;
        let eig = (h * (-tau * j)).symmetric_eigen();
        let exp = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
        &eig.eigenvectors * exp * eig.eigenvectors.transpose()
    }

    #[test]
    fn gate_matches_matrix_exponential() {
        for (j, tau) in [(1.0, 0.1), (0.5, 0.01), (1.0, 2.0)] {
            let g = heisenberg_gate(j, tau);
            let d = dense_gate(j, tau);
            for r in 0..4 {
                for c in 0..4 {
                    assert!((g.matrix[(r, c)] - d[(r, c)]).abs() < 1e-12);
                }
            }
        }
        assert_eq!(heisenberg_gate(1.0, 0.0), Gate::identity());
    }

    #[test]
    fn schedule_validation() {
        assert!(EvolutionSchedule::new(vec![(0.1, 10), (0.1, 10)]).is_err());
        assert!(EvolutionSchedule::new(vec![(0.01, 10), (0.1, 10)]).is_err());
        assert!(EvolutionSchedule::new(vec![(0.1, 0)]).is_err());
        assert!(EvolutionSchedule::new(vec![]).is_err());
        let d = EvolutionSchedule::default();
        assert_eq!(d.stages().len(), 5);
        assert!(d.stages().iter().all(|&(_, s)| s == 300));
    }

    #[test]
    fn identity_gate_preserves_amplitudes() {
        let g = build_lattice(2, 2).unwrap();
        let mut p = init_peps(&g, 3, 11).unwrap();
        let (before, _) = peps_to_statevector(&p).unwrap();
        for bond in 0..g.nn_bonds().len() {
            simple_update_bond(&mut p, bond, &Gate::identity()).unwrap();
        }
        let chain = diagonal_chain(&p, 0, 3);
        simple_update_chain(&mut p, &chain, &Gate::identity()).unwrap();
        let (after, _) = peps_to_statevector(&p).unwrap();
        for (x, y) in before.amplitudes().iter().zip(after.amplitudes()) {
            assert!((x - y).norm() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn exact_gate_application_on_two_sites() {
        // at D large enough nothing is truncated: the update is exact
        let g = build_lattice(1, 2).unwrap();
        let mut p = init_peps(&g, 4, 2).unwrap();
        let (v, _) = peps_to_statevector(&p).unwrap();
        let gate = heisenberg_gate(1.0, 0.7);
        simple_update_bond(&mut p, 0, &gate).unwrap();
        let (w, _) = peps_to_statevector(&p).unwrap();
        // expected: G acting on (s_0, s_1), basis index s_0 + 2 s_1
        let mut expect = [0.0; 4];
        for sa in 0..2 {
            for sb in 0..2 {
                for ta in 0..2 {
                    for tb in 0..2 {
                        expect[sa + 2 * sb] +=
                            gate.matrix[(2 * sa + sb, 2 * ta + tb)] * v.amplitudes()[ta + 2 * tb].re;
                    }
                }
            }
        }
        let n: f64 = expect.iter().map(|x| x * x).sum::<f64>().sqrt();
        for k in 0..4 {
            assert!((w.amplitudes()[k].re - expect[k] / n).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_chain_gate_on_three_sites() {
        // the plaquette is a loop, so only a cap above the reachable rank
        // keeps the update free of truncation
        let g = build_lattice(2, 2).unwrap();
        let mut p = init_peps(&g, 2, 9).unwrap();
        p.bond_dim = 16;
        let (v, _) = peps_to_statevector(&p).unwrap();
        let gate = heisenberg_gate(0.6, 0.9);
        let chain = diagonal_chain(&p, 0, 3);
        assert_eq!(chain, [0, 1, 3]);
        simple_update_chain(&mut p, &chain, &gate).unwrap();
        let (w, _) = peps_to_statevector(&p).unwrap();
        let mut expect = [0.0; 16];
        for s in 0..16usize {
            let (s0, s3) = (s & 1, (s >> 3) & 1);
            for t0 in 0..2 {
                for t3 in 0..2 {
                    let t = (s & 0b0110) | t0 | (t3 << 3);
                    expect[s] += gate.matrix[(2 * s0 + s3, 2 * t0 + t3)] * v.amplitudes()[t].re;
                }
            }
        }
        let n: f64 = expect.iter().map(|x| x * x).sum::<f64>().sqrt();
        let overlap: f64 = (0..16).map(|k| w.amplitudes()[k].re * expect[k] / n).sum();
        assert!((overlap.abs() - 1.0).abs() < 1e-8, "overlap {overlap}");
    }

    #[test]
    fn truncation_respects_bond_dimension() {
        let g = build_lattice(2, 3).unwrap();
        let mut p = init_peps(&g, 2, 4).unwrap();
        let gate = heisenberg_gate(1.0, 0.5);
        for _ in 0..3 {
            for bond in 0..g.nn_bonds().len() {
                simple_update_bond(&mut p, bond, &gate).unwrap();
            }
            for &(a, b) in g.nnn_bonds() {
                let c = diagonal_chain(&p, a, b);
                simple_update_chain(&mut p, &c, &gate).unwrap();
            }
        }
        for w in p.bond_weights() {
            assert!(w.len() <= 2 && !w.is_empty());
            assert!((w[0] - 1.0).abs() < 1e-14);
            assert!(w.windows(2).all(|x| x[0] >= x[1]));
        }
        for t in p.tensors() {
            assert!(t.leg_dims().iter().all(|&x| x <= 2));
        }
    }

    #[test]
    fn two_sites_reach_the_singlet() {
        let g = build_lattice(1, 2).unwrap();
        let spec = HeisenbergSpec::new(1, 2, 1.0, 0.0).unwrap();
        let mut p = init_peps(&g, 2, 3).unwrap();
        let sched = EvolutionSchedule::uniform(&[0.5, 0.1, 0.01], 300).unwrap();
        let rep = itebd_evolve(&mut p, &spec, &sched).unwrap();
        assert!((rep.e0 * 2.0 + 0.75).abs() < 1e-6, "E = {}", rep.e0 * 2.0);
        let up_down: SpinConfiguration = "10".parse().unwrap();
        let down_up: SpinConfiguration = "01".parse().unwrap();
        let (a, b) = (p.amplitude(up_down).re, p.amplitude(down_up).re);
        assert!((a + b).abs() < 1e-6 * a.abs().max(b.abs()));
        assert!(rep.is_monotone(1e-6));
    }

    #[test]
    fn spin_flip_symmetry_is_preserved() {
        let g = build_lattice(1, 2).unwrap();
        let spec = HeisenbergSpec::new(1, 2, 1.0, 0.0).unwrap();
        let mut p = init_peps(&g, 2, 0).unwrap();
        // |+>|-> with random virtual parts: |W(S)| is flip-symmetric
        for k in 0..2 {
            let a = p.tensors[0].data[IxDyn(&[0, k])];
            p.tensors[0].data[IxDyn(&[1, k])] = a;
            let b = p.tensors[1].data[IxDyn(&[0, k])];
            p.tensors[1].data[IxDyn(&[1, k])] = -b;
        }
        let sched = EvolutionSchedule::uniform(&[0.1], 5).unwrap();
        itebd_evolve(&mut p, &spec, &sched).unwrap();
        let w: Vec<f64> = (0..4u64)
            .map(|s| p.amplitude(SpinConfiguration::new(2, s).unwrap()).re.abs())
            .collect();
        assert!((w[0] - w[1]).abs() > 1e-3 * w[0]);
        for s in 0..4 {
            assert!((w[s] - w[3 - s]).abs() < 1e-8 * w[s].max(w[3 - s]));
        }
    }

    #[test]
    fn plaquette_energy_near_exact() {
        let spec = HeisenbergSpec::new(2, 2, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let ed = lanczos_extremes(&h, 1e-10, 500, 1).unwrap();
        let mut p = init_peps(&spec.geometry, 6, 0).unwrap();
        let sched = EvolutionSchedule::uniform(&[0.1, 0.01, 0.001], 300).unwrap();
        let rep = itebd_evolve(&mut p, &spec, &sched).unwrap();
        assert!((rep.e0 - ed.lambda0 / 4.0).abs() < 0.01, "{} vs {}", rep.e0, ed.lambda0 / 4.0);
    }

    #[test]
    fn mismatched_lattice_rejected() {
        let spec = HeisenbergSpec::new(2, 2, 1.0, 0.0).unwrap();
        let mut p = init_peps(&build_lattice(2, 3).unwrap(), 2, 0).unwrap();
        assert!(itebd_evolve(&mut p, &spec, &EvolutionSchedule::default()).is_err());
        assert!(simple_update_chain(&mut p, &[0, 4], &Gate::identity()).is_err());
    }
}
