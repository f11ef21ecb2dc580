//! Full-register simulation of the filter circuit and its amplification.
//!
//! Qubit layout, least significant first: `L` system qubits, `b` index
//! qubits, one ancilla. The ancilla is prepared in `|1>` and only ever
//! picks up phases: the oracle `S_chi` is a `Z` on it controlled by the
//! index register being all zero, which flips the sign of the
//! post-selected branch.
//!
//! `A = (B^dag (x) 1) U (B (x) 1) (1 (x) SP)`, where `SP` prepares the trial
//! state, `B` spreads `|0>` into `sum_k sqrt(alpha_k / alpha_s) |k + m0>`,
//! and `U` applies `exp(-2 i k H)` on the system controlled by `|k + m0>`.
//! One round is `Q = -A S_0 A^-1 S_chi`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::propagate::Propagator;
use super::FilterParams;
use crate::error::{Error, Result};
use crate::hamiltonian::ShiftedHamiltonian;
use crate::sampler::SparseTrialState;

/// Largest register simulated.
pub const MAX_REGISTER_QUBITS: usize = 24;

/// Qubits needed to index `count` values.
pub fn register_bits(count: usize) -> usize {
    let mut b = 0;
    while (1usize << b) < count {
        b += 1;
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitRun {
    pub num_sites: usize,
    pub index_qubits: usize,
    /// Amplitudes of the whole register after `Q^j A`.
    pub state: Vec<Complex64>,
    /// Weight of the branch with the index register all zero.
    pub success_probability: f64,
}

impl CircuitRun {
    /// System amplitudes of the index-zero, ancilla-one branch.
    pub fn branch(&self) -> &[Complex64] {
        let l = 1usize << self.num_sites;
        let off = 1usize << (self.num_sites + self.index_qubits);
        &self.state[off..off + l]
    }
}

/// Unit-norm reflection `x -> x - 2 u (u^dag x)` sending `e_0` to a
/// phase times `target`: `P = phase (1 - 2 u u^dag)`.
struct Preparation {
    u: Option<Vec<Complex64>>,
    phase: Complex64,
}

impl Preparation {
    fn new(target: &[Complex64]) -> Self {
        let phase = if target[0].norm() > 0.0 {
            target[0] / target[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        // w = conj(phase) target has a real non-negative first entry
        let mut u: Vec<Complex64> = target.iter().map(|x| -x * phase.conj()).collect();
        u[0] += 1.0;
        let n = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if n < 1e-15 {
            return Preparation { u: None, phase };
        }
        for x in u.iter_mut() {
            *x /= n;
        }
        Preparation { u: Some(u), phase }
    }

    fn apply(&self, x: &mut [Complex64], inverse: bool) {
        if inverse {
            for v in x.iter_mut() {
                *v *= self.phase.conj();
            }
        }
        if let Some(u) = &self.u {
            let c: Complex64 = u.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum();
            for (v, a) in x.iter_mut().zip(u) {
                *v -= a * c * 2.0;
            }
        }
        if !inverse {
            for v in x.iter_mut() {
                *v *= self.phase;
            }
        }
    }
}

struct Register<'a> {
    l: usize,
    b: usize,
    m0: usize,
    prop: &'a Propagator<'a>,
    sp: Preparation,
    spread: Preparation,
}

impl Register<'_> {
    fn sys_dim(&self) -> usize {
        1 << self.l
    }

    fn blocks(&self) -> usize {
        1 << (self.b + 1)
    }

    /// `SP` (or its inverse) on every system block.
    fn prep(&self, s: &mut [Complex64], inverse: bool) {
        s.par_chunks_mut(self.sys_dim())
            .for_each(|blk| self.sp.apply(blk, inverse));
    }

    /// `B` on the index register; it is its own inverse.
    fn spread(&self, s: &mut [Complex64]) {
        let l = self.sys_dim();
        let nb = 1usize << self.b;
        for anc in 0..2 {
            let base = anc * nb * l;
            let mut lane = vec![Complex64::new(0.0, 0.0); nb];
            for sys in 0..l {
                for (k, x) in lane.iter_mut().enumerate() {
                    *x = s[base + k * l + sys];
                }
                self.spread.apply(&mut lane, false);
                for (k, x) in lane.iter().enumerate() {
                    s[base + k * l + sys] = *x;
                }
            }
        }
    }

    /// Controlled evolutions; `sign = -1` applies the inverse.
    fn select(&self, s: &mut [Complex64], sign: isize) -> Result<()> {
        let l = self.sys_dim();
        let nb = 1usize << self.b;
        for (blk_idx, blk) in s.chunks_mut(l).enumerate() {
            let idx = blk_idx % nb;
            if idx > 2 * self.m0 {
                continue;
            }
            let k = idx as isize - self.m0 as isize;
            if k == 0 {
                continue;
            }
            let out = self.prop.evolve(blk, sign * k)?;
            blk.copy_from_slice(&out);
        }
        Ok(())
    }

    fn a(&self, s: &mut [Complex64]) -> Result<()> {
        self.prep(s, false);
        self.spread(s);
        self.select(s, 1)?;
        self.spread(s);
        Ok(())
    }

    fn a_inv(&self, s: &mut [Complex64]) -> Result<()> {
        self.spread(s);
        self.select(s, -1)?;
        self.spread(s);
        self.prep(s, true);
        Ok(())
    }

    fn initial_index(&self) -> usize {
        1 << (self.l + self.b)
    }

    /// `S_chi`: sign flip on the ancilla-one, index-zero block.
    fn oracle(&self, s: &mut [Complex64]) {
        let off = self.initial_index();
        for x in &mut s[off..off + self.sys_dim()] {
            *x = -*x;
        }
    }

    /// `S_0 = 1 - 2 |init><init|`.
    fn reflect_initial(&self, s: &mut [Complex64]) {
        let i = self.initial_index();
        s[i] = -s[i];
    }

    fn success(&self, s: &[Complex64]) -> f64 {
        let off = self.initial_index();
        s[off..off + self.sys_dim()].iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Runs `Q^j A |1>|0..0>|0..0>` on the full register.
pub fn simulate_q_circuit(
    trial: &SparseTrialState,
    hshift: &ShiftedHamiltonian,
    params: &FilterParams,
    j: usize,
) -> Result<CircuitRun> {
    params.validate()?;
    let l = trial.num_sites();
    if l != hshift.num_sites() {
        return Err(Error::invalid("trial state and Hamiltonian sizes differ"));
    }
    let b = params.index_qubits();
    let total = 1 + b + l;
    if total > MAX_REGISTER_QUBITS {
        return Err(Error::Capacity {
            what: "circuit register qubits",
            requested: total,
            limit: MAX_REGISTER_QUBITS,
        });
    }
    let weights = params.weights()?;
    let mut spread_target = vec![Complex64::new(0.0, 0.0); 1 << b];
    for (k, a) in weights.iter() {
        spread_target[(k + params.m0 as isize) as usize] = Complex64::new((a / weights.alpha_s()).sqrt(), 0.0);
    }
    let prop = Propagator::new(hshift)?;
    let reg = Register {
        l,
        b,
        m0: params.m0,
        prop: &prop,
        sp: Preparation::new(&trial.to_statevector().into_amplitudes()),
        spread: Preparation::new(&spread_target),
    };

    let mut s = vec![Complex64::new(0.0, 0.0); 1 << total];
    s[reg.initial_index()] = Complex64::new(1.0, 0.0);
    debug_assert_eq!(s.len(), reg.blocks() * reg.sys_dim());
    reg.a(&mut s)?;
    for _ in 0..j {
        reg.oracle(&mut s);
        reg.a_inv(&mut s)?;
        reg.reflect_initial(&mut s);
        reg.a(&mut s)?;
        for x in s.iter_mut() {
            *x = -*x;
        }
    }
    Ok(CircuitRun {
        num_sites: l,
        index_qubits: b,
        success_probability: reg.success(&s),
        state: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{amplitude_amplify, apply_filter, Propagator};
    use crate::hamiltonian::{build_hamiltonian, shift_spectrum, HeisenbergSpec};
    use crate::peps::SpinConfiguration;
    use crate::sampler::SparseTrialState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(rows: usize, cols: usize) -> ShiftedHamiltonian {
        let spec = HeisenbergSpec::new(rows, cols, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let lo = -0.75 * spec.geometry.nn_bonds().len() as f64;
        shift_spectrum(&h, lo, spec.lambda_max_bound()).unwrap()
    }

    fn trial(l: usize, m: usize, seed: u64) -> SparseTrialState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..m as u64)
            .map(|b| {
                let c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                (SpinConfiguration::new(l, b * 3 % (1 << l)).unwrap(), c)
            })
            .collect();
        SparseTrialState::new(l, entries).unwrap()
    }

    #[test]
    fn bit_counts() {
        assert_eq!(register_bits(1), 0);
        assert_eq!(register_bits(3), 2);
        assert_eq!(register_bits(4), 2);
        assert_eq!(register_bits(5), 3);
    }

    #[test]
    fn preparation_maps_zero_to_target() {
        let t = trial(3, 5, 1).to_statevector().into_amplitudes();
        let p = Preparation::new(&t);
        let mut x = vec![Complex64::new(0.0, 0.0); 8];
        x[0] = Complex64::new(1.0, 0.0);
        p.apply(&mut x, false);
        for (a, b) in x.iter().zip(&t) {
            assert!((a - b).norm() < 1e-14);
        }
        p.apply(&mut x, true);
        assert!((x[0] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn branch_matches_lcu_algebra() {
        let hs = instance(2, 2);
        let t = trial(4, 6, 2);
        for (m, m0) in [(6, 3), (8, 2)] {
            let params = FilterParams::new(m).unwrap().with_m0(m0).unwrap();
            let run = simulate_q_circuit(&t, &hs, &params, 0).unwrap();
            let prop = Propagator::new(&hs).unwrap();
            let v = prop
                .filter(&t.to_statevector().into_amplitudes(), &params.weights().unwrap())
                .unwrap();
            for (a, b) in run.branch().iter().zip(&v) {
                assert!((a - b).norm() < 1e-10);
            }
            let out = apply_filter(&t, &hs, &params).unwrap();
            assert!((run.success_probability - out.p).abs() < 1e-12);
            let norm: f64 = run.state.iter().map(|x| x.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn amplification_follows_closed_form() {
        for (rows, cols, m) in [(1, 2, 4), (2, 2, 6)] {
            let hs = instance(rows, cols);
            let t = trial(rows * cols, 3, 4);
            let params = FilterParams::new(m).unwrap();
            let p = simulate_q_circuit(&t, &hs, &params, 0).unwrap().success_probability;
            for j in 1..4 {
                let run = simulate_q_circuit(&t, &hs, &params, j).unwrap();
                let expect = amplitude_amplify(p, j).unwrap();
                assert!((run.success_probability - expect).abs() < 1e-8, "j {j}");
            }
        }
    }

    #[test]
    fn register_guard() {
        let spec = HeisenbergSpec::new(4, 5, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let hs = shift_spectrum(&h, -20.0, 10.0).unwrap();
        let t = trial(20, 2, 0);
        let params = FilterParams::new(100).unwrap();
        assert!(matches!(
            simulate_q_circuit(&t, &hs, &params, 0),
            Err(Error::Capacity { .. })
        ));
    }
}
