//! Cosine filter on a sparse trial state, simulated at the statevector
//! level.
//!
//! The post-selected branch of the LCU circuit is
//! `v = (1 / alpha_s) sum_{|k| <= m0} alpha_k exp(-2 i k H) |phi_1>`,
//! which equals `cos^{2n}(H)|phi_1>` when `m0 = n`. Its squared norm is the
//! success probability `p`, later boosted by amplitude amplification.

mod circuit;
mod lcu;
mod propagate;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactdiag::EdResult;
use crate::hamiltonian::{ShiftedHamiltonian, SparseHamiltonian};
use crate::sampler::SparseTrialState;
use crate::statevector::Statevector;

pub use circuit::{register_bits, simulate_q_circuit, CircuitRun, MAX_REGISTER_QUBITS};
pub use lcu::{amplitude_amplify, binomial_weights, choose_m0, optimal_rounds, LcuWeights, MAX_N};
pub use propagate::{expv, Propagator, DENSE_MAX_SITES, KRYLOV_TOL};

/// Success probabilities below this are treated as zero.
pub const VANISHING_P: f64 = 1e-14;

/// How many amplification rounds to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounds {
    /// [`optimal_rounds`] of the measured success probability.
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for Rounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rounds::Auto => f.write_str("auto"),
            Rounds::Fixed(j) => write!(f, "{j}"),
        }
    }
}

impl FromStr for Rounds {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Rounds::Auto);
        }
        s.parse()
            .map(Rounds::Fixed)
            .map_err(|_| Error::invalid(format!("rounds must be 'auto' or a count, got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Half the filter degree, `m = 2n`.
    pub n: usize,
    /// Truncation radius of the binomial sum.
    pub m0: usize,
    /// Lower bound on the trial overlap, used by [`choose_m0`].
    pub chi: f64,
    /// Target precision, used by [`choose_m0`].
    pub eps: f64,
    pub rounds: Rounds,
}

impl FilterParams {
    /// Untruncated filter of even degree `m`.
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::invalid(format!("filter degree m = {m} must be even and >= 2")));
        }
        Ok(FilterParams {
            n: m / 2,
            m0: m / 2,
            chi: 0.5,
            eps: 1e-3,
            rounds: Rounds::Auto,
        })
    }

    pub fn with_m0(mut self, m0: usize) -> Result<Self> {
        self.m0 = m0;
        self.validate()?;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        2 * self.n
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_N {
            return Err(Error::invalid(format!("n = {} outside 1..={MAX_N}", self.n)));
        }
        if self.m0 == 0 || self.m0 > self.n {
            return Err(Error::invalid(format!("m0 = {} outside 1..={}", self.m0, self.n)));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return Err(Error::invalid(format!("chi = {} outside (0, 1]", self.chi)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<LcuWeights> {
        self.validate()?;
        binomial_weights(self.n, self.m0)
    }

    /// `b = ceil(log2(2 m0 + 1))` qubits index the LCU terms.
    pub fn index_qubits(&self) -> usize {
        register_bits(2 * self.m0 + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterOutcome {
    /// Normalized post-selected state.
    #[serde(skip)]
    pub psi0: Statevector,
    /// Post-selection success probability.
    pub p: f64,
    /// `|<psi0|H|psi0> - lambda0|`, once scored.
    pub energy_error: Option<f64>,
    /// `|<psi0|lambda0>|^2`, once scored.
    pub fidelity: Option<f64>,
    /// `sqrt(p) |<psi0|lambda0>|`, once scored.
    pub overall_overlap: Option<f64>,
    pub rounds: usize,
    pub amplified_p: f64,
}

/// Applies the filter to `trial` and picks amplification rounds.
pub fn apply_filter(
    trial: &SparseTrialState,
    hshift: &ShiftedHamiltonian,
    params: &FilterParams,
) -> Result<FilterOutcome> {
    let prop = Propagator::new(hshift)?;
    filter_with(&prop, trial, params)
}

/// [`apply_filter`] with a prepared propagator.
pub fn filter_with(
    prop: &Propagator<'_>,
    trial: &SparseTrialState,
    params: &FilterParams,
) -> Result<FilterOutcome> {
    let w = params.weights()?;
    Ok(filter_sweep(prop, trial, std::slice::from_ref(&w), params.rounds)?.remove(0))
}

/// Filters the same trial with several weight sets, sharing the
/// propagation work.
pub fn filter_sweep(
    prop: &Propagator<'_>,
    trial: &SparseTrialState,
    weights: &[LcuWeights],
    rounds: Rounds,
) -> Result<Vec<FilterOutcome>> {
    if trial.num_sites() > 30 || 1usize << trial.num_sites() != prop.dimension() {
        return Err(Error::invalid("trial state and Hamiltonian sizes differ"));
    }
    let phi = trial.to_statevector().into_amplitudes();
    prop.filter_many(&phi, weights)?
        .into_iter()
        .map(|v| outcome_from_branch(trial.num_sites(), v, rounds))
        .collect()
}

fn outcome_from_branch(num_sites: usize, v: Vec<Complex64>, rounds: Rounds) -> Result<FilterOutcome> {
    let p: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    if !(p >= VANISHING_P) {
        return Err(Error::VanishingSuccess { p });
    }
    let mut psi0 = Statevector::new(num_sites, v)?;
    psi0.normalize()?;
    let p = p.min(1.0);
    let j = match rounds {
        Rounds::Auto => optimal_rounds(p)?,
        Rounds::Fixed(j) => j,
    };
    Ok(FilterOutcome {
        psi0,
        p,
        energy_error: None,
        fidelity: None,
        overall_overlap: None,
        rounds: j,
        amplified_p: amplitude_amplify(p, j)?,
    })
}

/// Scores the filtered state against exact diagonalization.
pub fn evaluate_outcome(
    mut outcome: FilterOutcome,
    h: &SparseHamiltonian,
    ed: &EdResult,
) -> Result<FilterOutcome> {
    if outcome.psi0.dimension() != h.dimension() || ed.ground_vector.dimension() != h.dimension() {
        return Err(Error::invalid("outcome, Hamiltonian and ground state sizes differ"));
    }
    let energy = h.expectation(outcome.psi0.amplitudes());
    let overlap = outcome.psi0.inner(&ed.ground_vector).norm();
    outcome.energy_error = Some((energy - ed.lambda0).abs());
    outcome.fidelity = Some((overlap * overlap).min(1.0));
    outcome.overall_overlap = Some(outcome.p.sqrt() * overlap);
    Ok(outcome)
}
