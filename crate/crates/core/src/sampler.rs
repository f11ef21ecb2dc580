//! Metropolis sampling of PEPS configurations and sparse trial states.
//!
//! Chains propose single spin flips (or, optionally, swaps of two sites,
//! which keep total `S^z`) and accept when the weight ratio
//! `|W(S_1)|^2 / |W(S_0)|^2` exceeds a uniform draw. Visited configurations
//! are deduplicated; the heaviest `M` of them, with amplitudes taken from
//! the wavefunction itself, form the trial state.

use std::collections::BTreeMap;

use ndarray::ArrayD;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peps::{PepsState, SpinConfiguration};
use crate::statevector::Statevector;

/// Anything that can report an amplitude `W(S)` for a configuration.
pub trait Wavefunction: Sync {
    fn num_sites(&self) -> usize;
    fn amplitude(&self, config: SpinConfiguration) -> Complex64;
}

/// Contracts the PEPS afresh for every amplitude.
pub struct PepsAmplitudes<'a> {
    peps: &'a PepsState,
    tensors: Vec<ArrayD<f64>>,
}

impl<'a> PepsAmplitudes<'a> {
    pub fn new(peps: &'a PepsState) -> Self {
        PepsAmplitudes {
            peps,
            tensors: peps.amplitude_tensors(),
        }
    }
}

impl Wavefunction for PepsAmplitudes<'_> {
    fn num_sites(&self) -> usize {
        self.peps.num_sites()
    }

    fn amplitude(&self, config: SpinConfiguration) -> Complex64 {
        Complex64::new(self.peps.amplitude_with(&self.tensors, config), 0.0)
    }
}

/// Table lookup into a dense statevector. For a contracted PEPS this
/// gives the same chain as [`PepsAmplitudes`] at a fraction of the cost,
/// since only weight ratios enter.
pub struct DenseAmplitudes<'a> {
    state: &'a Statevector,
}

impl<'a> DenseAmplitudes<'a> {
    pub fn new(state: &'a Statevector) -> Self {
        DenseAmplitudes { state }
    }
}

impl Wavefunction for DenseAmplitudes<'_> {
    fn num_sites(&self) -> usize {
        self.state.num_sites()
    }

    fn amplitude(&self, config: SpinConfiguration) -> Complex64 {
        self.state.amplitudes()[config.index()]
    }
}

impl Wavefunction for PepsState {
    fn num_sites(&self) -> usize {
        PepsState::num_sites(self)
    }

    fn amplitude(&self, config: SpinConfiguration) -> Complex64 {
        PepsState::amplitude(self, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    /// Flip one uniformly chosen spin.
    #[default]
    Flip,
    /// Swap the spins of two uniformly chosen distinct sites.
    Exchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOptions {
    /// Recorded sweeps; one sweep is `L` proposals.
    pub sweeps: usize,
    /// Sweeps run and discarded before recording.
    pub burn_in: usize,
    pub seed: u64,
    pub move_kind: MoveKind,
}

impl ChainOptions {
    /// Burn-in of 10% of the recorded sweeps.
    pub fn new(sweeps: usize, seed: u64) -> Self {
        ChainOptions {
            sweeps,
            burn_in: sweeps / 10,
            seed,
            move_kind: MoveKind::Flip,
        }
    }
}

/// Default number of sweeps: 5000 at 8 sites rising linearly to 50000
/// at 20, clamped outside that range.
pub fn default_sweeps(num_sites: usize) -> usize {
    let l = num_sites.clamp(8, 20) as f64;
    (5000.0 + 45000.0 * (l - 8.0) / 12.0).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub config: SpinConfiguration,
    /// `|W(S)|^2`, unnormalized.
    pub weight: f64,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    /// One record per distinct visited configuration, sorted by
    /// configuration.
    pub records: Vec<SampleRecord>,
    pub accepted: u64,
    pub proposed: u64,
}

impl ChainResult {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// Combines two runs; associative and commutative.
    pub fn merge(self, other: ChainResult) -> ChainResult {
        ChainResult {
            records: merge_records(&self.records, &other.records),
            accepted: self.accepted + other.accepted,
            proposed: self.proposed + other.proposed,
        }
    }
}

/// Metropolis acceptance: move iff `p0 > r` for `r` uniform on `[0, 1)`.
pub fn accept(p0: f64, r: f64) -> bool {
    p0 > r
}

/// Sums visit counts of records sharing a configuration.
pub fn merge_records(a: &[SampleRecord], b: &[SampleRecord]) -> Vec<SampleRecord> {
    let mut map: BTreeMap<SpinConfiguration, SampleRecord> = BTreeMap::new();
    for r in a.iter().chain(b) {
        map.entry(r.config)
            .and_modify(|e| e.visits += r.visits)
            .or_insert(*r);
    }
    map.into_values().collect()
}

/// Every configuration once, for small lattices.
pub fn enumerate_records<W: Wavefunction + ?Sized>(wf: &W) -> Result<Vec<SampleRecord>> {
    let l = wf.num_sites();
    if l > 24 {
        return Err(Error::Capacity {
            what: "enumerated configurations (sites)",
            requested: l,
            limit: 24,
        });
    }
    (0..1u64 << l)
        .into_par_iter()
        .map(|bits| {
            let config = SpinConfiguration::new(l, bits)?;
            Ok(SampleRecord {
                config,
                weight: wf.amplitude(config).norm_sqr(),
                visits: 1,
            })
        })
        .collect()
}

fn random_start(l: usize, kind: MoveKind, rng: &mut ChaCha8Rng) -> SpinConfiguration {
    let bits: u64 = match kind {
        MoveKind::Flip => {
            let mask = if l == 64 { u64::MAX } else { (1u64 << l) - 1 };
            rng.random::<u64>() & mask
        }
        MoveKind::Exchange => {
            // half up, uniformly placed
            let mut sites: Vec<usize> = (0..l).collect();
            for i in (1..l).rev() {
                let j = rng.random_range(0..=i);
                sites.swap(i, j);
            }
            sites[..l / 2].iter().fold(0, |acc, &s| acc | (1 << s))
        }
    };
    SpinConfiguration::new(l, bits).expect("bits within length")
}

const START_ATTEMPTS: usize = 1000;

/// One Markov chain. Every proposal after burn-in counts as a visit to
/// the chain's current configuration.
pub fn metropolis_run<W: Wavefunction + ?Sized>(wf: &W, opts: &ChainOptions) -> Result<ChainResult> {
    if opts.sweeps == 0 {
        return Err(Error::invalid("sweeps must be at least 1"));
    }
    let l = wf.num_sites();
    if l < 2 && opts.move_kind == MoveKind::Exchange {
        return Err(Error::invalid("exchange moves need at least two sites"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current = random_start(l, opts.move_kind, &mut rng);
    let mut weight = wf.amplitude(current).norm_sqr();
    let mut attempts = 1;
    while !(weight > 0.0) {
        if attempts == START_ATTEMPTS {
            return Err(Error::SamplingDegeneracy);
        }
        current = random_start(l, opts.move_kind, &mut rng);
        weight = wf.amplitude(current).norm_sqr();
        attempts += 1;
    }

    let mut visits: BTreeMap<SpinConfiguration, SampleRecord> = BTreeMap::new();
    let (mut accepted, mut proposed) = (0u64, 0u64);
    for sweep in 0..opts.burn_in + opts.sweeps {
        let recording = sweep >= opts.burn_in;
        for _ in 0..l {
            let proposal = match opts.move_kind {
                MoveKind::Flip => current.flipped(rng.random_range(0..l)),
                MoveKind::Exchange => {
                    let i = rng.random_range(0..l);
                    let j = (i + rng.random_range(1..l)) % l;
                    if current.is_up(i) == current.is_up(j) {
                        current
                    } else {
                        current.flipped(i).flipped(j)
                    }
                }
            };
            let r: f64 = rng.random();
            if proposal != current {
                let w = wf.amplitude(proposal).norm_sqr();
                if accept(w / weight, r) {
                    current = proposal;
                    weight = w;
                    if recording {
                        accepted += 1;
                    }
                }
            }
            if recording {
                proposed += 1;
                visits
                    .entry(current)
                    .and_modify(|e| e.visits += 1)
                    .or_insert(SampleRecord {
                        config: current,
                        weight,
                        visits: 1,
                    });
            }
        }
    }
    Ok(ChainResult {
        records: visits.into_values().collect(),
        accepted,
        proposed,
    })
}

/// Independent chains seeded `seed, seed + 1, ...`, run in parallel and
/// merged.
pub fn run_chains<W: Wavefunction + ?Sized>(
    wf: &W,
    opts: &ChainOptions,
    chains: usize,
) -> Result<ChainResult> {
    if chains == 0 {
        return Err(Error::invalid("at least one chain required"));
    }
    let runs: Vec<ChainResult> = (0..chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut o = *opts;
            o.seed = opts.seed.wrapping_add(c);
            metropolis_run(wf, &o)
        })
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .reduce(ChainResult::merge)
        .expect("at least one chain"))
}

/// Sparse state `sum_j c_j |a_j>` over `M` distinct configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTrialState {
    num_sites: usize,
    entries: Vec<(SpinConfiguration, Complex64)>,
}

impl SparseTrialState {
    /// Normalizes and orders the entries by descending `|c|`, ties broken
    /// by configuration.
    pub fn new(num_sites: usize, mut entries: Vec<(SpinConfiguration, Complex64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("trial state needs at least one component"));
        }
        if entries.iter().any(|(c, _)| c.len() != num_sites) {
            return Err(Error::invalid("configuration length does not match"));
        }
        entries.sort_by_key(|a| a.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate configuration in trial state"));
        }
        let norm = entries.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("trial state has zero norm"));
        }
        for (_, c) in entries.iter_mut() {
            *c /= norm;
        }
        entries.sort_by(|a, b| b.1.norm_sqr().total_cmp(&a.1.norm_sqr()).then(a.0.cmp(&b.0)));
        Ok(SparseTrialState { num_sites, entries })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    /// Number of components `M`.
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(SpinConfiguration, Complex64)] {
        &self.entries
    }

    pub fn to_statevector(&self) -> Statevector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << self.num_sites];
        for (c, a) in &self.entries {
            amps[c.index()] = *a;
        }
        Statevector::new(self.num_sites, amps).expect("size checked at construction")
    }
}

/// Keeps the `m` heaviest records (ties by configuration) and reads their
/// amplitudes back from `wf`.
pub fn extract_trial_state<W: Wavefunction + ?Sized>(
    records: &[SampleRecord],
    wf: &W,
    m: usize,
) -> Result<SparseTrialState> {
    let distinct = merge_records(records, &[]);
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if m > distinct.len() {
        return Err(Error::InsufficientSupport {
            requested: m,
            available: distinct.len(),
        });
    }
    let mut sorted = distinct;
    sorted.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.config.cmp(&b.config)));
    let entries = sorted[..m]
        .iter()
        .map(|r| (r.config, wf.amplitude(r.config)))
        .collect();
    SparseTrialState::new(wf.num_sites(), entries)
}

/// States whose overlap with a dense vector can be taken.
pub trait Overlap {
    fn num_sites(&self) -> usize;
    fn norm_sqr(&self) -> f64;
    /// `<self|other>`.
    fn overlap(&self, other: &Statevector) -> Complex64;
}

impl Overlap for Statevector {
    fn num_sites(&self) -> usize {
        Statevector::num_sites(self)
    }

    fn norm_sqr(&self) -> f64 {
        self.norm().powi(2)
    }

    fn overlap(&self, other: &Statevector) -> Complex64 {
        self.inner(other)
    }
}

impl Overlap for SparseTrialState {
    fn num_sites(&self) -> usize {
        self.num_sites
    }

    fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    fn overlap(&self, other: &Statevector) -> Complex64 {
        self.entries
            .iter()
            .map(|(s, c)| c.conj() * other.amplitudes()[s.index()])
            .sum()
    }
}

/// `|<a|b>|^2` of the normalized states.
pub fn fidelity<A: Overlap + ?Sized>(a: &A, b: &Statevector) -> Result<f64> {
    if a.num_sites() != b.num_sites() {
        return Err(Error::invalid("states live on different lattices"));
    }
    let den = a.norm_sqr() * b.norm().powi(2);
    if !(den > 0.0) {
        return Err(Error::invalid("fidelity with a zero vector"));
    }
    Ok((a.overlap(b).norm_sqr() / den).clamp(0.0, 1.0))
}

/// Fidelity with `ground` of the heaviest-`M` truncation of `state`, for
/// `M = 1..=max_m`. Components are ranked the way
/// [`extract_trial_state`] ranks sampled records.
pub fn truncation_fidelities(state: &Statevector, ground: &Statevector, max_m: usize) -> Result<Vec<f64>> {
    if state.num_sites() != ground.num_sites() {
        return Err(Error::invalid("states live on different lattices"));
    }
    let l = state.num_sites();
    let amps = state.amplitudes();
    let g = ground.amplitudes();
    let gnorm = ground.norm().powi(2);
    if !(gnorm > 0.0) {
        return Err(Error::invalid("fidelity with a zero vector"));
    }
    let mut order: Vec<SpinConfiguration> = (0..amps.len() as u64)
        .filter(|&b| amps[b as usize].norm_sqr() > 0.0)
        .map(|b| SpinConfiguration::new(l, b))
        .collect::<Result<_>>()?;
    if max_m > order.len() {
        return Err(Error::InsufficientSupport {
            requested: max_m,
            available: order.len(),
        });
    }
    order.sort_by(|a, b| {
        amps[b.index()]
            .norm_sqr()
            .total_cmp(&amps[a.index()].norm_sqr())
            .then(a.cmp(b))
    });
    let mut overlap = Complex64::new(0.0, 0.0);
    let mut norm = 0.0;
    Ok(order[..max_m]
        .iter()
        .map(|c| {
            let a = amps[c.index()];
            overlap += a.conj() * g[c.index()];
            norm += a.norm_sqr();
            (overlap.norm_sqr() / (norm * gnorm)).clamp(0.0, 1.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdiag::lanczos_extremes;
    use crate::hamiltonian::{build_hamiltonian, HeisenbergSpec};
    use crate::lattice::build_lattice;
    use crate::peps::{init_peps, itebd_evolve, peps_to_statevector, EvolutionSchedule};

    struct Table(Vec<f64>, usize);

    impl Wavefunction for Table {
        fn num_sites(&self) -> usize {
            self.1
        }
        fn amplitude(&self, c: SpinConfiguration) -> Complex64 {
            Complex64::new(self.0[c.index()], 0.0)
        }
    }

    #[test]
    fn truncation_curve_matches_extracted_trials() {
        let spec = HeisenbergSpec::new(2, 2, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let ed = lanczos_extremes(&h, 1e-12, 500, 0).unwrap();
        let mut p = init_peps(&spec.geometry, 2, 5).unwrap();
        itebd_evolve(&mut p, &spec, &EvolutionSchedule::uniform(&[0.1], 20).unwrap()).unwrap();
        let (sv, _) = peps_to_statevector(&p).unwrap();
        let wf = DenseAmplitudes::new(&sv);
        let records = enumerate_records(&wf).unwrap();
        let curve = truncation_fidelities(&sv, &ed.ground_vector, 16).unwrap();
        for m in [1, 3, 6, 16] {
            let trial = extract_trial_state(&records, &wf, m).unwrap();
            let f = fidelity(&trial, &ed.ground_vector).unwrap();
            assert!((curve[m - 1] - f).abs() < 1e-12, "M={m}");
        }
        assert!((curve[15] - fidelity(&sv, &ed.ground_vector).unwrap()).abs() < 1e-12);
        assert!(truncation_fidelities(&sv, &ed.ground_vector, 17).is_err());
    }

    #[test]
    fn acceptance_rule() {
        assert!(accept(1.0, 0.999_999));
        assert!(accept(2.0, 0.0));
        assert!(!accept(0.0, 0.0));
        assert!(!accept(0.5, 0.5));
        assert!(accept(0.5, 0.49));
    }

    #[test]
    fn detailed_balance_two_configs() {
        // P(a -> b) = q min(1, pi_b / pi_a) with r uniform on [0, 1)
        for (pa, pb) in [(0.3f64, 0.7), (0.5, 0.5), (0.9, 0.1), (1.0, 1e-9)] {
            let p_ab = (pb / pa).min(1.0);
            let p_ba = (pa / pb).min(1.0);
            assert!((pa * p_ab - pb * p_ba).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_weight_pair_always_accepted() {
        // 1x2 with W(10) = W(01), other weights zero: flips from either
        // allowed state go to a zero-weight state, exchanges always move
        let wf = Table(vec![0.0, 1.0, 1.0, 0.0], 2);
        let mut opts = ChainOptions::new(1000, 3);
        opts.move_kind = MoveKind::Exchange;
        let run = metropolis_run(&wf, &opts).unwrap();
        assert_eq!(run.accepted, run.proposed);
        assert_eq!(run.records.len(), 2);
        let flip = metropolis_run(&wf, &ChainOptions::new(1000, 3)).unwrap();
        assert_eq!(flip.accepted, 0);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let g = build_lattice(2, 2).unwrap();
        let p = init_peps(&g, 2, 1).unwrap();
        let opts = ChainOptions::new(200, 9);
        let a = metropolis_run(&p, &opts).unwrap();
        let b = metropolis_run(&p, &opts).unwrap();
        assert_eq!(a, b);
        let c = metropolis_run(&p, &ChainOptions { seed: 10, ..opts }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_wavefunction_is_degenerate() {
        let wf = Table(vec![0.0; 4], 2);
        assert!(matches!(
            metropolis_run(&wf, &ChainOptions::new(10, 0)),
            Err(Error::SamplingDegeneracy)
        ));
    }

    #[test]
    fn exchange_preserves_magnetization() {
        let g = build_lattice(2, 3).unwrap();
        let p = init_peps(&g, 2, 5).unwrap();
        let mut opts = ChainOptions::new(100, 2);
        opts.move_kind = MoveKind::Exchange;
        let run = metropolis_run(&p, &opts).unwrap();
        assert!(run.records.iter().all(|r| r.config.bits().count_ones() == 3));
    }

    #[test]
    fn merge_is_order_independent() {
        let g = build_lattice(2, 2).unwrap();
        let p = init_peps(&g, 2, 1).unwrap();
        let runs: Vec<ChainResult> = (0..3)
            .map(|s| metropolis_run(&p, &ChainOptions::new(50, s)).unwrap())
            .collect();
        let ab_c = runs[0].clone().merge(runs[1].clone()).merge(runs[2].clone());
        let c_ba = runs[2].clone().merge(runs[1].clone().merge(runs[0].clone()));
        assert_eq!(ab_c, c_ba);
        let total: u64 = ab_c.records.iter().map(|r| r.visits).sum();
        assert_eq!(total, ab_c.proposed);
    }

    #[test]
    fn default_sweep_interpolation() {
        assert_eq!(default_sweeps(8), 5000);
        assert_eq!(default_sweeps(20), 50000);
        assert_eq!(default_sweeps(14), 27500);
        assert_eq!(default_sweeps(4), 5000);
    }

    #[test]
    fn full_enumeration_reproduces_peps() {
        let g = build_lattice(2, 2).unwrap();
        let p = init_peps(&g, 3, 4).unwrap();
        let recs = enumerate_records(&p).unwrap();
        let trial = extract_trial_state(&recs, &p, 16).unwrap();
        let (sv, _) = peps_to_statevector(&p).unwrap();
        assert!((fidelity(&trial, &sv).unwrap() - 1.0).abs() < 1e-10);
        let norm: f64 = trial.entries().iter().map(|(_, c)| c.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_fidelity_nondecreasing() {
        let g = build_lattice(2, 2).unwrap();
        let p = init_peps(&g, 2, 6).unwrap();
        let recs = enumerate_records(&p).unwrap();
        let (sv, _) = peps_to_statevector(&p).unwrap();
        let mut prev = 0.0;
        for m in 1..=16 {
            let f = fidelity(&extract_trial_state(&recs, &p, m).unwrap(), &sv).unwrap();
            assert!(f >= prev - 1e-12);
            prev = f;
        }
        assert!((prev - 1.0).abs() < 1e-10);
    }

    #[test]
    fn extraction_independent_of_record_order() {
        let g = build_lattice(2, 2).unwrap();
        let p = init_peps(&g, 2, 6).unwrap();
        let mut recs = enumerate_records(&p).unwrap();
        let a = extract_trial_state(&recs, &p, 5).unwrap();
        recs.reverse();
        let b = extract_trial_state(&recs, &p, 5).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            extract_trial_state(&recs[..3], &p, 5),
            Err(Error::InsufficientSupport { requested: 5, available: 3 })
        ));
    }

    #[test]
    fn ties_broken_by_configuration() {
        let wf = Table(vec![0.5; 4], 2);
        let recs = enumerate_records(&wf).unwrap();
        let t = extract_trial_state(&recs, &wf, 2).unwrap();
        let picked: Vec<String> = t.entries().iter().map(|(c, _)| c.to_string()).collect();
        assert_eq!(picked, vec!["00", "01"]);
    }

    #[test]
    fn fidelity_basics() {
        let a = Statevector::basis(3, 1).unwrap();
        let b = Statevector::basis(3, 2).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn small_trial_beats_random_overlap() {
        let spec = HeisenbergSpec::new(4, 2, 1.0, 0.0).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let ed = lanczos_extremes(&h, 1e-10, 500, 0).unwrap();
        let mut p = init_peps(&spec.geometry, 4, 0).unwrap();
        itebd_evolve(&mut p, &spec, &EvolutionSchedule::uniform(&[0.1, 0.01], 100).unwrap()).unwrap();
        let recs = enumerate_records(&p).unwrap();
        let trial = extract_trial_state(&recs, &p, 4).unwrap();
        let f2 = fidelity(&trial, &ed.ground_vector).unwrap();
        assert!(f2 > 4.0 / 256.0, "f2 = {f2}");
    }

    #[test]
    fn stationary_distribution_on_plaquette() {
        let spec = HeisenbergSpec::new(2, 2, 1.0, 0.0).unwrap();
        let mut p = init_peps(&spec.geometry, 2, 3).unwrap();
        itebd_evolve(&mut p, &spec, &EvolutionSchedule::uniform(&[0.1], 3).unwrap()).unwrap();
        let exact = enumerate_records(&p).unwrap();
        let z: f64 = exact.iter().map(|r| r.weight).sum();
        let (sv, _) = peps_to_statevector(&p).unwrap();
        let run = metropolis_run(&DenseAmplitudes::new(&sv), &ChainOptions::new(100_000, 1)).unwrap();
        let mut tv = 0.0;
        for r in &exact {
            let seen = run
                .records
                .iter()
                .find(|x| x.config == r.config)
                .map_or(0, |x| x.visits);
            tv += (seen as f64 / run.proposed as f64 - r.weight / z).abs();
        }
        assert!(tv / 2.0 < 0.02, "total variation {}", tv / 2.0);
    }
}
