//! End-to-end runs: evolution, sampling, filtering and scoring, with every
//! intermediate artifact written to the run's output directory.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gsprep_core::costmodel::{
    fit_erf_fidelity, lambda_for_heisenberg, optimal_m, optimal_m_tabulated, CostBreakdown, CostParams,
    ErfFidelityModel, Stationarity,
};
use gsprep_core::exactdiag::EdSummary;
use gsprep_core::filter::{binomial_weights, evaluate_outcome, filter_sweep, FilterOutcome, Propagator};
use gsprep_core::peps::{init_peps, itebd_evolve, peps_to_statevector};
use gsprep_core::sampler::{
    extract_trial_state, fidelity, run_chains, truncation_fidelities, DenseAmplitudes,
};
use gsprep_core::{
    build_hamiltonian, lanczos_extremes, shift_spectrum, spectral_gap, structure_factor, LatticeGeometry,
    SparseHamiltonian, Statevector,
};
use serde::Serialize;

use crate::config::{PipelineConfig, TrialSize};
use crate::error::{CliError, CliResult, StageExt};
use crate::io::{write_json, write_peps, write_statevector, Table, TrialFile};

pub const ED_TOL: f64 = 1e-9;
pub const ED_MAX_ITER: usize = 3000;
/// Largest `M` the automatic scan considers by default.
pub const DEFAULT_M_SCAN: usize = 4096;

/// Exact reference data for a Hamiltonian.
pub fn exact_reference(h: &SparseHamiltonian) -> gsprep_core::Result<gsprep_core::EdResult> {
    lanczos_extremes(h, ED_TOL, ED_MAX_ITER, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureFactors {
    pub pi_pi: f64,
    pub pi_0: f64,
}

impl StructureFactors {
    pub fn of(state: &Statevector, geometry: &LatticeGeometry) -> gsprep_core::Result<Self> {
        Ok(StructureFactors {
            pi_pi: structure_factor(state, geometry, (PI, PI))?,
            pi_0: structure_factor(state, geometry, (PI, 0.0))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteFactors {
    pub ground: StructureFactors,
    pub filtered: StructureFactors,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub ed: f64,
    pub itebd: f64,
    pub sample: f64,
    pub filter: f64,
    pub metrics: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub m_opt: usize,
    pub m_scanned: usize,
    pub lambda: f64,
    pub gap: f64,
    /// Fitted fidelity model; absent when the fit failed and the scan
    /// used the tabulated curve.
    pub model: Option<ErfFidelityModel>,
    pub fit_rms: Option<f64>,
    pub stationarity: Vec<Stationarity>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub num_sites: usize,
    /// Per-site PEPS energy.
    pub e0: f64,
    pub stage_energies: Vec<f64>,
    pub regularizations: usize,
    pub ed: EdSummary,
    pub m_used: usize,
    pub sampled_support: usize,
    pub acceptance_rate: f64,
    /// PEPS fidelity with the exact ground state.
    pub f1: f64,
    /// Trial-state fidelity with the exact ground state.
    pub f2: f64,
    pub cost: Option<CostReport>,
    pub filter: FilterOutcome,
    pub structure_factors: SiteFactors,
    pub timings: Timings,
}

impl RunReport {
    /// Every reported number is finite.
    pub fn is_finite(&self) -> bool {
        let mut xs = vec![
            self.e0,
            self.ed.lambda0,
            self.ed.lambda_max,
            self.ed.gap,
            self.ed.residual,
            self.acceptance_rate,
            self.f1,
            self.f2,
            self.filter.p,
            self.filter.amplified_p,
            self.structure_factors.ground.pi_pi,
            self.structure_factors.ground.pi_0,
            self.structure_factors.filtered.pi_pi,
            self.structure_factors.filtered.pi_0,
        ];
        xs.extend(&self.stage_energies);
        xs.extend(self.filter.energy_error);
        xs.extend(self.filter.fidelity);
        xs.extend(self.filter.overall_overlap);
        if let Some(c) = &self.cost {
            xs.extend([c.lambda, c.gap]);
            xs.extend(c.fit_rms);
            if let Some(m) = c.model {
                xs.extend([m.g, m.a, m.e, m.h, m.beta]);
            }
            xs.extend(c.stationarity.iter().map(|s| s.gradient));
        }
        xs.iter().all(|x| x.is_finite())
    }

    /// The report with timings zeroed, for comparing reruns.
    pub fn without_timings(&self) -> Self {
        RunReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

fn cost_table(curve: &[CostBreakdown], data: &[f64], model: Option<&ErfFidelityModel>, l: usize) -> Table {
    let mut t = Table::new(["M", "f1", "f1_model", "classical", "preparation", "filter", "total"]);
    for c in curve {
        t.rows.push(vec![
            c.m as f64,
            data.get(c.m - 1).copied().unwrap_or(f64::NAN),
            model.map_or(f64::NAN, |m| m.eval(c.m as f64, l)),
            c.classical,
            c.preparation,
            c.filter,
            c.total(),
        ]);
    }
    t
}

/// Picks `M` from the cost curve of the PEPS's heaviest-`M` truncations.
pub fn choose_trial_size(
    cfg: &PipelineConfig,
    peps_state: &Statevector,
    ground: &Statevector,
    ed_gap: f64,
    out_dir: Option<&Path>,
) -> CliResult<CostReport> {
    let spec = cfg.model.spec()?;
    let l = spec.num_sites();
    let support = peps_state.amplitudes().iter().filter(|a| a.norm_sqr() > 0.0).count();
    let cap = cfg.cost.m_max.unwrap_or(DEFAULT_M_SCAN.min(1 << l.min(62)));
    let m_max = cap.min(support);
    let data = truncation_fidelities(peps_state, ground, m_max).stage("cost")?;
    let lambda = match cfg.cost.lambda {
        Some(x) => x,
        None => lambda_for_heisenberg(&spec).stage("cost")?,
    };
    let mut params = CostParams::new(cfg.peps.bond_dim, lambda, ed_gap);
    params.classical_weight = cfg.cost.classical_weight;
    let points: Vec<(f64, f64)> = data.iter().enumerate().map(|(i, &f)| ((i + 1) as f64, f)).collect();
    let fitted = fit_erf_fidelity(&points);
    let report = match fitted {
        Ok((model, fit)) if model.eval(1.0, l) > 0.0 => {
            let scan = optimal_m(l, &model, &params, m_max).stage("cost")?;
            if let Some(dir) = out_dir {
                cost_table(&scan.curve, &data, Some(&model), l).write(&dir.join("cost_curve.csv"))?;
            }
            CostReport {
                m_opt: scan.m_opt,
                m_scanned: m_max,
                lambda,
                gap: ed_gap,
                model: Some(model),
                fit_rms: Some(fit.rms),
                stationarity: scan.stationarity,
            }
        }
        other => {
            if let Err(e) = other {
                log::warn!("fidelity fit failed ({e}); scanning the tabulated curve");
            }
            let (m_opt, curve) = optimal_m_tabulated(l, &data, &params).stage("cost")?;
            if let Some(dir) = out_dir {
                cost_table(&curve, &data, None, l).write(&dir.join("cost_curve.csv"))?;
            }
            CostReport {
                m_opt,
                m_scanned: m_max,
                lambda,
                gap: ed_gap,
                model: None,
                fit_rms: None,
                stationarity: Vec::new(),
            }
        }
    };
    Ok(report)
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs every stage and writes `peps.gspp`, `trial.json`, `outcome.json`,
/// `psi0.gspv`, `filter_curve.csv` and `report.json` (plus
/// `cost_curve.csv` when `M` is automatic) into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> CliResult<RunReport> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let spec = cfg.model.spec()?;
    let l = spec.num_sites();
    let mut timings = Timings::default();

    let t = Instant::now();
    let h = build_hamiltonian(&spec).stage("ed")?;
    let ed = exact_reference(&h).stage("ed")?;
    timings.ed = secs(t);

    let t = Instant::now();
    let mut peps = init_peps(&spec.geometry, cfg.peps.bond_dim, cfg.peps.seed).stage("itebd")?;
    let evo = itebd_evolve(&mut peps, &spec, &cfg.peps.schedule()?).stage("itebd")?;
    write_peps(&dir.join("peps.gspp"), &peps)?;
    let (peps_state, _) = peps_to_statevector(&peps).stage("itebd")?;
    timings.itebd = secs(t);
    log::info!("itebd: e0 = {:.6} per site", evo.e0);

    let t = Instant::now();
    let f1 = fidelity(&peps_state, &ed.ground_vector).stage("sample")?;
    let cost = match cfg.sampler.m {
        TrialSize::Fixed(_) => None,
        TrialSize::Auto => {
            let gap = match cfg.cost.gap {
                Some(g) => g,
                None => spectral_gap(&ed).stage("cost")?,
            };
            Some(choose_trial_size(cfg, &peps_state, &ed.ground_vector, gap, Some(dir))?)
        }
    };
    let wf = DenseAmplitudes::new(&peps_state);
    let opts = cfg.sampler.chain_options(l);
    let chains = run_chains(&wf, &opts, cfg.sampler.chains).stage("sample")?;
    let support = chains.records.len();
    let m_used = match (cfg.sampler.m, &cost) {
        (TrialSize::Fixed(m), _) => m,
        (TrialSize::Auto, Some(c)) => {
            if c.m_opt > support {
                log::warn!("M = {} exceeds the {support} sampled configurations", c.m_opt);
            }
            c.m_opt.min(support)
        }
        (TrialSize::Auto, None) => unreachable!(),
    };
    let trial = extract_trial_state(&chains.records, &wf, m_used).stage("sample")?;
    write_json(
        &dir.join("trial.json"),
        &TrialFile::new(&trial, opts.sweeps, chains.acceptance_rate()),
    )?;
    let f2 = fidelity(&trial, &ed.ground_vector).stage("sample")?;
    timings.sample = secs(t);

    let t = Instant::now();
    let params = cfg.filter.params()?;
    let lower = if cfg.filter.exact_shift { ed.lambda0 } else { evo.e0 * l as f64 };
    let hs = shift_spectrum(&h, lower, ed.lambda_max).stage("filter")?;
    let prop = Propagator::new(&hs).stage("filter")?;
    let weights = (1..=params.n)
        .map(|n| {
            if n == params.n {
                params.weights()
            } else {
                binomial_weights(n, params.m0.min(n))
            }
        })
        .collect::<gsprep_core::Result<Vec<_>>>()
        .stage("filter")?;
    let outcomes = filter_sweep(&prop, &trial, &weights, params.rounds).stage("filter")?;
    let mut curve = Table::new(["m", "p", "energy_error", "fidelity", "overall_overlap"]);
    let mut scored = Vec::with_capacity(outcomes.len());
    for (n, o) in (1..).zip(outcomes) {
        let o = evaluate_outcome(o, &h, &ed).stage("filter")?;
        curve.rows.push(vec![
            (2 * n) as f64,
            o.p,
            o.energy_error.unwrap_or(f64::NAN),
            o.fidelity.unwrap_or(f64::NAN),
            o.overall_overlap.unwrap_or(f64::NAN),
        ]);
        scored.push(o);
    }
    let outcome = scored.pop().expect("at least one filter degree");
    curve.write(&dir.join("filter_curve.csv"))?;
    write_json(&dir.join("outcome.json"), &outcome)?;
    write_statevector(&dir.join("psi0.gspv"), &outcome.psi0)?;
    timings.filter = secs(t);

    let t = Instant::now();
    let structure_factors = SiteFactors {
        ground: StructureFactors::of(&ed.ground_vector, &spec.geometry).stage("metrics")?,
        filtered: StructureFactors::of(&outcome.psi0, &spec.geometry).stage("metrics")?,
    };
    timings.metrics = secs(t);

    let report = RunReport {
        config_hash: cfg.hash(),
        num_sites: l,
        e0: evo.e0,
        stage_energies: evo.stage_energies,
        regularizations: evo.regularizations,
        ed: ed.summary(),
        m_used,
        sampled_support: support,
        acceptance_rate: chains.acceptance_rate(),
        f1,
        f2,
        cost,
        filter: outcome,
        structure_factors,
        timings,
    };
    if !report.is_finite() {
        return Err(CliError::Stage {
            stage: "metrics",
            source: gsprep_core::Error::Domain("run report contains non-finite values".into()),
        });
    }
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionRow {
    pub ratio: f64,
    pub ed: StructureFactors,
    pub pipeline: StructureFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionScan {
    pub rows: Vec<TransitionRow>,
    /// Ratio where `m^2(pi, pi)` falls below `m^2(pi, 0)` on exact states.
    pub ed_crossing: Option<f64>,
    pub pipeline_crossing: Option<f64>,
}

impl TransitionScan {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["ratio", "ed_pi_pi", "ed_pi_0", "pipeline_pi_pi", "pipeline_pi_0"]);
        for r in &self.rows {
            t.rows.push(vec![r.ratio, r.ed.pi_pi, r.ed.pi_0, r.pipeline.pi_pi, r.pipeline.pi_0]);
        }
        t
    }
}

/// First ratio at which `a - b` changes sign from positive, linearly
/// interpolated.
pub fn crossing(points: &[(f64, f64, f64)]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (x0, d0) = (w[0].0, w[0].1 - w[0].2);
        let (x1, d1) = (w[1].0, w[1].1 - w[1].2);
        (d0 > 0.0 && d1 <= 0.0).then(|| x0 + (x1 - x0) * d0 / (d0 - d1))
    })
}

/// Runs the pipeline at each `J2 / J1` ratio (each in its own
/// subdirectory) and tabulates the two structure factors.
pub fn scan_transition(cfg: &PipelineConfig, ratios: &[f64]) -> CliResult<TransitionScan> {
    if ratios.is_empty() {
        return Err(CliError::config("no ratios to scan"));
    }
    let mut rows = Vec::with_capacity(ratios.len());
    for &r in ratios {
        let mut c = cfg.clone();
        c.model.j2 = r * cfg.model.j1;
        c.output_dir = ratio_dir(&cfg.output_dir, r);
        let rep = run_pipeline(&c)?;
        rows.push(TransitionRow {
            ratio: r,
            ed: rep.structure_factors.ground,
            pipeline: rep.structure_factors.filtered,
        });
    }
    let ed: Vec<_> = rows.iter().map(|r| (r.ratio, r.ed.pi_pi, r.ed.pi_0)).collect();
    let pipe: Vec<_> = rows.iter().map(|r| (r.ratio, r.pipeline.pi_pi, r.pipeline.pi_0)).collect();
    Ok(TransitionScan {
        ed_crossing: crossing(&ed),
        pipeline_crossing: crossing(&pipe),
        rows,
    })
}

fn ratio_dir(base: &Path, r: f64) -> PathBuf {
    base.join(format!("ratio_{r:.4}"))
}

/// Fixed-width histogram of `|amplitude|^2` as `(bin_lower, count)`; the
/// bins cover `[0, max]`.
pub fn emit_histogram(state: &Statevector, width: f64) -> CliResult<Table> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(CliError::config("bin width must be positive"));
    }
    if state.num_sites() > 20 {
        return Err(CliError::Core(gsprep_core::Error::Capacity {
            what: "histogram sites",
            requested: state.num_sites(),
            limit: 20,
        }));
    }
    let w: Vec<f64> = state.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let max = w.iter().copied().fold(0.0, f64::max);
    let bins = (max / width).floor() as usize + 1;
    let mut counts = vec![0u64; bins];
    for x in w {
        counts[((x / width).floor() as usize).min(bins - 1)] += 1;
    }
    let mut t = Table::new(["bin_lower", "count"]);
    t.rows = counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| vec![i as f64 * width, c as f64])
        .collect();
    Ok(t)
}

/// Cumulative weight of the heaviest `M` components, `M = 1..=2^L`.
pub fn cumulative_weights(state: &Statevector) -> Vec<f64> {
    let mut w: Vec<f64> = state.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    w.into_iter()
        .map(|x| {
            acc += x;
            acc / total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsprep_core::Complex64;

    #[test]
    fn crossing_interpolates() {
        let pts = [(0.0, 1.0, 0.0), (0.5, 0.6, 0.4), (1.0, 0.2, 0.8)];
        assert!((crossing(&pts).unwrap() - 0.5 - 0.5 * 0.2 / 0.8).abs() < 1e-12);
        assert_eq!(crossing(&pts[..1]), None);
        assert_eq!(crossing(&[(0.0, 0.0, 1.0), (1.0, 0.0, 1.0)]), None);
    }

    #[test]
    fn uniform_state_fills_one_bin() {
        let v = vec![Complex64::new(0.25, 0.0); 16];
        let s = Statevector::new(4, v).unwrap();
        let t = emit_histogram(&s, 1e-5).unwrap();
        let occupied: Vec<_> = t.rows.iter().filter(|r| r[1] > 0.0).collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(occupied[0][1], 16.0);
    }

    #[test]
    fn histogram_counts_sum_to_dimension() {
        let v: Vec<Complex64> = (0..64).map(|i| Complex64::new((i as f64).sin(), 0.1)).collect();
        let mut s = Statevector::new(6, v).unwrap();
        s.normalize().unwrap();
        let t = emit_histogram(&s, 1e-3).unwrap();
        assert_eq!(t.rows.iter().map(|r| r[1]).sum::<f64>(), 64.0);
        assert_eq!(t.rows[0][0], 0.0);
        assert!(emit_histogram(&s, 0.0).is_err());
        let c = cumulative_weights(&s);
        assert!((c[63] - 1.0).abs() < 1e-12);
        assert!(c.windows(3).all(|w| w[1] >= w[0] && w[1] - w[0] >= w[2] - w[1] - 1e-15));
    }
}
