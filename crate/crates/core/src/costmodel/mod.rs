//! Scaling analysis: fidelity model, exponent fits, the total-cost
//! curve and its optimal number of trial components.

mod fit;

pub use fit::{
    fit_alpha, fit_erf_fidelity, fit_gamma, levenberg_marquardt, resolve_beta, BetaResolution,
    ErfFidelityModel, ExponentialFit, FitReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::hamiltonian::HeisenbergSpec;

/// Coefficient 1-norm of the Hamiltonian, the base cost of simulating it.
pub fn lambda_for_heisenberg(spec: &HeisenbergSpec) -> Result<f64> {
    spec.validate()?;
    let g = &spec.geometry;
    Ok(spec.j1.abs() * g.nn_bonds().len() as f64 + spec.j2.abs() * g.nnn_bonds().len() as f64)
}

/// Inputs to the quantum PEPS preparation cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PepsPrep {
    pub num_vertices: usize,
    pub num_edges: usize,
    /// Largest condition number among the PEPS projectors.
    pub kappa: f64,
    pub eps: f64,
    pub k: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub bond_dim: usize,
    pub lambda_cost: f64,
    pub gap: f64,
    /// Relative weight of the classical `M D^6 L` term. The plain cost
    /// formula has weight 1.
    #[serde(default = "unit")]
    pub classical_weight: f64,
    #[serde(default)]
    pub peps_prep: Option<PepsPrep>,
}

fn unit() -> f64 {
    1.0
}

impl CostParams {
    pub fn new(bond_dim: usize, lambda_cost: f64, gap: f64) -> Self {
        CostParams {
            bond_dim,
            lambda_cost,
            gap,
            classical_weight: 1.0,
            peps_prep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if self.bond_dim == 0 || !ok(self.lambda_cost) || !ok(self.gap) || !ok(self.classical_weight) {
            return Err(Error::invalid("cost parameters must be positive and finite"));
        }
        Ok(())
    }

    fn d6(&self) -> f64 {
        (self.bond_dim as f64).powi(6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub m: usize,
    pub f1: f64,
    /// `M D^6 L`, times the classical weight.
    pub classical: f64,
    /// `M L / |phi_0|`.
    pub preparation: f64,
    /// `Lambda / (Delta |phi_0|)`.
    pub filter: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.classical + self.preparation + self.filter
    }
}

/// Model cost of preparing the ground state from an `m`-component trial
/// state on `l` sites, with `|phi_0| = sqrt(f_1(m, l))`.
pub fn total_cost(m: usize, l: usize, model: &ErfFidelityModel, params: &CostParams) -> Result<CostBreakdown> {
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    params.validate()?;
    let f1 = model.eval(m as f64, l);
    cost_with_fidelity(m, l, f1, params)
}

fn cost_with_fidelity(m: usize, l: usize, f1: f64, params: &CostParams) -> Result<CostBreakdown> {
    if !(f1 > 0.0) {
        return Err(Error::Domain(format!("f1({m}) = {f1} has no positive overlap")));
    }
    let overlap = f1.sqrt();
    let (mf, lf) = (m as f64, l as f64);
    Ok(CostBreakdown {
        m,
        f1,
        classical: params.classical_weight * mf * params.d6() * lf,
        preparation: mf * lf / overlap,
        filter: params.lambda_cost / (params.gap * overlap),
    })
}

/// `dT/dM` of the continuous cost curve.
pub fn cost_gradient(m: f64, l: usize, model: &ErfFidelityModel, params: &CostParams) -> f64 {
    let f = model.eval(m, l);
    let df = model.derivative(m, l);
    let lf = l as f64;
    params.classical_weight * params.d6() * lf + lf / f.sqrt()
        - (m * lf + params.lambda_cost / params.gap) * df / (2.0 * f.powf(1.5))
}

/// `M - [(f^{3/2} D^6 + f) / f' - Lambda / L]`: the stationarity condition
/// in its reduced form. It drops terms, so it is only a diagnostic.
pub fn reduced_stationarity_residual(m: f64, l: usize, model: &ErfFidelityModel, params: &CostParams) -> f64 {
    let f = model.eval(m, l);
    let df = model.derivative(m, l);
    if df == 0.0 {
        return f64::INFINITY;
    }
    let rhs = (f.powf(1.5) * params.classical_weight * params.d6() + f) / df - params.lambda_cost / l as f64;
    m - rhs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stationarity {
    pub m: usize,
    pub gradient: f64,
    pub reduced_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalM {
    pub m_opt: usize,
    pub curve: Vec<CostBreakdown>,
    /// Diagnostics at `M_opt - 1`, `M_opt`, `M_opt + 1` (where in range).
    pub stationarity: Vec<Stationarity>,
}

impl OptimalM {
    pub fn cost(&self) -> f64 {
        self.curve[self.m_opt - 1].total()
    }
}

/// Scans `M = 1..=m_max` and returns the cheapest (the smallest on ties).
pub fn optimal_m(l: usize, model: &ErfFidelityModel, params: &CostParams, m_max: usize) -> Result<OptimalM> {
    if m_max == 0 {
        return Err(Error::invalid("m_max must be at least 1"));
    }
    if l < usize::BITS as usize - 1 && m_max > 1usize << l {
        return Err(Error::invalid(format!("m_max = {m_max} exceeds 2^{l}")));
    }
    params.validate()?;
    let curve: Vec<CostBreakdown> = (1..=m_max)
        .into_par_iter()
        .map(|m| total_cost(m, l, model, params))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, c) in curve.iter().enumerate() {
        if c.total() < curve[best].total() {
            best = i;
        }
    }
    let m_opt = best + 1;
    let stationarity = (m_opt.saturating_sub(1).max(1)..=(m_opt + 1).min(m_max))
        .map(|m| Stationarity {
            m,
            gradient: cost_gradient(m as f64, l, model, params),
            reduced_residual: reduced_stationarity_residual(m as f64, l, model, params),
        })
        .collect();
    Ok(OptimalM {
        m_opt,
        curve,
        stationarity,
    })
}

/// Scan over a tabulated fidelity curve `f1[m - 1]` instead of a model.
pub fn optimal_m_tabulated(l: usize, f1: &[f64], params: &CostParams) -> Result<(usize, Vec<CostBreakdown>)> {
    if f1.is_empty() {
        return Err(Error::invalid("empty fidelity table"));
    }
    params.validate()?;
    let curve: Vec<CostBreakdown> = f1
        .iter()
        .enumerate()
        .map(|(i, &f)| cost_with_fidelity(i + 1, l, f, params))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, c) in curve.iter().enumerate() {
        if c.total() < curve[best].total() {
            best = i;
        }
    }
    Ok((best + 1, curve))
}

/// Cost ratio of a random trial state to ours: `2^{(1 - log2(gamma beta)) L / 2}`.
pub fn speedup_ratio(l: usize, gamma: f64, beta: f64) -> Result<f64> {
    if !(gamma > 0.0 && beta > 0.0) {
        return Err(Error::invalid("gamma and beta must be positive"));
    }
    Ok(2f64.powf((1.0 - (gamma * beta).log2()) * l as f64 / 2.0))
}

/// Whether the scaling beats a random trial state asymptotically.
pub fn has_speedup(gamma: f64, beta: f64) -> bool {
    gamma * beta < 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFits {
    pub gamma: ExponentialFit,
    pub alpha: Option<ExponentialFit>,
    pub beta: f64,
    /// `log2(gamma beta)`.
    pub delta: f64,
    /// `beta / gamma`, to set against the fitted `alpha`.
    pub beta_over_gamma: f64,
    pub speedup: bool,
}

impl ScalingFits {
    pub fn new(gamma: ExponentialFit, alpha: Option<ExponentialFit>, beta: f64) -> Self {
        let g = gamma.base;
        ScalingFits {
            delta: (g * beta).log2(),
            beta_over_gamma: beta / g,
            speedup: has_speedup(g, beta),
            gamma,
            alpha,
            beta,
        }
    }

    /// RMS residuals of the fits, `(gamma, alpha)`.
    pub fn residuals(&self) -> (f64, Option<f64>) {
        (self.gamma.rms, self.alpha.as_ref().map(|a| a.rms))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreparationCosts {
    pub ours: f64,
    pub random: f64,
    pub peps: f64,
}

/// Model costs of the three trial-state preparations for `m` components
/// on `l` sites, given the trial overlap exponent `alpha` and the PEPS
/// overlap exponent `beta`.
pub fn compare_preparations(l: usize, m: usize, alpha: f64, beta: f64, params: &CostParams) -> Result<PreparationCosts> {
    params.validate()?;
    let prep = params
        .peps_prep
        .ok_or_else(|| Error::invalid("PEPS preparation record is missing"))?;
    if !(prep.kappa > 0.0 && prep.eps > 0.0) || prep.num_vertices == 0 || prep.num_edges == 0 {
        return Err(Error::invalid("PEPS preparation needs positive kappa, eps, |V| and |E|"));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::invalid("alpha and beta must be positive"));
    }
    let lf = l as f64;
    let filter = params.lambda_cost / params.gap;
    let row = |classical: f64, phi: f64, overlap: f64| classical + phi / overlap + filter / overlap;

    let ours = row(
        params.classical_weight * m as f64 * params.d6() * lf,
        m as f64 * lf,
        alpha.powf(-lf / 2.0),
    );
    let random = row(0.0, 1.0, 2f64.powf(-lf / 2.0));
    let (v, e) = (prep.num_vertices as f64, prep.num_edges as f64);
    let phi_peps = v * v * e * e * prep.kappa * prep.kappa / (prep.eps * params.gap)
        + v * prep.k as f64 * (prep.d as f64).powi(6);
    let peps = row(params.d6() * lf, phi_peps, beta.powf(-lf / 2.0));
    Ok(PreparationCosts { ours, random, peps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErfCheck {
    pub exact: f64,
    pub approx: f64,
    pub rel_error: f64,
}

/// Compares `erf(x)` with the rectangle estimate `(2/sqrt(pi)) x e^{-x^2}`.
pub fn erf_small_x_check(x: f64) -> Result<ErfCheck> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::invalid(format!("x = {x} outside (0, 1)")));
    }
    let exact = erf(x);
    let approx = 2.0 / std::f64::consts::PI.sqrt() * x * (-x * x).exp();
    Ok(ErfCheck {
        exact,
        approx,
        rel_error: (exact - approx).abs() / exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ErfFidelityModel {
        ErfFidelityModel {
            g: 0.5,
            a: 0.05,
            e: -0.2,
            h: 0.5,
            beta: 1.0,
        }
    }

    #[test]
    fn lambda_counts_bonds() {
        let s = HeisenbergSpec::new(1, 2, 1.0, 0.0).unwrap();
        assert_eq!(lambda_for_heisenberg(&s).unwrap(), 1.0);
        let s = HeisenbergSpec::new(4, 2, 1.0, 0.5).unwrap();
        assert_eq!(lambda_for_heisenberg(&s).unwrap(), 13.0);
        let d = HeisenbergSpec::new(4, 2, 2.0, 1.0).unwrap();
        assert_eq!(lambda_for_heisenberg(&d).unwrap(), 26.0);
    }

    #[test]
    fn unit_fidelity_cost_identity() {
        let flat = ErfFidelityModel {
            g: 0.0,
            h: 1.0,
            ..model()
        };
        let p = CostParams::new(3, 7.0, 0.5);
        for m in [1, 5, 40] {
            let c = total_cost(m, 8, &flat, &p).unwrap();
            let want = m as f64 * 729.0 * 8.0 + m as f64 * 8.0 + 14.0;
            assert_eq!(c.total(), want);
        }
    }

    #[test]
    fn total_is_sum_of_terms() {
        let p = CostParams::new(2, 3.0, 0.25);
        let c = total_cost(6, 8, &model(), &p).unwrap();
        let phi = model().eval(6.0, 8).sqrt();
        assert_eq!(c.classical, 6.0 * 64.0 * 8.0);
        assert_eq!(c.preparation, 48.0 / phi);
        assert_eq!(c.filter, 12.0 / phi);
        assert_eq!(c.total(), c.classical + c.preparation + c.filter);
    }

    #[test]
    fn zero_fidelity_is_a_domain_error() {
        let dead = ErfFidelityModel {
            g: 0.0,
            h: 0.0,
            ..model()
        };
        let p = CostParams::new(2, 1.0, 1.0);
        assert!(matches!(total_cost(1, 8, &dead, &p), Err(Error::Domain(_))));
        assert!(total_cost(0, 8, &model(), &p).is_err());
    }

    #[test]
    fn classical_term_dominates_when_saturated() {
        let p = CostParams::new(4, 10.0, 0.5);
        let c = total_cost(256, 8, &model(), &p).unwrap();
        assert!(c.classical > 100.0 * (c.preparation + c.filter));
    }

    #[test]
    fn interior_minimum_matches_calculus() {
        // T(M) = c M + K / sqrt(f(M)); with g erf small the minimum is interior
        let m = ErfFidelityModel {
            g: 0.5,
            a: 0.02,
            e: -1.0,
            h: 0.5,
            beta: 1.0,
        };
        let mut p = CostParams::new(1, 2.0e4, 1.0);
        p.classical_weight = 1.0;
        let r = optimal_m(8, &m, &p, 256).unwrap();
        assert!(r.m_opt > 1 && r.m_opt < 256, "m_opt {}", r.m_opt);
        // continuous root of dT/dM by bisection
        let (mut lo, mut hi) = (1.0, 256.0);
        assert!(cost_gradient(lo, 8, &m, &p) < 0.0 && cost_gradient(hi, 8, &m, &p) > 0.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cost_gradient(mid, 8, &m, &p) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((r.m_opt as f64 - lo).abs() <= 1.0, "{} vs {lo}", r.m_opt);
        let at = |k: usize| r.stationarity.iter().find(|s| s.m == k).unwrap().gradient.abs();
        assert!(at(r.m_opt) < at(r.m_opt - 1) && at(r.m_opt) < at(r.m_opt + 1));
    }

    #[test]
    fn huge_lambda_pushes_to_boundary() {
        let p = CostParams::new(1, 1e30, 1.0);
        let r = optimal_m(8, &model(), &p, 50).unwrap();
        assert_eq!(r.m_opt, 50);
        assert_eq!(r.curve.len(), 50);
        assert!(optimal_m(3, &model(), &p, 9).is_err());
    }

    #[test]
    fn ties_pick_smallest() {
        let flat = ErfFidelityModel {
            g: 0.0,
            h: 1.0,
            ..model()
        };
        let p = CostParams {
            classical_weight: 1e-300,
            ..CostParams::new(1, 1.0, 1.0)
        };
        let (m, _) = optimal_m_tabulated(4, &[1.0, 1.0, 1.0], &p).unwrap();
        assert_eq!(m, 1);
        assert_eq!(optimal_m(4, &flat, &p, 10).unwrap().m_opt, 1);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = CostParams::new(2, 50.0, 0.3);
        let m = model();
        for x in [3.0, 10.0, 25.0] {
            let h = 1e-5;
            let t = |x: f64| {
                let f = m.eval(x, 8);
                p.d6() * x * 8.0 + x * 8.0 / f.sqrt() + 50.0 / (0.3 * f.sqrt())
            };
            let fd = (t(x + h) - t(x - h)) / (2.0 * h);
            let g = cost_gradient(x, 8, &m, &p);
            assert!((fd - g).abs() < 1e-5 * g.abs().max(1.0), "{fd} vs {g}");
        }
    }

    #[test]
    fn speedup_ratio_properties() {
        assert!((speedup_ratio(13, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let r = speedup_ratio(20, 1.04, 1.24).unwrap();
        let exp = (1.0 - (1.04f64 * 1.24).log2()) * 10.0;
        assert!((r.log2() - exp).abs() < 1e-12);
        let r10 = speedup_ratio(10, 1.1, 1.3).unwrap();
        assert!((speedup_ratio(20, 1.1, 1.3).unwrap() - r10 * r10).abs() < 1e-9);
        assert!(has_speedup(1.04, 1.24) && !has_speedup(1.5, 1.5));
        assert!(speedup_ratio(4, 0.0, 1.0).is_err());
    }

    #[test]
    fn reference_exponents_give_delta() {
        let g = ExponentialFit {
            base: 1.04,
            a: 1.0,
            e: 0.0,
            rms: 0.0,
        };
        let s = ScalingFits::new(g, None, 1.24);
        assert!((1.04 * 1.24 - 1.29f64).abs() < 0.005);
        assert!((s.delta - (1.2896f64).log2()).abs() < 1e-12);
        assert!((0.5 * s.delta - 0.185).abs() < 0.005);
        assert!(s.speedup);
    }

    fn prep_params() -> CostParams {
        CostParams {
            peps_prep: Some(PepsPrep {
                num_vertices: 8,
                num_edges: 10,
                kappa: 2.0,
                eps: 1e-4,
                k: 4,
                d: 2,
            }),
            ..CostParams::new(2, 10.0, 0.5)
        }
    }

    #[test]
    fn random_equivalent_overlap_is_no_cheaper() {
        let c = compare_preparations(12, 4, 2.0, 2.0, &prep_params()).unwrap();
        assert!(c.ours >= c.random);
    }

    #[test]
    fn peps_row_quadratic_in_kappa() {
        let mut p = prep_params();
        let base = compare_preparations(8, 4, 1.2, 1.3, &p).unwrap().peps;
        p.peps_prep.as_mut().unwrap().kappa *= 2.0;
        let doubled = compare_preparations(8, 4, 1.2, 1.3, &p).unwrap().peps;
        p.peps_prep.as_mut().unwrap().kappa *= 2.0;
        let quad = compare_preparations(8, 4, 1.2, 1.3, &p).unwrap().peps;
        // the kappa part quadruples with each doubling
        assert!(((quad - doubled) / (doubled - base) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn missing_peps_record_rejected() {
        let p = CostParams::new(2, 1.0, 1.0);
        assert!(compare_preparations(8, 4, 1.2, 1.3, &p).is_err());
        let mut q = prep_params();
        q.peps_prep.as_mut().unwrap().eps = 0.0;
        assert!(compare_preparations(8, 4, 1.2, 1.3, &q).is_err());
    }

    fn simpson_erf(x: f64) -> f64 {
        let n = 2000;
        let h = x / n as f64;
        let f = |t: f64| (-t * t).exp();
        let mut s = f(0.0) + f(x);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        2.0 / std::f64::consts::PI.sqrt() * s * h / 3.0
    }

    #[test]
    fn erf_check_against_quadrature() {
        for x in [0.01, 0.3, 0.5, 0.9] {
            let c = erf_small_x_check(x).unwrap();
            assert!((c.exact - simpson_erf(x)).abs() < 1e-9);
        }
        let tiny = erf_small_x_check(1e-4).unwrap();
        assert!(tiny.rel_error < 1e-7);
        let one = erf_small_x_check(0.999).unwrap();
        assert!(one.approx < one.exact);
        // the rectangle estimate loses accuracy quickly: about 16% at 0.5
        let half = erf_small_x_check(0.5).unwrap();
        assert!((half.rel_error - 0.1557).abs() < 1e-3, "{}", half.rel_error);
        assert!(erf_small_x_check(0.39).unwrap().rel_error < 0.1);
        assert!(erf_small_x_check(1.0).is_err());
    }
}
