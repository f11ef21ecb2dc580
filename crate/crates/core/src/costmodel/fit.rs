//! Nonlinear least squares for the three scaling forms.
//!
//! Every fit runs a Levenberg-Marquardt solve from five deterministic
//! starting points and keeps the lowest residual.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: Vec<f64>,
    /// Root-mean-square residual.
    pub rms: f64,
    pub iterations: usize,
    /// Residual of the best solve from each start, `NaN` where it failed.
    pub start_residuals: Vec<f64>,
}

fn sse<F: Fn(&[f64], f64) -> f64>(f: &F, p: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    let s: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - f(p, x)).powi(2)).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Damped Gauss-Newton with a central-difference Jacobian.
/// Returns the parameters, their sum of squared residuals, and the
/// number of iterations.
pub fn levenberg_marquardt<F>(f: &F, xs: &[f64], ys: &[f64], start: &[f64]) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64], f64) -> f64,
{
    let n = xs.len();
    let np = start.len();
    let mut p = start.to_vec();
    let mut cost = sse(f, &p, xs, ys);
    let mut mu = 1e-3;
    let mut iter = 0;
    while iter < MAX_ITER && cost.is_finite() && cost > 1e-30 {
        iter += 1;
        let mut jac = DMatrix::zeros(n, np);
        for j in 0..np {
            let h = 1e-7 * p[j].abs().max(1e-4);
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += h;
            lo[j] -= h;
            for i in 0..n {
                jac[(i, j)] = (f(&hi, xs[i]) - f(&lo, xs[i])) / (2.0 * h);
            }
        }
        let r = DVector::from_iterator(n, (0..n).map(|i| ys[i] - f(&p, xs[i])));
        let jtj = jac.tr_mul(&jac);
        let jtr = jac.tr_mul(&r);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let c = sse(f, &trial, xs, ys);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                let small_step = step.norm() <= 1e-14 * (1.0 + DVector::from_vec(p.clone()).norm());
                p = trial;
                cost = c;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                if rel < 1e-15 || small_step {
                    return (p, cost, iter);
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost, iter)
}

fn multi_start<F>(f: &F, xs: &[f64], ys: &[f64], starts: &[Vec<f64>], what: &str) -> Result<FitReport>
where
    F: Fn(&[f64], f64) -> f64,
{
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut start_residuals = Vec::with_capacity(starts.len());
    for s in starts {
        let (p, c, it) = levenberg_marquardt(f, xs, ys, s);
        let rms = (c / xs.len() as f64).sqrt();
        start_residuals.push(if rms.is_finite() { rms } else { f64::NAN });
        if c.is_finite() && best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((p, c, it));
        }
    }
    match best {
        Some((params, c, iterations)) => Ok(FitReport {
            params,
            rms: (c / xs.len() as f64).sqrt(),
            iterations,
            start_residuals,
        }),
        None => Err(Error::Fit {
            reason: format!("{what}: no start produced a finite residual"),
            residual: f64::INFINITY,
        }),
    }
}

fn check_points(points: &[(f64, f64)], min: usize, what: &str) -> Result<()> {
    if points.len() < min {
        return Err(Error::invalid(format!(
            "{what} needs at least {min} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite data")));
    }
    Ok(())
}

/// `f_1(M, L) = g erf(a M / beta^L + e) + h`, clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErfFidelityModel {
    pub g: f64,
    pub a: f64,
    pub e: f64,
    pub h: f64,
    pub beta: f64,
}

impl ErfFidelityModel {
    fn argument(&self, m: f64, l: usize) -> f64 {
        self.a * m / self.beta.powi(l as i32) + self.e
    }

    pub fn eval_unclipped(&self, m: f64, l: usize) -> f64 {
        self.g * erf(self.argument(m, l)) + self.h
    }

    pub fn eval(&self, m: f64, l: usize) -> f64 {
        self.eval_unclipped(m, l).clamp(0.0, 1.0)
    }

    /// `d f_1 / d M`, zero where the clip is active.
    pub fn derivative(&self, m: f64, l: usize) -> f64 {
        let v = self.eval_unclipped(m, l);
        if !(0.0..=1.0).contains(&v) {
            return 0.0;
        }
        let x = self.argument(m, l);
        self.g * 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * self.a / self.beta.powi(l as i32)
    }

    /// Re-expresses a single-size fit (where `beta = 1` and the size
    /// factor sits inside `a`) with an explicit `beta`; values at size
    /// `l` are unchanged.
    pub fn with_beta(&self, beta: f64, l: usize) -> Self {
        ErfFidelityModel {
            a: self.a * beta.powi(l as i32) / self.beta.powi(l as i32),
            beta,
            ..*self
        }
    }
}

/// Fits `g erf(a M + e) + h` to `(M, f_1)` at one size. The returned
/// model has `beta = 1`: the size factor is folded into `a`.
pub fn fit_erf_fidelity(points: &[(f64, f64)]) -> Result<(ErfFidelityModel, FitReport)> {
    check_points(points, 5, "erf fit")?;
    if points.iter().any(|&(m, f)| !(0.0..=1.0).contains(&f) || m <= 0.0) {
        return Err(Error::invalid("erf fit needs M > 0 and f1 in [0, 1]"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if hi - lo < 1e-9 {
        return Err(Error::Fit {
            reason: "flat data: erf amplitude and slope are not identifiable".into(),
            residual: 0.0,
        });
    }
    // M at which the data first reaches half its rise
    let mid = (lo + hi) / 2.0;
    let m_half = points
        .iter()
        .find(|p| p.1 >= mid)
        .map_or(xs[xs.len() / 2], |p| p.0)
        .max(1.0);
    let span = hi - lo;
    let starts = vec![
        vec![span, 1.0 / m_half, 0.0, lo],
        vec![span / 2.0, 1.0 / m_half, -1.0, mid],
        vec![span, 0.3 / m_half, 0.0, lo],
        vec![span, 3.0 / m_half, 0.0, lo],
        vec![span / 2.0, 0.5 / m_half, -0.5, mid],
    ];
    let model = |p: &[f64], m: f64| p[0] * erf(p[1] * m + p[2]) + p[3];
    let report = multi_start(&model, &xs, &ys, &starts, "erf fit")?;
    let p = &report.params;
    let fitted = ErfFidelityModel {
        g: p[0],
        a: p[1],
        e: p[2],
        h: p[3],
        beta: 1.0,
    };
    if fitted.g * fitted.a <= 0.0 {
        return Err(Error::Fit {
            reason: "fitted curve decreases in M".into(),
            residual: report.rms,
        });
    }
    Ok((fitted, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaResolution {
    /// `max_L beta_L`.
    pub beta: f64,
    /// `(L_1, L_2, beta)` for each consecutive pair of sizes.
    pub pairs: Vec<(usize, usize, f64)>,
}

/// Resolves `beta` from single-size erf fits: between sizes `L_1 < L_2`,
/// `beta = (a_1 / a_2)^{1 / (L_2 - L_1)}`; the largest pair value is kept.
pub fn resolve_beta(fits: &[(usize, ErfFidelityModel)]) -> Result<BetaResolution> {
    if fits.len() < 2 {
        return Err(Error::invalid("beta needs erf fits at two or more sizes"));
    }
    let mut sorted = fits.to_vec();
    sorted.sort_by_key(|f| f.0);
    let mut pairs = Vec::new();
    for w in sorted.windows(2) {
        let ((l1, m1), (l2, m2)) = (w[0], w[1]);
        if l1 == l2 {
            return Err(Error::invalid(format!("two fits for size {l1}")));
        }
        let a1 = m1.a / m1.beta.powi(l1 as i32);
        let a2 = m2.a / m2.beta.powi(l2 as i32);
        let b = (a1 / a2).powf(1.0 / (l2 - l1) as f64);
        pairs.push((l1, l2, b));
    }
    let beta = pairs.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    if !(beta > 1.0 && beta <= 2.0) {
        return Err(Error::Fit {
            reason: format!("beta = {beta} outside (1, 2]"),
            residual: f64::NAN,
        });
    }
    Ok(BetaResolution { beta, pairs })
}

/// `y = a q^L + e`.
fn fit_exponential(points: &[(f64, f64)], bases: &[f64], what: &str) -> Result<FitReport> {
    check_points(points, 3, what)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1e-300) {
        // a flat series fixes a = 0 and leaves the base undetermined
        return Err(Error::Fit {
            reason: format!("{what}: data are constant, the base is not identifiable"),
            residual: 0.0,
        });
    }
    // with q fixed the model is linear in (a, e): solve for a good start
    let starts: Vec<Vec<f64>> = bases
        .iter()
        .map(|&q| {
            let u: Vec<f64> = xs.iter().map(|&x| q.powf(x - x0)).collect();
            let n = u.len() as f64;
            let (su, sy) = (u.iter().sum::<f64>(), ys.iter().sum::<f64>());
            let suu: f64 = u.iter().map(|v| v * v).sum();
            let suy: f64 = u.iter().zip(&ys).map(|(a, b)| a * b).sum();
            let den = n * suu - su * su;
            let a = if den.abs() > 1e-300 { (n * suy - su * sy) / den } else { 1.0 };
            let e = (sy - a * su) / n;
            vec![a, q, e]
        })
        .collect();
    // fit in a shifted variable so `a` stays well scaled
    let model = move |p: &[f64], x: f64| p[0] * p[1].powf(x - x0) + p[2];
    let mut rep = multi_start(&model, &xs, &ys, &starts, what)?;
    if !(rep.params[1] > 0.0) {
        return Err(Error::Fit {
            reason: format!("{what}: non-positive base {}", rep.params[1]),
            residual: rep.rms,
        });
    }
    rep.params[0] /= rep.params[1].powf(x0);
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentialFit {
    /// Growth factor (`gamma`) or decay factor (`alpha`).
    pub base: f64,
    pub a: f64,
    pub e: f64,
    pub rms: f64,
}

/// `M(L) = a gamma^L + e`.
pub fn fit_gamma(points: &[(f64, f64)]) -> Result<ExponentialFit> {
    let rep = fit_exponential(points, &[1.02, 1.1, 1.3, 1.6, 2.0], "gamma fit")?;
    Ok(ExponentialFit {
        base: rep.params[1],
        a: rep.params[0],
        e: rep.params[2],
        rms: rep.rms,
    })
}

/// `f_2(L) = a / alpha^L + e`.
pub fn fit_alpha(points: &[(f64, f64)]) -> Result<ExponentialFit> {
    let rep = fit_exponential(points, &[0.98, 0.9, 0.8, 0.65, 0.5], "alpha fit")?;
    Ok(ExponentialFit {
        base: 1.0 / rep.params[1],
        a: rep.params[0],
        e: rep.params[2],
        rms: rep.rms,
    })
}
