//! Binomial weights of the cosine filter and amplitude amplification
//! bookkeeping.
//!
//! `cos^{2n}(x) = sum_{k=-n}^{n} alpha_k e^{-2ikx}` with
//! `alpha_k = 2^{-2n} C(2n, n + k)`.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported `n`.
pub const MAX_N: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LcuWeights {
    n: usize,
    m0: usize,
    /// `alpha_k` for `k = -m0..=m0`, stored at `k + m0`.
    alphas: Vec<f64>,
    alpha_s: f64,
}

impl LcuWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn alpha(&self, k: isize) -> f64 {
        let idx = k + self.m0 as isize;
        assert!(
            (0..self.alphas.len() as isize).contains(&idx),
            "k = {k} outside the kept range"
        );
        self.alphas[idx as usize]
    }

    /// `(k, alpha_k)` for `k = -m0..=m0`.
    pub fn iter(&self) -> impl Iterator<Item = (isize, f64)> + '_ {
        let m0 = self.m0 as isize;
        self.alphas.iter().enumerate().map(move |(i, &a)| (i as isize - m0, a))
    }

    pub fn alpha_s(&self) -> f64 {
        self.alpha_s
    }
}

/// `x / 2^shift` as the nearest double, for arbitrarily large `x`.
fn big_ratio(x: &BigUint, shift: u64) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits();
    let drop = bits.saturating_sub(64);
    let top = (x >> drop).to_u64().expect("at most 64 bits remain") as f64;
    let exp = drop as i64 - shift as i64;
    top * 2f64.powi(exp.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Exact `C(2n, n + k)` for `k = 0..=n`.
fn central_binomials(n: usize) -> Vec<BigUint> {
    // C(2n, n+k+1) = C(2n, n+k) (n-k) / (n+k+1); start from C(2n, 2n) = 1
    // and walk down so every division is exact
    let mut out = vec![BigUint::zero(); n + 1];
    let mut c = BigUint::one();
    out[n] = c.clone();
    for k in (0..n).rev() {
        // C(2n, n+k) = C(2n, n+k+1) (n+k+1) / (n-k)
        c = c * BigUint::from(n + k + 1) / BigUint::from(n - k);
        out[k] = c.clone();
    }
    out
}

/// Outer weights below the smallest double come out as zero.
pub fn binomial_weights(n: usize, m0: usize) -> Result<LcuWeights> {
    if n == 0 || n > MAX_N {
        return Err(Error::invalid(format!("n = {n} outside 1..={MAX_N}")));
    }
    if m0 == 0 || m0 > n {
        return Err(Error::invalid(format!("m0 = {m0} outside 1..={n}")));
    }
    let c = central_binomials(n);
    let shift = 2 * n as u64;
    let mut alphas = Vec::with_capacity(2 * m0 + 1);
    for k in (1..=m0).rev() {
        alphas.push(big_ratio(&c[k], shift));
    }
    for ck in c.iter().take(m0 + 1) {
        alphas.push(big_ratio(ck, shift));
    }
    let total: BigUint = c[0].clone() + c[1..=m0].iter().sum::<BigUint>() * 2u32;
    let alpha_s = big_ratio(&total, shift);
    Ok(LcuWeights {
        n,
        m0,
        alphas,
        alpha_s,
    })
}

/// `ceil(c / delta * ln^{3/2}(1 / (chi eps)))`, at least 1.
pub fn choose_m0(delta: f64, chi: f64, eps: f64, c: f64) -> Result<usize> {
    for (name, x) in [("delta", delta), ("chi", chi), ("eps", eps), ("c", c)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive, got {x}")));
        }
    }
    let log = (1.0 / (chi * eps)).ln().max(0.0);
    let m0 = (c / delta * log.powf(1.5)).ceil();
    Ok((m0 as usize).max(1))
}

/// Success probability after `j` amplification rounds:
/// `sin^2((2j + 1) asin(sqrt p))`.
pub fn amplitude_amplify(p: f64, j: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    if j == 0 {
        return Ok(p);
    }
    let theta = p.sqrt().asin();
    Ok(((2 * j + 1) as f64 * theta).sin().powi(2))
}

/// Rounds that bring `(2j + 1) theta` closest to `pi / 2` from below.
pub fn optimal_rounds(p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("probability {p} outside (0, 1]")));
    }
    let theta = p.sqrt().asin();
    // the nudge keeps exact angles such as p = 1/4 from rounding down
    let j = (std::f64::consts::PI / (4.0 * theta) - 0.5 + 1e-12).floor();
    Ok(j.max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom_u128(n: u128, k: u128) -> u128 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn smallest_case() {
        let w = binomial_weights(1, 1).unwrap();
        let v: Vec<f64> = w.iter().map(|(_, a)| a).collect();
        assert_eq!(v, vec![0.25, 0.5, 0.25]);
        assert_eq!(w.alpha_s(), 1.0);
    }

    #[test]
    fn partial_sum_matches_integer_oracle() {
        let w = binomial_weights(10, 3).unwrap();
        let num: u128 = (7..=13).map(|j| binom_u128(20, j)).sum();
        let expect = num as f64 / (1u128 << 20) as f64;
        assert!((w.alpha_s() - expect).abs() < 1e-15);
        for (k, a) in w.iter() {
            let e = binom_u128(20, (10 + k) as u128) as f64 / (1u128 << 20) as f64;
            assert!((a - e).abs() < 1e-16);
            assert_eq!(a, w.alpha(-k));
        }
    }

    #[test]
    fn full_range_sums_to_one() {
        for n in [1, 2, 7, 50, 300, 2000] {
            let w = binomial_weights(n, n).unwrap();
            assert!((w.alpha_s() - 1.0).abs() < 1e-12, "n = {n}");
            let s: f64 = w.iter().map(|(_, a)| a).sum();
            assert!((s - 1.0).abs() < 1e-12);
            // the outermost weights 2^{-2n} underflow once n > 511
            if n < 512 {
                assert!(w.iter().all(|(_, a)| a > 0.0));
            }
        }
        assert!(binomial_weights(40, 10).unwrap().alpha_s() < 1.0);
    }

    #[test]
    fn weights_reproduce_cosine_power() {
        let w = binomial_weights(6, 6).unwrap();
        for x in [0.0, 0.3, 0.9, 1.0] {
            let s: f64 = w.iter().map(|(k, a)| a * (2.0 * k as f64 * x).cos()).sum();
            assert!((s - x.cos().powi(12)).abs() < 1e-14);
        }
    }

    #[test]
    fn argument_guards() {
        assert!(binomial_weights(0, 0).is_err());
        assert!(binomial_weights(3, 4).is_err());
        assert!(binomial_weights(MAX_N + 1, 1).is_err());
    }

    #[test]
    fn m0_rule() {
        assert_eq!(choose_m0(1.0, 1.0, (-1.0f64).exp(), 1.0).unwrap(), 1);
        let a = choose_m0(0.1, 0.2, 1e-3, 1.0).unwrap() as f64;
        let b = choose_m0(0.05, 0.2, 1e-3, 1.0).unwrap() as f64;
        assert!((b / a - 2.0).abs() < 0.02);
        assert!(choose_m0(0.0, 0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn amplification_closed_form() {
        assert_eq!(amplitude_amplify(0.3, 0).unwrap(), 0.3);
        assert!((amplitude_amplify(1.0, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(optimal_rounds(1.0).unwrap(), 0);
        assert_eq!(optimal_rounds(0.25).unwrap(), 1);
        let j = optimal_rounds(0.04).unwrap();
        assert!(amplitude_amplify(0.04, j).unwrap() > 0.9);
    }
}
