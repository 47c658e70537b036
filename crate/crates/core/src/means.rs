//! Weighted power means `M_{λ,p}` and two inequalities relating them.
//!
//! `M_{λ,p}(x, y)` is zero whenever `xy = 0`, the weighted geometric mean at
//! `p = 0`, and `(λx^p + (1-λ)y^p)^{1/p}` otherwise. The family is increasing
//! in `p`, which is what makes the Borell-Brascamp-Lieb condition weaker as `p`
//! decreases.

use crate::error::{invalid, Error, Result};

/// Default absolute tolerance for the inequality predicates on unit-scale
/// inputs.
pub const INEQUALITY_TOL: f64 = 1e-12;

/// The pair `(λ, p)` together with the ambient dimension `n`.
///
/// Valid when `0 < λ ≤ 1/2` and `p > -1/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanParams {
    lambda: f64,
    p: f64,
    n: usize,
}

impl MeanParams {
    pub fn new(lambda: f64, p: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension n must be positive"));
        }
        if !(lambda > 0.0 && lambda <= 0.5) {
            return Err(invalid(format!("lambda must lie in (0, 1/2], got {lambda}")));
        }
        if !p.is_finite() || p <= -1.0 / n as f64 {
            return Err(invalid(format!("p must exceed -1/{n}, got {p}")));
        }
        Ok(Self { lambda, p, n })
    }

    /// `λ = 1/2` in dimension `n`.
    pub fn half(p: f64, n: usize) -> Result<Self> {
        Self::new(0.5, p, n)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.lambda, p, self.n)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.lambda, self.p, n)
    }

    /// `λ` as a reduced fraction `a/b` with `b ≤ 1000`.
    pub fn lambda_ratio(&self) -> Result<(i64, i64)> {
        rational_approx(self.lambda).ok_or_else(|| Error::Incommensurate {
            lambda: self.lambda,
            reason: "no fraction a/b with b <= 1000 matches lambda".into(),
        })
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Smallest-denominator fraction equal to `x` within `1e-12`.
pub(crate) fn rational_approx(x: f64) -> Option<(i64, i64)> {
    for den in 1..=1000_i64 {
        let num = (x * den as f64).round();
        if (num / den as f64 - x).abs() <= 1e-12 {
            let num = num as i64;
            let g = gcd(num, den).max(1);
            return Some((num / g, den / g));
        }
    }
    None
}

/// Parses `"1/2"`, `"0.5"` or `"1"` into a fraction.
pub fn parse_ratio(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| invalid(format!("bad fraction {s:?}")))?;
        let b: f64 = b.trim().parse().map_err(|_| invalid(format!("bad fraction {s:?}")))?;
        if b == 0.0 {
            return Err(invalid(format!("zero denominator in {s:?}")));
        }
        Ok(a / b)
    } else {
        s.parse().map_err(|_| invalid(format!("bad number {s:?}")))
    }
}

/// `M_{λ,p}(x, y)` for any weight `λ ∈ [0, 1]` and finite `p`.
///
/// Evaluated as `m · exp(r)` with `m = max(x, y)`, so the result is
/// homogeneous to rounding. For small `|p|·|log ratio|` the exponent `r` is
/// formed with `expm1`/`ln_1p`, which keeps the family continuous through the
/// geometric mean at `p = 0`.
pub fn power_mean(lambda: f64, p: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    if x == y {
        return x;
    }
    let m = x.max(y);
    let a = (x / m).ln();
    let b = (y / m).ln();
    let mu = 1.0 - lambda;
    let r = if p == 0.0 {
        lambda * a + mu * b
    } else if p.abs() * a.abs().max(b.abs()) < 0.5 {
        (lambda * (p * a).exp_m1() + mu * (p * b).exp_m1()).ln_1p() / p
    } else {
        log_add_exp(lambda.ln() + p * a, mu.ln() + p * b) / p
    };
    m * r.exp()
}

fn log_add_exp(u: f64, v: f64) -> f64 {
    if u == f64::NEG_INFINITY {
        return v;
    }
    if v == f64::NEG_INFINITY {
        return u;
    }
    let hi = u.max(v);
    hi + (-(u - v).abs()).exp().ln_1p()
}

/// `M_{λ,p}(x, y)` with the parameters taken from `params`.
pub fn p_mean(params: &MeanParams, x: f64, y: f64) -> f64 {
    power_mean(params.lambda, params.p, x, y)
}

/// Order-preserving surrogate for `M_{λ,p}`: `λκ(x) + (1-λ)κ(y)` is increasing
/// in `M_{λ,p}(x, y)` for positive `x, y`, where `κ(t) = (t^p - 1)/p` (and
/// `ln t` at `p = 0`). Lets kernels compare means with one multiply-add.
pub(crate) fn mean_key(p: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        t.ln()
    } else {
        (p * t.ln()).exp_m1() / p
    }
}

/// Inverse of [`mean_key`].
pub(crate) fn mean_key_inv(p: f64, k: f64) -> f64 {
    if p == 0.0 {
        k.exp()
    } else {
        let s = p * k;
        if s <= -1.0 {
            // Only reachable for p > 0; the mean is zero there.
            return 0.0;
        }
        (s.ln_1p() / p).exp()
    }
}

/// `q = p / (1 + np)`, the exponent obtained after integrating out `n`
/// fiber dimensions.
pub fn exponent_map(p: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("dimension n must be positive"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let denom = 1.0 + n as f64 * p;
    if !(denom > 0.0) {
        return Err(invalid(format!("exponent map needs p > -1/{n}, got {p}")));
    }
    Ok(p / denom)
}

/// Both sides of an inequality `lhs ≥ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl Margin {
    pub(crate) fn new(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, margin: lhs - rhs }
    }

    /// `margin ≥ -tol · max(1, |lhs|, |rhs|)`.
    pub fn holds(&self, tol: f64) -> bool {
        self.margin >= -tol * self.scale()
    }

    pub fn scale(&self) -> f64 {
        1.0_f64.max(self.lhs.abs()).max(self.rhs.abs())
    }
}

/// Compares `d/dt M_{λ,p}(t, T(t))` with `1 / M_{λ,-p}(1, 1/T'(t))` for
/// `p ∈ (-1, 0)`; the first is never smaller.
pub fn check_holder_derivative(params: &MeanParams, t: f64, tt: f64, dtdt: f64) -> Result<Margin> {
    let (lambda, p) = (params.lambda, params.p);
    if !(p > -1.0 && p < 0.0) {
        return Err(invalid(format!("derivative bound needs p in (-1, 0), got {p}")));
    }
    if !(t > 0.0 && tt > 0.0 && dtdt > 0.0) {
        return Err(invalid("t, T(t) and T'(t) must be positive"));
    }
    let mu = 1.0 - lambda;
    let inner = lambda * t.powf(p) + mu * tt.powf(p);
    let lhs = (lambda * t.powf(p - 1.0) + mu * tt.powf(p - 1.0) * dtdt) * inner.powf(1.0 / p - 1.0);
    let rhs = 1.0 / power_mean(lambda, -p, 1.0, 1.0 / dtdt);
    Ok(Margin::new(lhs, rhs))
}

/// `b·M_{λ,p}(u, v) ≥ M_{λ,q}(au, cv)` with `q = p/(1+np)`, valid whenever
/// `b^{1/n} ≥ λa^{1/n} + (1-λ)c^{1/n}`.
///
/// Accepts any `p ∈ (-1/n, 0)`; the constraint on `b` is checked to a
/// relative `1e-12`.
#[allow(clippy::too_many_arguments)]
pub fn check_pq_switch(
    lambda: f64,
    p: f64,
    n: usize,
    a: f64,
    b: f64,
    c: f64,
    u: f64,
    v: f64,
) -> Result<Margin> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(p < 0.0) {
        return Err(invalid(format!("exponent switch needs p < 0, got {p}")));
    }
    let q = exponent_map(p, n)?;
    if [a, b, c, u, v].iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid("a, b, c, u, v must be positive and finite"));
    }
    let inv_n = 1.0 / n as f64;
    let need = lambda * a.powf(inv_n) + (1.0 - lambda) * c.powf(inv_n);
    let have = b.powf(inv_n);
    if have < need * (1.0 - 1e-12) {
        return Err(invalid(format!(
            "b^(1/n) = {have} is below lambda a^(1/n) + (1-lambda) c^(1/n) = {need}"
        )));
    }
    let lhs = b * power_mean(lambda, p, u, v);
    let rhs = power_mean(lambda, q, a * u, c * v);
    Ok(Margin::new(lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(p: f64) -> MeanParams {
        MeanParams::new(0.5, p, 1).unwrap()
    }

    #[test]
    fn mean_examples() {
        assert_eq!(p_mean(&half(1.0), 2.0, 4.0), 3.0);
        let pm = MeanParams::new(0.3, -0.2, 1).unwrap();
        assert_eq!(p_mean(&pm, 5.0, 0.0), 0.0);
        assert!((p_mean(&half(0.0), 1.0, 4.0) - 2.0).abs() < 1e-15);
        assert!((p_mean(&half(-0.9), 1.0, 1.0) - 1.0).abs() == 0.0);
        // harmonic mean needs p = -1, which is only admissible as a raw mean
        assert!((power_mean(0.5, -1.0, 1.0, 1.0 / 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(MeanParams::new(0.0, 0.0, 1).is_err());
        assert!(MeanParams::new(0.6, 0.0, 1).is_err());
        assert!(MeanParams::new(0.5, -1.0, 1).is_err());
        assert!(MeanParams::new(0.5, -0.5, 2).is_err());
        assert!(MeanParams::new(0.5, -0.49, 2).is_ok());
        assert!(MeanParams::new(0.5, 0.0, 0).is_err());
    }

    #[test]
    fn ratio_recovery() {
        assert_eq!(half(0.0).lambda_ratio().unwrap(), (1, 2));
        assert_eq!(MeanParams::new(1.0 / 3.0, 0.0, 1).unwrap().lambda_ratio().unwrap(), (1, 3));
        assert!(MeanParams::new(0.5_f64.sqrt() / 2.0, 0.0, 1).unwrap().lambda_ratio().is_err());
        assert_eq!(parse_ratio("1/2").unwrap(), 0.5);
        assert_eq!(parse_ratio(" 0.25 ").unwrap(), 0.25);
        assert!(parse_ratio("1/0").is_err());
    }

    #[test]
    fn exponent_map_examples() {
        assert_eq!(exponent_map(0.0, 5).unwrap(), 0.0);
        assert_eq!(exponent_map(1.0, 1).unwrap(), 0.5);
        assert_eq!(exponent_map(-0.25, 2).unwrap(), -0.5);
        assert!(exponent_map(-0.5, 2).is_err());
        assert!(exponent_map(-1.0, 1).is_err());
    }

    #[test]
    fn holder_derivative_identity_transport_is_tight() {
        let m = check_holder_derivative(&half(-0.5), 1.0, 1.0, 1.0).unwrap();
        assert!(m.margin.abs() < 1e-15);
        let m = check_holder_derivative(&half(-0.5), 1.0, 2.0, 2.0).unwrap();
        assert!(m.margin >= 0.0, "{m:?}");
        assert!(check_holder_derivative(&half(0.5), 1.0, 1.0, 1.0).is_err());
        assert!(check_holder_derivative(&half(-0.5), 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn holder_derivative_matches_finite_differences() {
        // T(t) = 2t^2 at t = 0.7: T = 0.98, T' = 2.8
        let (lambda, p) = (0.3, -0.4);
        let mean_along = |t: f64| power_mean(lambda, p, t, 2.0 * t * t);
        let eps = 1e-6;
        let fd = (mean_along(0.7 + eps) - mean_along(0.7 - eps)) / (2.0 * eps);
        let params = MeanParams::new(lambda, p, 1).unwrap();
        let m = check_holder_derivative(&params, 0.7, 0.98, 2.8).unwrap();
        assert!((m.lhs - fd).abs() < 1e-8, "{} vs {fd}", m.lhs);
    }

    #[test]
    fn pq_switch_examples() {
        let m = check_pq_switch(0.5, -0.2, 1, 1.0, 1.0, 1.0, 2.0, 2.0).unwrap();
        assert!(m.margin.abs() < 1e-15);
        let m = check_pq_switch(0.5, -0.5, 1, 1.0, 5.0, 9.0, 1.0, 1.0).unwrap();
        assert!((m.lhs - 5.0).abs() < 1e-14);
        assert!((m.rhs - 1.8).abs() < 1e-14);
        assert!((m.margin - 3.2).abs() < 1e-14);
        // b below the Brunn-Minkowski combination of a and c
        assert!(check_pq_switch(0.5, -0.2, 1, 1.0, 4.0, 9.0, 1.0, 1.0).is_err());
        assert!(check_pq_switch(0.5, 0.2, 1, 1.0, 5.0, 9.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn continuity_through_zero() {
        for &(x, y) in &[(0.3, 7.0), (1e-3, 2.0), (5.0, 5.5)] {
            let g = power_mean(0.4, 0.0, x, y);
            for &p in &[1e-8, -1e-8] {
                assert!((power_mean(0.4, p, x, y) - g).abs() <= 1e-6 * f64::max(x, y));
            }
        }
    }

    #[test]
    fn key_is_order_preserving() {
        for &p in &[-0.4, 0.0, 1e-9, 0.7, 2.0] {
            let pairs = [(0.2, 3.0), (1.0, 1.0), (0.5, 0.9), (4.0, 0.01)];
            let mut by_mean: Vec<_> = pairs
                .iter()
                .map(|&(x, y)| (power_mean(0.5, p, x, y), 0.5 * mean_key(p, x) + 0.5 * mean_key(p, y)))
                .collect();
            by_mean.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            assert!(by_mean.windows(2).all(|w| w[0].1 <= w[1].1), "p = {p}");
            for (m, k) in by_mean {
                assert!((mean_key_inv(p, k) - m).abs() <= 1e-9 * m.max(1.0));
            }
        }
    }
}
