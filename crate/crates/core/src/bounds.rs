//! Closed-form welfare and revenue bounds for coarse correlated equilibria.
//!
//! Notation: the high bidder has value 1 and equilibrium utility `alpha`;
//! the second bidder has value `v <= 1` and utility `beta`. All logarithms
//! are natural.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Range of `alpha` on which the worst-welfare construction is certified.
pub const CERTIFIED_ALPHA: (f64, f64) = (0.27, 0.28);

/// Bracket for the stationary point of the reduced welfare curve.
pub const WELFARE_ROOT_BRACKET: (f64, f64) = (0.2, 0.35);

/// Bracket for the interior root of `2x - ln x - 2 = 0`; the other root is 1.
pub const CASE1_ROOT_BRACKET: (f64, f64) = (0.1, 0.3);

pub const ROOT_TOL: f64 = 1e-12;

/// A bound value with the parameters that produce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub value: f64,
    /// Serialized next to `value`, e.g. `{"value": .., "alpha": ..}`.
    #[serde(flatten)]
    pub args: BTreeMap<String, f64>,
    /// Root-equation residual at the returned arguments (0 for plain formulas).
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BoundResult {
    fn plain(value: f64, args: &[(&str, f64)]) -> Self {
        Self {
            value,
            args: args.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            residual: 0.0,
            warnings: vec![],
        }
    }
}

/// Bisection on `[lo, hi]` until the bracket is narrower than `tol`.
/// The endpoints must bracket a sign change.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    ensure!(
        flo.signum() != fhi.signum(),
        Construction,
        "[{lo}, {hi}] does not bracket a root (f = {flo}, {fhi})"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Mean of the envelope price distribution `min(alpha/(1-x), beta/(v-x))`
/// when the value-1 bidder binds everywhere (`beta >= v alpha`).
pub fn revenue_case1(alpha: f64) -> f64 {
    1.0 - alpha + xlogy(alpha, alpha)
}

/// Mean of the envelope price distribution when both bidders bind
/// (`beta < v alpha`).
pub fn revenue_case2(alpha: f64, beta: f64, v: f64) -> f64 {
    xlogy(alpha, (alpha - beta) / (1.0 - v)) + xlogy(beta, beta * (1.0 - v) / (v * (alpha - beta))) + 1.0 - alpha
}

/// Lower bound `alpha + beta + E[price]` on the welfare of any equilibrium
/// with these utilities.
pub fn welfare_lb(alpha: f64, beta: f64, v: f64) -> Result<f64> {
    ensure!(alpha > 0.0 && alpha <= 1.0, InvalidParameter, "alpha={alpha} outside (0, 1]");
    ensure!(beta >= 0.0, InvalidParameter, "beta={beta} must be non-negative");
    ensure!(v > 0.0 && v <= 1.0, InvalidParameter, "v={v} outside (0, 1]");
    if beta >= v * alpha {
        return Ok(alpha + beta + revenue_case1(alpha));
    }
    ensure!(v < 1.0, Singular, "v = 1 with beta < v alpha puts ln(0) in the revenue");
    Ok(alpha + beta + revenue_case2(alpha, beta, v))
}

/// Bob's utility at which the welfare lower bound is stationary in `beta`
/// once `v = 1 - alpha`.
pub fn beta_of_alpha(alpha: f64) -> f64 {
    (alpha - alpha * alpha) / (E * alpha - alpha + 1.0)
}

/// Welfare along the stationary `beta` with `v = 1 - alpha`.
pub fn welfare_case2a(alpha: f64) -> f64 {
    xlogy(alpha, E * alpha / ((E - 1.0) * alpha + 1.0)) + 1.0
}

/// Derivative of [`welfare_case2a`]; its root is the minimizer.
pub fn welfare_case2a_slope(x: f64) -> f64 {
    let d = (E - 1.0) * x + 1.0;
    (d * (E * x / d).ln() + 1.0) / d
}

/// Welfare along the case boundary `beta = alpha (1 - alpha)`.
pub fn welfare_case1(alpha: f64) -> f64 {
    1.0 + alpha * (1.0 - alpha) + xlogy(alpha, alpha)
}

pub fn case1_root_equation(x: f64) -> f64 {
    2.0 * x - x.ln() - 2.0
}

pub fn case2b_root_equation(x: f64) -> f64 {
    2.0 - 2.0 * x + x.ln()
}

/// `1 + ln(alpha beta / ((1 - alpha)(alpha - beta)))`, the `beta` partial
/// of the reduced welfare expression.
pub fn welfare_beta_slope(alpha: f64, beta: f64) -> f64 {
    1.0 + (alpha * beta / ((1.0 - alpha) * (alpha - beta))).ln()
}

/// Interior minimizer of [`welfare_case1`].
pub fn case1_minimum() -> Result<BoundResult> {
    let (lo, hi) = CASE1_ROOT_BRACKET;
    let alpha = bisect(case1_root_equation, lo, hi, ROOT_TOL)?;
    Ok(BoundResult {
        value: welfare_case1(alpha),
        args: [("alpha".to_string(), alpha)].into(),
        residual: case1_root_equation(alpha).abs(),
        warnings: vec![],
    })
}

/// The worst welfare of a no-overbidding coarse equilibrium, as a fraction
/// of the highest value. Compares the interior case against the boundary
/// case and returns the smaller.
pub fn minimize_welfare() -> Result<BoundResult> {
    let (lo, hi) = WELFARE_ROOT_BRACKET;
    let alpha = bisect(welfare_case2a_slope, lo, hi, ROOT_TOL)?;
    let beta = beta_of_alpha(alpha);
    let value = welfare_case2a(alpha);
    let boundary = case1_minimum()?;
    let mut warnings = vec![];
    ensure!(
        beta < alpha * (1.0 - alpha),
        Construction,
        "stationary beta={beta} leaves the interior case at alpha={alpha}"
    );
    if boundary.value < value {
        warnings.push(format!("boundary case {} is below the interior minimum {value}", boundary.value));
    }
    let alpha_1 = boundary.args["alpha"];
    Ok(BoundResult {
        value: value.min(boundary.value),
        args: [
            ("alpha".to_string(), alpha),
            ("beta".to_string(), beta),
            ("v".to_string(), 1.0 - alpha),
            ("q".to_string(), q_of_alpha(alpha)),
            ("crossover".to_string(), crossover(alpha)),
            ("case1_alpha".to_string(), alpha_1),
            ("case1_welfare".to_string(), boundary.value),
        ]
        .into(),
        residual: welfare_case2a_slope(alpha).abs(),
        warnings,
    })
}

/// Alice's winning probability in the worst-welfare construction.
pub fn q_of_alpha(alpha: f64) -> f64 {
    2.0 + (alpha / (1.0 + (E - 1.0) * alpha)).ln()
}

/// Price where the two envelope branches cross, `(v alpha - beta)/(alpha - beta)`
/// with `v = 1 - alpha` and the stationary `beta`.
pub fn crossover(alpha: f64) -> f64 {
    let v = 1.0 - alpha;
    let beta = beta_of_alpha(alpha);
    (v * alpha - beta) / (alpha - beta)
}

/// Simplified form of [`crossover`].
pub fn crossover_simplified(alpha: f64) -> f64 {
    (E - 1.0) * (1.0 - alpha) / E
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBounds {
    /// Alice's utility if she wins the highest-priced `q` of the mass.
    pub u_min: f64,
    /// Alice's utility if she wins the lowest-priced `q` of the mass.
    pub u_max: f64,
    pub certified: bool,
}

/// Range of utilities Alice can get while winning with probability
/// `q_of_alpha(alpha)` in the worst-welfare price distribution.
/// Outside the certified range the formulas are still evaluated but
/// `certified` is false.
pub fn u_bounds(alpha: f64) -> UtilityBounds {
    let q = q_of_alpha(alpha);
    let v = 1.0 - alpha;
    let beta = beta_of_alpha(alpha);
    let u_min = -alpha * (1.0 - q).ln();
    let u_max = q - v * q + beta - beta * (beta / (q * v)).ln();
    let certified = (CERTIFIED_ALPHA.0..=CERTIFIED_ALPHA.1).contains(&alpha);
    UtilityBounds { u_min, u_max, certified }
}

/// `1 - 2/e`, the revenue floor relative to the second-highest value.
pub fn revenue_floor() -> f64 {
    1.0 - 2.0 / E
}

/// Each bidder's utility in the worst symmetric equilibrium, `v e^{-(n-1)}`.
pub fn symmetric_alpha(n: usize, v: f64) -> f64 {
    v * (-((n - 1) as f64)).exp()
}

/// Worst revenue with `n` symmetric bidders of value `v`: `(1 - n e^{-(n-1)}) v`.
pub fn symmetric_revenue_bound(n: usize, v: f64) -> f64 {
    v - n as f64 * symmetric_alpha(n, v)
}

/// Lower bound on expected price when the high bidder (value `v >= 1`)
/// keeps at most `(1 - 1/e)(v - 1) + alpha`.
pub fn revenue_lb_rhs(alpha: f64, v: f64) -> f64 {
    let c = (1.0 - 1.0 / E) * (v - 1.0) + alpha;
    v - c + c * (c / v).ln()
}

/// `revenue_lb_rhs(alpha, v) - (1 - 2 alpha)`; positive whenever
/// `1/e < alpha <= 1` and `v >= 1`.
pub fn revenue_gap(alpha: f64, v: f64) -> f64 {
    revenue_lb_rhs(alpha, v) - (1.0 - 2.0 * alpha)
}

/// Value gap above which revenue is at least `1 - eps` times the second value.
pub fn gap_threshold(eps: f64) -> Result<f64> {
    ensure!(eps > 0.0 && eps < 1.0, InvalidParameter, "eps={eps} outside (0, 1)");
    Ok(324.0 / eps.powi(4))
}

pub fn revenue_floor_result() -> BoundResult {
    BoundResult::plain(revenue_floor(), &[])
}

pub fn symmetric_result(n: usize, v: f64) -> Result<BoundResult> {
    ensure!(n >= 2, InvalidParameter, "need n >= 2, got {n}");
    ensure!(v > 0.0 && v.is_finite(), InvalidParameter, "need v > 0, got {v}");
    Ok(BoundResult::plain(
        symmetric_revenue_bound(n, v),
        &[("n", n as f64), ("v", v), ("alpha", symmetric_alpha(n, v))],
    ))
}

pub fn gap_result(eps: f64) -> Result<BoundResult> {
    Ok(BoundResult::plain(gap_threshold(eps)?, &[("eps", eps)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welfare_floor() {
        let r = minimize_welfare().unwrap();
        assert!((r.args["alpha"] - 0.274322).abs() < 1e-4);
        assert!((r.value - 0.813559).abs() < 1e-5);
        assert!(r.residual <= 1e-10);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn case1_candidate() {
        let r = case1_minimum().unwrap();
        let x = r.args["alpha"];
        assert!((x - 0.203).abs() < 1e-3);
        assert!((r.value - 0.838).abs() < 1e-3);
        assert!(case1_root_equation(x).abs() < 1e-10);
        assert!(case2b_root_equation(x).abs() < 1e-10);
    }

    #[test]
    fn welfare_at_zero_beta_is_one() {
        for alpha in [0.05, 0.2, 0.5, 0.9] {
            let w = welfare_lb(alpha, 0.0, 1.0 - alpha).unwrap();
            assert!((w - 1.0).abs() < 1e-12, "{alpha}: {w}");
        }
    }

    #[test]
    fn singular_case2() {
        assert!(matches!(welfare_lb(0.5, 0.1, 1.0), Err(crate::Error::Singular(_))));
    }

    #[test]
    fn case2a_limit_at_zero() {
        assert!((welfare_case2a(1e-12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gap_threshold_formula() {
        assert!((gap_threshold(0.1).unwrap() - 3.24e6).abs() < 1e-6);
        assert!(gap_threshold(1.0).is_err());
    }

    #[test]
    fn symmetric_two_bidders_match_floor() {
        assert!((symmetric_revenue_bound(2, 1.0) - revenue_floor()).abs() < 1e-15);
    }

    #[test]
    fn bisect_requires_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
