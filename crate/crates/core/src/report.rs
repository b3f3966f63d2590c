//! The constants suite: every published constant and derived property the
//! library is expected to reproduce, as computed-versus-expected rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{summarize, AuctionInstance};
use crate::bounds;
use crate::cdf::PiecewiseCdf;
use crate::construct;
use crate::error::Result;
use crate::lp::{extremal_equilibrium, BidGrid, LpQuery, Objective, Sense};
use crate::sim::{self, Algorithm, LearnerConfig};
use crate::verify::{check_ce_characterization, verify_ce, verify_cce, DeviationPolicy, EquilibriumClass};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// A constant printed in the source analysis.
    Published,
    /// Obtained by an independent computation.
    Derived,
    /// Holds by construction or definition.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// `|computed - expected| <= tolerance`
    Near,
    /// `computed <= expected + tolerance`
    AtMost,
    /// `computed >= expected - tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub check: Check,
    pub provenance: Provenance,
    pub pass: bool,
}

impl Comparison {
    pub fn new(name: impl Into<String>, computed: f64, expected: f64, tolerance: f64, check: Check, provenance: Provenance) -> Self {
        let pass = match check {
            Check::Near => (computed - expected).abs() <= tolerance,
            Check::AtMost => computed <= expected + tolerance,
            Check::AtLeast => computed >= expected - tolerance,
        };
        Self { name: name.into(), computed, expected, tolerance, check, provenance, pass: pass && computed.is_finite() }
    }

    pub fn near(name: impl Into<String>, computed: f64, expected: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self::new(name, computed, expected, tolerance, Check::Near, provenance)
    }

    pub fn at_most(name: impl Into<String>, computed: f64, bound: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self::new(name, computed, bound, tolerance, Check::AtMost, provenance)
    }

    pub fn at_least(name: impl Into<String>, computed: f64, bound: f64, tolerance: f64, provenance: Provenance) -> Self {
        Self::new(name, computed, bound, tolerance, Check::AtLeast, provenance)
    }

    /// A yes/no property, recorded as 1 or 0 against an expected 1.
    pub fn holds(name: impl Into<String>, ok: bool, provenance: Provenance) -> Self {
        Self::near(name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub rows: Vec<Comparison>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CriterionResult {
    fn from_rows(id: u8, title: &str, rows: Result<Vec<Comparison>>) -> Self {
        match rows {
            Ok(rows) => Self { id, title: title.into(), pass: !rows.is_empty() && rows.iter().all(|r| r.pass), rows, error: None },
            Err(e) => Self { id, title: title.into(), pass: false, rows: vec![], error: Some(e.to_string()) },
        }
    }

    /// One summary line, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => format!("error: {e}"),
            None => {
                let failed = self.rows.iter().filter(|r| !r.pass).count();
                format!("{}/{} checks", self.rows.len() - failed, self.rows.len())
            }
        };
        format!("{verdict} [{:>2}] {} ({detail})", self.id, self.title)
    }
}

/// Envelope for every command's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub command: Vec<String>,
    /// `sha256:<hex>` of the input file, or of the arguments when there is none.
    pub input_digest: String,
    pub results: serde_json::Value,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
}

pub const WELFARE_FLOOR: f64 = 0.813559;
pub const WELFARE_FLOOR_ALPHA: f64 = 0.274322;
pub const TABLE1_UTILITIES: (f64, f64) = (1.016, 0.038);

pub fn welfare_floor() -> Result<Vec<Comparison>> {
    let r = bounds::minimize_welfare()?;
    Ok(vec![
        Comparison::near("minimum welfare", r.value, WELFARE_FLOOR, 1e-5, Provenance::Published),
        Comparison::near("minimizing alpha", r.args["alpha"], WELFARE_FLOOR_ALPHA, 1e-4, Provenance::Published),
    ])
}

pub fn case1_candidate() -> Result<Vec<Comparison>> {
    let r = bounds::case1_minimum()?;
    Ok(vec![
        Comparison::near("root of 2x - ln x - 2", r.args["alpha"], 0.203, 1e-3, Provenance::Published),
        Comparison::near("boundary-case welfare", r.value, 0.838, 1e-3, Provenance::Published),
    ])
}

pub fn tight_welfare_construction() -> Result<Vec<Comparison>> {
    let ce = construct::construct_worst_welfare_optimal()?;
    Ok(vec![
        Comparison::at_most("largest deviation gain", ce.max_deviation_gain(), 0.0, 1e-9, Provenance::Identity),
        Comparison::holds("no overbidding", ce.no_overbidding(), Provenance::Identity),
        Comparison::near("welfare", ce.summary().welfare, WELFARE_FLOOR, 1e-6, Provenance::Published),
    ])
}

pub fn interval_feasibility() -> Result<Vec<Comparison>> {
    let samples: Vec<f64> = (0..=10).map(|j| 0.27 + j as f64 * 1e-3).collect();
    let b: Vec<(f64, bounds::UtilityBounds)> = samples.iter().map(|&a| (a, bounds::u_bounds(a))).collect();
    let max_u_min = b.iter().map(|(_, u)| u.u_min).fold(f64::NEG_INFINITY, f64::max);
    let min_u_max = b.iter().map(|(_, u)| u.u_max).fold(f64::INFINITY, f64::min);
    let below = b.iter().map(|(a, u)| u.u_min - a).fold(f64::NEG_INFINITY, f64::max);
    let above = b.iter().map(|(a, u)| u.u_max - a).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Comparison::at_most("max u_min - alpha", below, 0.0, 0.0, Provenance::Published),
        Comparison::at_least("min u_max - alpha", above, 0.0, 0.0, Provenance::Published),
        Comparison::at_most("max u_min", max_u_min, 0.12, 0.0, Provenance::Published),
        Comparison::at_least("min u_max", min_u_max, 0.285, 0.0, Provenance::Published),
    ])
}

pub fn revenue_floor() -> Result<Vec<Comparison>> {
    let e = std::f64::consts::E;
    let ce = construct::construct_symmetric_worst_revenue(2, 1.0)?;
    let s = ce.summary();
    let mut rows = vec![
        Comparison::near("two-bidder revenue", s.revenue, 1.0 - 2.0 / e, 1e-9, Provenance::Published),
        Comparison::near("utility of bidder 1", s.utility[0], 1.0 / e, 1e-9, Provenance::Published),
        Comparison::near("utility of bidder 2", s.utility[1], 1.0 / e, 1e-9, Provenance::Published),
    ];
    let k = 200;
    for n in 2..=4 {
        let ce = construct::construct_symmetric_worst_revenue(n, 1.0)?;
        let eq = construct::discretize(&ce, k)?;
        let revenue = summarize(ce.instance(), &eq)?.revenue;
        rows.push(Comparison::near(
            format!("n={n} bound vs discretized revenue"),
            bounds::symmetric_revenue_bound(n, 1.0),
            revenue,
            2.0 / k as f64,
            Provenance::Derived,
        ));
    }
    Ok(rows)
}

pub fn table1() -> Result<Vec<Comparison>> {
    let (inst, eq) = construct::construct_table1(construct::TABLE1_EPSILON)?;
    let cce = verify_cce(&inst, &eq, 5e-3, DeviationPolicy::DeviatorLoses)?;
    let ce = verify_ce(&inst, &eq, 5e-3, DeviationPolicy::DeviatorLoses)?;
    let s = summarize(&inst, &eq)?;
    Ok(vec![
        Comparison::at_most("CCE regret (deviator loses)", cce.max_regret, 5e-3, 0.0, Provenance::Published),
        Comparison::near("utility of the value-2 bidder", s.utility[0], TABLE1_UTILITIES.0, 2e-3, Provenance::Published),
        Comparison::near("utility of the value-1 bidder", s.utility[1], TABLE1_UTILITIES.1, 2e-3, Provenance::Published),
        Comparison::holds("fails CE verification", !ce.pass, Provenance::Published),
    ])
}

pub fn ce_efficiency() -> Result<Vec<Comparison>> {
    let mut rows = Vec::new();
    for values in [vec![2.0, 1.0], vec![1.0, 1.0]] {
        let inst = AuctionInstance::new(values.clone())?;
        for k in [10, 20] {
            let grid = BidGrid::uniform(&inst, k, false)?;
            let tag = format!("values {values:?}, k={k}");
            for objective in [Objective::Welfare, Objective::Revenue] {
                let ex = extremal_equilibrium(&inst, &grid, LpQuery::new(EquilibriumClass::Ce, objective, Sense::Minimize))?;
                rows.push(match objective {
                    Objective::Welfare => Comparison::near(format!("{tag}: min CE welfare"), ex.value, values[0], 1e-9, Provenance::Derived),
                    Objective::Revenue => Comparison::at_least(format!("{tag}: min CE revenue"), ex.value, values[1], 1e-9, Provenance::Derived),
                });
                let ch = check_ce_characterization(&inst, &ex.equilibrium, 1e-7)?;
                rows.push(Comparison::holds(format!("{tag}: {objective:?} optimum characterization"), ch.holds, Provenance::Derived));
            }
        }
    }
    Ok(rows)
}

fn min_cce(values: Vec<f64>, k: usize, objective: Objective, no_overbid: bool) -> Result<f64> {
    let inst = AuctionInstance::new(values)?;
    let grid = BidGrid::uniform(&inst, k, no_overbid)?;
    Ok(extremal_equilibrium(&inst, &grid, LpQuery::new(EquilibriumClass::Cce, objective, Sense::Minimize))?.value)
}

pub fn lp_bracketing() -> Result<Vec<Comparison>> {
    let e = std::f64::consts::E;
    let w = min_cce(vec![1.0, 1.0 - WELFARE_FLOOR_ALPHA], 40, Objective::Welfare, true)?;
    let r = min_cce(vec![1.0, 1.0], 40, Objective::Revenue, false)?;
    let wo = min_cce(vec![1.0, 1.0 - WELFARE_FLOOR_ALPHA], 40, Objective::Welfare, false)?;
    Ok(vec![
        Comparison::at_least("no-overbid min welfare: floor", w, WELFARE_FLOOR, 1e-6, Provenance::Published),
        Comparison::at_most("no-overbid min welfare: ceiling", w, 0.84, 0.0, Provenance::Derived),
        Comparison::at_least("min revenue: floor", r, 1.0 - 2.0 / e, 1e-6, Provenance::Published),
        Comparison::at_most("min revenue: ceiling", r, 0.295, 0.0, Provenance::Derived),
        Comparison::at_least("overbid min welfare: floor", wo, 1.0 - 1.0 / e, 1e-6, Provenance::Published),
        Comparison::at_most("overbid min welfare: ceiling", wo, 0.8136, 0.0, Provenance::Derived),
    ])
}

pub const REDUCTION_SEED: u64 = 20;
pub const REDUCTION_CASES: usize = 20;

pub fn reduction_soundness() -> Result<Vec<Comparison>> {
    let mut rng = ChaCha8Rng::seed_from_u64(REDUCTION_SEED);
    let mut worst_revenue = 0.0_f64;
    let mut worst_regret_change = 0.0_f64;
    let mut preserved = 0;
    for _ in 0..REDUCTION_CASES {
        let mut values: Vec<f64> = (0..3).map(|_| (rng.gen_range(20..=100) as f64) / 100.0).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        let inst = AuctionInstance::new(values)?;
        let grid = BidGrid::uniform(&inst, 4, rng.gen_bool(0.5))?;
        let objective = if rng.gen_bool(0.5) { Objective::Welfare } else { Objective::Revenue };
        let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
        let ex = extremal_equilibrium(&inst, &grid, LpQuery::new(EquilibriumClass::Cce, objective, sense))?;
        let (two, reduced) = construct::reduce_to_two(&inst, &ex.equilibrium)?;
        let before = summarize(&inst, &ex.equilibrium)?;
        let after = summarize(&two, &reduced)?;
        worst_revenue = worst_revenue.max((before.revenue - after.revenue).abs());
        let mut ok = true;
        for policy in DeviationPolicy::BOTH {
            let a = verify_cce(&inst, &ex.equilibrium, crate::lp::REVERIFY_TOL, policy)?;
            let b = verify_cce(&two, &reduced, crate::lp::REVERIFY_TOL, policy)?;
            ok &= !a.pass || b.pass;
            for i in 0..2 {
                worst_regret_change = worst_regret_change.max((a.players[i].regret - b.players[i].regret).abs());
            }
        }
        preserved += ok as usize;
    }
    Ok(vec![
        Comparison::near("largest revenue change", worst_revenue, 0.0, 1e-12, Provenance::Identity),
        Comparison::near("reductions still passing CCE verification", preserved as f64, REDUCTION_CASES as f64, 0.0, Provenance::Identity),
        Comparison::near("largest survivor regret change", worst_regret_change, 0.0, 1e-12, Provenance::Identity),
    ])
}

pub fn value_gap_trend() -> Result<Vec<Comparison>> {
    let mut rows = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for v in [1.0, 2.0, 5.0, 10.0] {
        let r = min_cce(vec![v, 1.0], 40, Objective::Revenue, false)?;
        if let Some((pv, pr)) = prev {
            rows.push(Comparison::at_least(format!("min revenue at v={v} vs v={pv}"), r, pr, 1e-9, Provenance::Derived));
        }
        prev = Some((v, r));
    }
    for eps in [0.5, 0.1, 0.05] {
        rows.push(Comparison::near(
            format!("gap threshold at eps={eps}"),
            bounds::gap_threshold(eps)?,
            324.0 / eps.powi(4),
            0.0,
            Provenance::Published,
        ));
    }
    Ok(rows)
}

/// Adaptive Simpson quadrature.
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

pub const PROPERTY_SEED: u64 = 11;

pub fn property_suites() -> Result<Vec<Comparison>> {
    let mut rng = ChaCha8Rng::seed_from_u64(PROPERTY_SEED);
    let mut mean_err = 0.0_f64;
    for _ in 0..100 {
        let b: f64 = rng.gen_range(0.5..10.0);
        let a: f64 = b * rng.gen_range(0.01..0.99);
        let cdf = PiecewiseCdf::reciprocal(a, b)?;
        let quad = simpson(&|x| 1.0 - cdf.cdf(x), 0.0, b - a, 1e-13);
        let closed = b - a + a * (a / b).ln();
        mean_err = mean_err.max((closed - quad).abs()).max((cdf.expected_value() - quad).abs());
    }

    let mut min_gap = f64::INFINITY;
    for _ in 0..100 {
        let alpha = 1.0 - rng.gen::<f64>() * (1.0 - (-1.0_f64).exp());
        let v = rng.gen_range(1.0..=10.0);
        min_gap = min_gap.min(bounds::revenue_gap(alpha, v));
    }

    let mut jump = 0.0_f64;
    for _ in 0..100 {
        let alpha = rng.gen_range(0.05..0.95);
        let v = rng.gen_range(0.05..0.95);
        let beta = v * alpha;
        let at = bounds::welfare_lb(alpha, beta, v)?;
        let below = bounds::welfare_lb(alpha, beta * (1.0 - 1e-12), v)?;
        jump = jump.max((at - below).abs());
    }

    let inst = AuctionInstance::new(vec![1.0, 1.0])?;
    let grid = BidGrid::uniform(&inst, 20, false)?;
    let mut passing = 0;
    for seed in 1..=10 {
        let r = sim::run(&inst, &grid, LearnerConfig::new(Algorithm::RegretMatching, 100_000, seed))?;
        let rep = verify_cce(&inst, &r.empirical, r.max_regret(), DeviationPolicy::DeviatorWins)?;
        passing += rep.pass as usize;
    }

    Ok(vec![
        Comparison::near("reciprocal mean: closed form vs quadrature", mean_err, 0.0, 1e-8, Provenance::Derived),
        Comparison::at_least("revenue inequality margin on (1/e, 1] x [1, 10]", min_gap, 0.0, 0.0, Provenance::Published),
        Comparison::near("welfare bound jump at the case boundary", jump, 0.0, 1e-9, Provenance::Derived),
        Comparison::near("regret-matching runs passing at measured regret", passing as f64, 10.0, 0.0, Provenance::Derived),
    ])
}

pub const CRITERIA: [(u8, &str, fn() -> Result<Vec<Comparison>>); 11] = [
    (1, "welfare floor constant", welfare_floor),
    (2, "boundary-case candidate", case1_candidate),
    (3, "tight welfare construction", tight_welfare_construction),
    (4, "interval feasibility", interval_feasibility),
    (5, "revenue floor", revenue_floor),
    (6, "six-row coarse equilibrium", table1),
    (7, "correlated equilibria are efficient", ce_efficiency),
    (8, "LP bracketing of the continuum constants", lp_bracketing),
    (9, "reduction soundness", reduction_soundness),
    (10, "value-gap trend", value_gap_trend),
    (11, "property suites", property_suites),
];

pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    CRITERIA.iter().find(|c| c.0 == id).map(|&(id, title, f)| CriterionResult::from_rows(id, title, f()))
}

pub fn run_suite() -> Vec<CriterionResult> {
    CRITERIA.iter().map(|&(id, title, f)| CriterionResult::from_rows(id, title, f())).collect()
}
