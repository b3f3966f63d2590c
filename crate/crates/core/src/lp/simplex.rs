//! Dense two-phase primal simplex.
//!
//! Pricing picks the most negative reduced cost and switches to Bland's rule
//! during long runs of degenerate pivots, which rules out cycling. The
//! tableau is periodically rebuilt from the original rows to stop rounding
//! error from accumulating.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `optimize c.x subject to rows, x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        Self { sense, objective, constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coefficients, relation, rhs });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        ensure!(n > 0, InvalidInput, "LP has no variables");
        ensure!(self.objective.iter().all(|c| c.is_finite()), InvalidInput, "objective is not finite");
        for (i, c) in self.constraints.iter().enumerate() {
            ensure!(c.coefficients.len() == n, InvalidInput, "row {i} has {} coefficients, expected {n}", c.coefficients.len());
            ensure!(
                c.rhs.is_finite() && c.coefficients.iter().all(|a| a.is_finite()),
                InvalidInput,
                "row {i} is not finite"
            );
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let sign = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| {
                let lhs = dot(&c.coefficients, x);
                match c.relation {
                    Relation::Le => (lhs - c.rhs).max(0.0),
                    Relation::Ge => (c.rhs - lhs).max(0.0),
                    Relation::Eq => (lhs - c.rhs).abs(),
                }
            })
            .fold(sign, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Optimality evidence. Reduced costs and duals refer to the problem as a
/// minimization (a maximization is solved as `min -c.x`), with one dual per
/// original row: non-negative for `>=`, non-positive for `<=`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub max_residual: f64,
    pub min_reduced_cost: f64,
    pub duals: Vec<f64>,
    /// `b.y` in the original sense; equals the objective at optimality.
    pub dual_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    pub certificate: Certificate,
}

/// Pivots between rebuilding the tableau from the original rows.
const REFACTOR_EVERY: usize = 400;

/// Relaxation of `<=` rows during the solve; removed before the end.
const PERTURBATION: f64 = 1e-7;

/// Degenerate pivots in a row before pricing falls back to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

/// Ratios closer than this count as tied.
const RATIO_TIE: f64 = 1e-12;

fn eliminate(a: &mut [Vec<f64>], cost: Option<&mut Vec<f64>>, row: usize, col: usize) {
    let p = a[row][col];
    for v in a[row].iter_mut() {
        *v /= p;
    }
    a[row][col] = 1.0;
    let pivot_row = std::mem::take(&mut a[row]);
    let nz: Vec<usize> = (0..pivot_row.len()).filter(|&k| pivot_row[k] != 0.0).collect();
    let update = |line: &mut Vec<f64>| {
        let f = line[col];
        if f != 0.0 {
            for &k in &nz {
                line[k] -= f * pivot_row[k];
            }
            line[col] = 0.0;
        }
    };
    for (r, line) in a.iter_mut().enumerate() {
        if r != row {
            update(line);
        }
    }
    if let Some(cost) = cost {
        update(cost);
    }
    a[row] = pivot_row;
}

struct Tableau {
    /// Standardized rows `[A | b]`, kept for refactoring.
    orig: Vec<Vec<f64>>,
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<f64>>,
    cols: usize,
    basis: Vec<usize>,
    /// Current phase costs.
    c: Vec<f64>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl Tableau {
    fn set_objective(&mut self, c: &[f64]) {
        self.c = c.to_vec();
        self.price();
    }

    fn price(&mut self) {
        self.cost = self.c.clone();
        self.cost.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = self.c[b];
            if cb != 0.0 {
                for (k, v) in self.a[r].iter().enumerate() {
                    self.cost[k] -= cb * v;
                }
            }
            self.cost[b] = 0.0;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        eliminate(&mut self.a, Some(&mut self.cost), row, col);
        self.basis[row] = col;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    /// Recomputes `B^-1 [A | b]` for the current basis by Gauss-Jordan
    /// elimination with partial pivoting, then reprices.
    fn refactor(&mut self) {
        self.since_refactor = 0;
        let m = self.a.len();
        let mut a = self.orig.clone();
        let mut used = vec![false; m];
        let mut basis = vec![usize::MAX; m];
        let mut order = self.basis.clone();
        order.sort_unstable();
        for &j in &order {
            let mut best: Option<(usize, f64)> = None;
            for (r, line) in a.iter().enumerate() {
                let mag = line[j].abs();
                if !used[r] && best.is_none_or(|(_, bm)| mag > bm) {
                    best = Some((r, mag));
                }
            }
            match best {
                Some((r, mag)) if mag > 1e-11 => {
                    eliminate(&mut a, None, r, j);
                    used[r] = true;
                    basis[r] = j;
                }
                // numerically singular basis: keep the updated tableau
                _ => return,
            }
        }
        for line in a.iter_mut() {
            let rhs = line.last_mut().unwrap();
            if *rhs < 0.0 && *rhs > -PIVOT_TOL {
                *rhs = 0.0;
            }
        }
        self.a = a;
        self.basis = basis;
        self.price();
    }

    fn entering(&self, allowed: &[bool], bland: bool) -> Option<usize> {
        let mut candidates = (0..self.cols).filter(|&j| allowed[j] && self.cost[j] < -PIVOT_TOL);
        if bland {
            candidates.next()
        } else {
            candidates.fold(None, |best: Option<usize>, j| match best {
                Some(b) if self.cost[b] <= self.cost[j] => Some(b),
                _ => Some(j),
            })
        }
    }

    /// Minimum-ratio row; ties go to the lowest basic index under Bland's
    /// rule and to the largest pivot element otherwise.
    fn leaving(&self, col: usize, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (r, line) in self.a.iter().enumerate() {
            let a = line[col];
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = line[self.cols].max(0.0) / a;
            let better = match best {
                None => true,
                Some((br, bratio)) => {
                    if ratio < bratio - RATIO_TIE {
                        true
                    } else if ratio <= bratio + RATIO_TIE {
                        if bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > self.a[br][col]
                        }
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((r, ratio));
            }
        }
        best
    }

    /// Dual simplex from a dual-feasible basis: removes negative basic
    /// values. Returns false when the rows are infeasible.
    fn dual_optimize(&mut self, allowed: &[bool]) -> bool {
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let mut leave: Option<usize> = None;
            for r in 0..self.a.len() {
                let v = self.a[r][self.cols];
                if v < -PIVOT_TOL && leave.is_none_or(|l| v < self.a[l][self.cols]) {
                    leave = Some(r);
                }
            }
            let Some(row) = leave else {
                return true;
            };
            let mut enter: Option<(usize, f64)> = None;
            for j in (0..self.cols).filter(|&j| allowed[j]) {
                let a = self.a[row][j];
                if a < -PIVOT_TOL {
                    let ratio = self.cost[j].max(0.0) / -a;
                    if enter.is_none_or(|(_, best)| ratio < best - RATIO_TIE) {
                        enter = Some((j, ratio));
                    }
                }
            }
            let Some((col, _)) = enter else {
                return false;
            };
            self.pivot(row, col);
        }
    }

    /// Runs to optimality; returns false when unbounded.
    fn optimize(&mut self, allowed: &[bool]) -> bool {
        let mut degenerate = 0;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_LIMIT;
            let Some(col) = self.entering(allowed, bland) else {
                if self.since_refactor == 0 {
                    return true;
                }
                // confirm optimality on a fresh tableau
                self.refactor();
                if self.entering(allowed, bland).is_none() {
                    return true;
                }
                continue;
            };
            let Some((row, ratio)) = self.leaving(col, bland) else {
                return false;
            };
            if ratio <= RATIO_TIE {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
        }
    }
}

/// Solves `problem` deterministically. Infeasible and unbounded problems
/// are reported through [`LpSolution::status`].
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.num_vars();
    let m = problem.constraints.len();
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let c: Vec<f64> = problem.objective.iter().map(|v| sign * v).collect();

    // Standardize rows to rhs >= 0; zero-rhs `>=` rows are negated so a
    // slack can start basic.
    let mut row_sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, con) in problem.constraints.iter().enumerate() {
        let mut r = con.relation;
        if con.rhs < 0.0 || (con.rhs == 0.0 && r == Relation::Ge) {
            row_sign[i] = -1.0;
            r = match r {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rel.push(r);
    }
    let surplus: Vec<usize> = (0..m).filter(|&i| rel[i] == Relation::Ge).collect();
    // Column layout: originals, surplus columns, then one identity column
    // per row (slack for `<=`, artificial otherwise).
    let first_identity = n + surplus.len();
    let cols = first_identity + m;
    let mut a = vec![vec![0.0; cols + 1]; m];
    for (i, con) in problem.constraints.iter().enumerate() {
        for (j, v) in con.coefficients.iter().enumerate() {
            a[i][j] = row_sign[i] * v;
        }
        a[i][first_identity + i] = 1.0;
        a[i][cols] = row_sign[i] * con.rhs;
    }
    for (s, &i) in surplus.iter().enumerate() {
        a[i][n + s] = -1.0;
    }
    let artificial: Vec<bool> = (0..cols).map(|j| j >= first_identity && rel[j - first_identity] != Relation::Le).collect();

    // Distinct relaxations break the degeneracy of zero right-hand sides.
    let true_rhs: Vec<f64> = a.iter().map(|line| line[cols]).collect();
    for (i, line) in a.iter_mut().enumerate() {
        if rel[i] == Relation::Le {
            line[cols] += PERTURBATION * (1.0 + (i as f64 * 0.618_033_988_749_895).fract());
        }
    }
    let mut t = Tableau {
        orig: a.clone(),
        a,
        cols,
        basis: (first_identity..cols).collect(),
        c: Vec::new(),
        cost: Vec::new(),
        pivots: 0,
        since_refactor: 0,
    };

    if artificial.iter().any(|&x| x) {
        let phase1: Vec<f64> = artificial.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        t.set_objective(&phase1);
        t.optimize(&vec![true; cols]);
        if -t.cost[cols] > PIVOT_TOL {
            return Ok(failed(problem, LpStatus::Infeasible, t.pivots));
        }
        // Drive remaining zero-level artificials out of the basis.
        for r in 0..m {
            if artificial[t.basis[r]] {
                if let Some(j) = (0..first_identity).find(|&j| t.a[r][j].abs() > PIVOT_TOL) {
                    t.pivot(r, j);
                }
            }
        }
    }

    let mut full_c = c.clone();
    full_c.resize(cols, 0.0);
    t.set_objective(&full_c);
    let allowed: Vec<bool> = (0..cols).map(|j| !artificial[j]).collect();
    if !t.optimize(&allowed) {
        return Ok(failed(problem, LpStatus::Unbounded, t.pivots));
    }
    for (line, rhs) in t.orig.iter_mut().zip(&true_rhs) {
        line[cols] = *rhs;
    }
    t.refactor();
    loop {
        if !t.dual_optimize(&allowed) {
            return Ok(failed(problem, LpStatus::Infeasible, t.pivots));
        }
        if !t.optimize(&allowed) {
            return Ok(failed(problem, LpStatus::Unbounded, t.pivots));
        }
        if t.a.iter().all(|line| line[cols] >= -PIVOT_TOL) {
            break;
        }
    }

    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.a[r][cols];
        }
    }
    let duals: Vec<f64> = (0..m).map(|i| -row_sign[i] * t.cost[first_identity + i]).collect();
    let min_reduced_cost = (0..first_identity).map(|j| t.cost[j]).fold(f64::INFINITY, f64::min);
    let dual_bound = sign * problem.constraints.iter().zip(&duals).map(|(con, y)| con.rhs * y).sum::<f64>();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: problem.objective_value(&x),
        certificate: Certificate {
            max_residual: problem.max_residual(&x),
            min_reduced_cost: if min_reduced_cost.is_finite() { min_reduced_cost } else { 0.0 },
            duals,
            dual_bound,
        },
        x,
        pivots: t.pivots,
    })
}

fn failed(problem: &LpProblem, status: LpStatus, pivots: usize) -> LpSolution {
    LpSolution {
        status,
        x: vec![0.0; problem.num_vars()],
        objective: f64::NAN,
        pivots,
        certificate: Certificate {
            max_residual: f64::NAN,
            min_reduced_cost: f64::NAN,
            duals: Vec::new(),
            dual_bound: f64::NAN,
        },
    }
}
