//! Extremal equilibria over grid-supported distributions.
//!
//! Variables are probabilities of a joint bid profile together with its
//! winner; at tied profiles the LP may pick the winner. Deviation rows let the
//! deviator win ties: in the continuum, bidding just above a grid point is
//! the limit of that, so every feasible point is a genuine equilibrium of the
//! game with real-valued bids, not just of the grid game.

mod simplex;

pub use simplex::{solve_lp, Certificate, Constraint, LpProblem, LpSolution, LpStatus, Relation, Sense, PIVOT_TOL};

use serde::{Deserialize, Serialize};

use crate::auction::{Atom, AuctionInstance, FiniteEquilibrium};
use crate::error::{ensure, Error, Result};
use crate::verify::{verify, DeviationPolicy, EquilibriumClass, VerificationReport};

/// Largest player count the profile enumeration accepts.
pub const MAX_PLAYERS: usize = 3;

/// Tolerance for re-verifying LP optima.
pub const REVERIFY_TOL: f64 = 1e-7;

/// LP masses below this are dropped before building the equilibrium.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidGrid {
    points: Vec<f64>,
    /// Indices into `points` each player may bid.
    admissible: Vec<Vec<usize>>,
    no_overbid: bool,
}

impl BidGrid {
    /// Common grid for all players; with `no_overbid` each player keeps the
    /// points not above its value, and every value inside the grid range
    /// must itself be a point.
    pub fn new(instance: &AuctionInstance, points: Vec<f64>, no_overbid: bool) -> Result<Self> {
        ensure!(points.first() == Some(&0.0), InvalidInput, "grid must start at 0");
        ensure!(points.iter().all(|p| p.is_finite()), InvalidInput, "grid points must be finite");
        ensure!(points.windows(2).all(|w| w[0] < w[1]), InvalidInput, "grid must be strictly increasing");
        let top = *points.last().unwrap();
        let admissible = (0..instance.n())
            .map(|i| {
                let v = instance.value(i);
                if no_overbid {
                    ensure!(
                        v > top || points.contains(&v),
                        InvalidInput,
                        "value {v} of player {i} is not a grid point"
                    );
                    Ok((0..points.len()).filter(|&j| points[j] <= v).collect())
                } else {
                    Ok((0..points.len()).collect())
                }
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Ok(Self { points, admissible, no_overbid })
    }

    /// `k + 1` evenly spaced points on `[0, max value]` plus every value.
    pub fn uniform(instance: &AuctionInstance, k: usize, no_overbid: bool) -> Result<Self> {
        ensure!(k >= 1, InvalidParameter, "need k >= 1");
        let top = instance.max_value();
        let mut points: Vec<f64> = (0..=k).map(|j| if j == k { top } else { top * j as f64 / k as f64 }).collect();
        points.extend_from_slice(instance.values());
        points.sort_by(f64::total_cmp);
        points.dedup();
        Self::new(instance, points, no_overbid)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn no_overbid(&self) -> bool {
        self.no_overbid
    }

    pub fn admissible(&self, player: usize) -> impl Iterator<Item = f64> + '_ {
        self.admissible[player].iter().map(|&j| self.points[j])
    }

    pub fn num_admissible(&self, player: usize) -> usize {
        self.admissible[player].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Welfare,
    Revenue,
}

/// Who wins on path when several bids tie for the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieResolution {
    /// The LP splits each tied profile among the tied bidders, like an
    /// equilibrium that chooses its own tie-breaking rule.
    #[default]
    Free,
    /// The instance's fixed priority order decides; one variable per profile.
    Priority,
}

/// One LP column: probability that `bids` are played and `winner` wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpVariable {
    pub bids: Vec<f64>,
    pub winner: usize,
}

/// An LP whose columns are the listed (profile, winner) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumLp {
    pub problem: LpProblem,
    pub variables: Vec<LpVariable>,
    pub class: EquilibriumClass,
    pub objective: Objective,
}

fn enumerate_profiles(instance: &AuctionInstance, grid: &BidGrid) -> Result<Vec<Vec<f64>>> {
    let n = instance.n();
    ensure!(n <= MAX_PLAYERS, Size, "LP supports at most {MAX_PLAYERS} players, got {n}");
    ensure!(grid.admissible.len() == n, InvalidInput, "grid built for {} players, instance has {n}", grid.admissible.len());
    let mut profiles = vec![Vec::with_capacity(n)];
    for i in 0..n {
        profiles = profiles
            .into_iter()
            .flat_map(|p| {
                grid.admissible(i).map(move |b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .collect();
    }
    Ok(profiles)
}

fn max_other(bids: &[f64], player: usize) -> f64 {
    bids.iter().enumerate().filter(|&(j, _)| j != player).map(|(_, &b)| b).fold(0.0, f64::max)
}

struct ColumnData {
    variables: Vec<LpVariable>,
    utility: Vec<Vec<f64>>,
    objective: Vec<f64>,
}

fn column_data(instance: &AuctionInstance, grid: &BidGrid, objective: Objective, ties: TieResolution) -> Result<ColumnData> {
    let mut variables = Vec::new();
    for bids in enumerate_profiles(instance, grid)? {
        let price = bids.iter().copied().fold(0.0, f64::max);
        match ties {
            TieResolution::Priority => {
                let (winner, _) = instance.outcome_unchecked(&bids);
                variables.push(LpVariable { bids, winner });
            }
            TieResolution::Free => {
                for winner in (0..bids.len()).filter(|&i| bids[i] == price) {
                    variables.push(LpVariable { bids: bids.clone(), winner });
                }
            }
        }
    }
    let mut utility = vec![Vec::with_capacity(variables.len()); instance.n()];
    let mut obj = Vec::with_capacity(variables.len());
    for var in &variables {
        let price = var.bids[var.winner];
        for (i, u) in utility.iter_mut().enumerate() {
            u.push(if i == var.winner { instance.value(i) - price } else { 0.0 });
        }
        obj.push(match objective {
            Objective::Welfare => instance.value(var.winner),
            Objective::Revenue => price,
        });
    }
    Ok(ColumnData { variables, utility, objective: obj })
}

fn base_problem(data: &ColumnData, sense: Sense) -> LpProblem {
    let mut p = LpProblem::new(sense, data.objective.clone());
    p.add(vec![1.0; data.variables.len()], Relation::Eq, 1.0);
    p
}

/// Coarse correlated equilibria: one row per player and grid deviation.
/// Deviations above a player's value are implied by the deviation to 0 and
/// are left out.
pub fn build_cce_lp(
    instance: &AuctionInstance,
    grid: &BidGrid,
    objective: Objective,
    sense: Sense,
    ties: TieResolution,
) -> Result<EquilibriumLp> {
    let data = column_data(instance, grid, objective, ties)?;
    let mut problem = base_problem(&data, sense);
    for i in 0..instance.n() {
        let v = instance.value(i);
        let others: Vec<f64> = data.variables.iter().map(|c| max_other(&c.bids, i)).collect();
        for d in grid.points.iter().copied().filter(|&d| d <= v) {
            let row = others
                .iter()
                .zip(&data.utility[i])
                .map(|(&m, &u)| u - if d >= m { v - d } else { 0.0 })
                .collect();
            problem.add(row, Relation::Ge, 0.0);
        }
    }
    Ok(EquilibriumLp { problem, variables: data.variables, class: EquilibriumClass::Cce, objective })
}

/// Correlated equilibria: one row per player, recommendation and deviation.
pub fn build_ce_lp(
    instance: &AuctionInstance,
    grid: &BidGrid,
    objective: Objective,
    sense: Sense,
    ties: TieResolution,
) -> Result<EquilibriumLp> {
    let data = column_data(instance, grid, objective, ties)?;
    let mut problem = base_problem(&data, sense);
    let n_vars = data.variables.len();
    for i in 0..instance.n() {
        let v = instance.value(i);
        for r in grid.admissible(i) {
            for d in grid.points.iter().copied().filter(|&d| d <= v) {
                let mut row = vec![0.0; n_vars];
                for (k, c) in data.variables.iter().enumerate() {
                    if c.bids[i] == r {
                        let win = if d >= max_other(&c.bids, i) { v - d } else { 0.0 };
                        row[k] = data.utility[i][k] - win;
                    }
                }
                problem.add(row, Relation::Ge, 0.0);
            }
        }
    }
    Ok(EquilibriumLp { problem, variables: data.variables, class: EquilibriumClass::Ce, objective })
}

/// What to optimize and over which equilibria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpQuery {
    pub class: EquilibriumClass,
    pub objective: Objective,
    pub sense: Sense,
    pub ties: TieResolution,
}

impl LpQuery {
    pub fn new(class: EquilibriumClass, objective: Objective, sense: Sense) -> Self {
        Self { class, objective, sense, ties: TieResolution::Free }
    }

    pub fn with_ties(self, ties: TieResolution) -> Self {
        Self { ties, ..self }
    }
}

pub fn build_lp(instance: &AuctionInstance, grid: &BidGrid, query: LpQuery) -> Result<EquilibriumLp> {
    match query.class {
        EquilibriumClass::Cce => build_cce_lp(instance, grid, query.objective, query.sense, query.ties),
        EquilibriumClass::Ce => build_ce_lp(instance, grid, query.objective, query.sense, query.ties),
    }
}

/// Optimal equilibrium with its re-verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremal {
    pub equilibrium: FiniteEquilibrium,
    pub value: f64,
    pub solution: LpSolution,
    pub report: VerificationReport,
}

/// Turns LP masses into an equilibrium: tiny masses are clamped to zero,
/// the rest renormalized, and the columns of one profile merged into a
/// single atom with winner shares.
pub fn solution_to_equilibrium(variables: &[LpVariable], x: &[f64]) -> Result<FiniteEquilibrium> {
    let kept: Vec<(f64, &LpVariable)> = x.iter().copied().zip(variables).filter(|(m, _)| *m >= CLAMP_TOL).collect();
    let total: f64 = kept.iter().map(|(m, _)| m).sum();
    ensure!(total > 0.0, Lp, "LP solution carries no mass");
    FiniteEquilibrium::merged(kept.into_iter().map(|(m, c)| Atom::pure(m / total, c.bids.clone(), c.winner)).collect())
}

/// Solves for the extremal equilibrium and re-verifies it with the
/// deviator-wins verifier at [`REVERIFY_TOL`].
pub fn extremal_equilibrium(instance: &AuctionInstance, grid: &BidGrid, query: LpQuery) -> Result<Extremal> {
    let lp = build_lp(instance, grid, query)?;
    let solution = solve_lp(&lp.problem)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("LP is {:?}", solution.status).to_lowercase()));
    }
    let equilibrium = solution_to_equilibrium(&lp.variables, &solution.x)?;
    let report = verify(instance, &equilibrium, query.class, REVERIFY_TOL, DeviationPolicy::DeviatorWins)?;
    ensure!(report.pass, Lp, "LP optimum fails re-verification with regret {}", report.max_regret);
    Ok(Extremal { equilibrium, value: solution.objective, solution, report })
}
