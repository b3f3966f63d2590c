//! No-regret dynamics on a bid grid.
//!
//! Every player sees the payoff each of its grid bids would have earned
//! against the others' realized bids (full information). The time-averaged
//! joint play is an approximate coarse correlated equilibrium whose
//! tolerance is the largest average external regret.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{AuctionInstance, FiniteEquilibrium};
use crate::error::{ensure, Result};
use crate::lp::BidGrid;

pub const DEFAULT_SEED: u64 = 7;

/// Number of trajectory samples kept per run (plus the final round).
pub const TRAJECTORY_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Play proportional to positive cumulative regret.
    #[default]
    RegretMatching,
    /// Exponential weights on cumulative payoffs.
    MultiplicativeWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub seed: u64,
    /// Multiplicative-weights rate; `sqrt(ln k / T)` when absent.
    pub learning_rate: Option<f64>,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, rounds: usize, seed: u64) -> Self {
        Self { algorithm, rounds, seed, learning_rate: None }
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.rounds >= 1, InvalidParameter, "need at least one round");
        if let Some(rate) = self.learning_rate {
            ensure!(rate > 0.0 && rate.is_finite(), InvalidParameter, "learning rate must be positive, got {rate}");
        }
        Ok(())
    }
}

/// Running averages after `round` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub round: usize,
    pub welfare: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub config: LearnerConfig,
    /// Visit frequencies of joint profiles, winners by tie priority.
    pub empirical: FiniteEquilibrium,
    /// Average external regret per player, deviator winning ties.
    pub regrets: Vec<f64>,
    /// Average external regret in the grid game the learners play, where a
    /// counterfactual tie is resolved by priority as on path. This is what
    /// the learners drive to zero; `regrets` exceeds it by at most one grid
    /// step.
    pub grid_regrets: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Realized bids, one profile per round.
    pub history: Vec<Vec<f64>>,
}

impl SimResult {
    pub fn max_regret(&self) -> f64 {
        self.regrets.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_grid_regret(&self) -> f64 {
        self.grid_regrets.iter().copied().fold(0.0, f64::max)
    }
}

struct Learner {
    actions: Vec<f64>,
    /// Cumulative regret (regret matching) or payoff (weights).
    score: Vec<f64>,
    weights: Vec<f64>,
}

impl Learner {
    fn strategy(&mut self, algorithm: Algorithm, rate: f64) -> &[f64] {
        match algorithm {
            Algorithm::RegretMatching => {
                let total: f64 = self.score.iter().map(|r| r.max(0.0)).sum();
                let k = self.actions.len() as f64;
                for (w, r) in self.weights.iter_mut().zip(&self.score) {
                    *w = if total > 0.0 { r.max(0.0) / total } else { 1.0 / k };
                }
            }
            Algorithm::MultiplicativeWeights => {
                let top = self.score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (w, s) in self.weights.iter_mut().zip(&self.score) {
                    *w = (rate * (s - top)).exp();
                }
                let total: f64 = self.weights.iter().sum();
                for w in self.weights.iter_mut() {
                    *w /= total;
                }
            }
        }
        &self.weights
    }
}

fn sample(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    // rounding left u above the total
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn max_other(bids: &[f64], player: usize) -> f64 {
    bids.iter().enumerate().filter(|&(j, _)| j != player).map(|(_, &b)| b).fold(0.0, f64::max)
}

/// Whether `player` bidding `bid` wins against `bids` on path.
fn wins_on_path(instance: &AuctionInstance, bids: &[f64], player: usize, bid: f64) -> bool {
    let rank = |i: usize| instance.tie_priority().iter().position(|&p| p == i).unwrap();
    bids.iter().enumerate().all(|(j, &b)| j == player || bid > b || (bid == b && rank(player) < rank(j)))
}

/// Runs the dynamics. Deterministic given the seed: one ChaCha8 stream,
/// one uniform draw per player per round, players in index order.
pub fn run(instance: &AuctionInstance, grid: &BidGrid, config: LearnerConfig) -> Result<SimResult> {
    config.validate()?;
    let n = instance.n();
    let t_total = config.rounds;
    let mut learners: Vec<Learner> = (0..n)
        .map(|i| {
            let actions: Vec<f64> = grid.admissible(i).collect();
            let k = actions.len();
            Learner { actions, score: vec![0.0; k], weights: vec![0.0; k] }
        })
        .collect();
    let rates: Vec<f64> = learners
        .iter()
        .map(|l| config.learning_rate.unwrap_or_else(|| ((l.actions.len() as f64).ln().max(1e-12) / t_total as f64).sqrt()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut history = Vec::with_capacity(t_total);
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut deviation_sum: Vec<Vec<f64>> = learners.iter().map(|l| vec![0.0; l.actions.len()]).collect();
    let mut grid_sum = deviation_sum.clone();
    let mut realized_sum = vec![0.0; n];
    let (mut welfare_sum, mut revenue_sum) = (0.0, 0.0);
    let stride = (t_total / TRAJECTORY_SAMPLES).max(1);
    let mut trajectory = Vec::new();

    for t in 1..=t_total {
        let mut idx = Vec::with_capacity(n);
        for (i, l) in learners.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            idx.push(sample(l.strategy(config.algorithm, rates[i]), u));
        }
        let bids: Vec<f64> = idx.iter().zip(&learners).map(|(&j, l)| l.actions[j]).collect();
        let (winner, price) = instance.outcome_unchecked(&bids);
        welfare_sum += instance.value(winner);
        revenue_sum += price;

        for (i, l) in learners.iter_mut().enumerate() {
            let v = instance.value(i);
            let realized = if i == winner { v - price } else { 0.0 };
            realized_sum[i] += realized;
            let m = max_other(&bids, i);
            for (j, &a) in l.actions.iter().enumerate() {
                if a >= m {
                    deviation_sum[i][j] += v - a;
                }
                let payoff = if wins_on_path(instance, &bids, i, a) { v - a } else { 0.0 };
                grid_sum[i][j] += payoff;
                match config.algorithm {
                    Algorithm::RegretMatching => l.score[j] += payoff - realized,
                    Algorithm::MultiplicativeWeights => l.score[j] += payoff,
                }
            }
        }
        *counts.entry(idx).or_insert(0) += 1;
        history.push(bids);
        if t % stride == 0 || t == t_total {
            trajectory.push(TrajectoryPoint { round: t, welfare: welfare_sum / t as f64, revenue: revenue_sum / t as f64 });
        }
    }

    let regrets = (0..n)
        .map(|i| {
            let best = deviation_sum[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ((best - realized_sum[i]) / t_total as f64).max(0.0)
        })
        .collect();
    let grid_regrets: Vec<f64> = (0..n)
        .map(|i| {
            let best = grid_sum[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ((best - realized_sum[i]) / t_total as f64).max(0.0)
        })
        .collect();
    let profiles = counts
        .into_iter()
        .map(|(idx, c)| {
            let bids = idx.iter().zip(&learners).map(|(&j, l)| l.actions[j]).collect();
            (c as f64 / t_total as f64, bids)
        })
        .collect();
    let empirical = FiniteEquilibrium::from_profiles(instance, profiles)?;
    Ok(SimResult { config, empirical, regrets, grid_regrets, trajectory, history })
}

/// Average external regret of `player` over a logged history: the best
/// fixed admissible grid bid, winning ties, against the realized play.
pub fn external_regret(instance: &AuctionInstance, grid: &BidGrid, history: &[Vec<f64>], player: usize) -> Result<f64> {
    logged_regret(instance, grid, history, player, |bids, d| d >= max_other(bids, player))
}

/// As [`external_regret`], but a counterfactual tie is resolved by priority.
pub fn grid_external_regret(instance: &AuctionInstance, grid: &BidGrid, history: &[Vec<f64>], player: usize) -> Result<f64> {
    logged_regret(instance, grid, history, player, |bids, d| wins_on_path(instance, bids, player, d))
}

fn logged_regret(
    instance: &AuctionInstance,
    grid: &BidGrid,
    history: &[Vec<f64>],
    player: usize,
    wins: impl Fn(&[f64], f64) -> bool,
) -> Result<f64> {
    ensure!(!history.is_empty(), InvalidInput, "empty history");
    ensure!(player < instance.n(), InvalidInput, "player {player} out of range");
    let v = instance.value(player);
    let mut realized = 0.0;
    for bids in history {
        instance.check_profile(bids)?;
        let (w, price) = instance.outcome_unchecked(bids);
        if w == player {
            realized += v - price;
        }
    }
    let best = grid
        .admissible(player)
        .map(|d| history.iter().filter(|b| wins(b, d)).count() as f64 * (v - d))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(((best - realized) / history.len() as f64).max(0.0))
}
