//! Equilibrium checks for finite joint bid distributions.
//!
//! A fixed deviation `d` by player `i` only interacts with the distribution
//! through the highest competing bid, so deviation payoffs are computed from
//! a sorted table of competing bids. Candidate deviations are `0` plus every
//! bid in the support: between support bids the set of profiles a deviation
//! wins is constant while the payment grows. Bidding just above a support
//! bid `g` is the limit of evaluating `g` with the deviator winning ties, so
//! the deviator-wins figures are the supremum over all real deviations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::auction::{summarize, AuctionInstance, FiniteEquilibrium};
use crate::error::{ensure, Error, Result};

/// Recommendations rarer than this are not conditioned on.
pub const MIN_CONDITIONING_PROB: f64 = 1e-15;

/// How a deviating bid that ties the highest competing bid is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationPolicy {
    #[default]
    DeviatorLoses,
    DeviatorWins,
}

impl DeviationPolicy {
    pub const BOTH: [DeviationPolicy; 2] = [DeviationPolicy::DeviatorLoses, DeviationPolicy::DeviatorWins];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumClass {
    /// Coarse correlated: constant deviations only.
    Cce,
    /// Correlated: deviations may depend on the recommended bid.
    Ce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub bid: f64,
    pub utility: f64,
    pub regret: f64,
}

/// Per-player verdict. In CE mode the utilities are conditional on the
/// recommendation with the largest gain, reported in `recommendation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerReport {
    pub player: usize,
    pub recommendation: Option<f64>,
    pub equilibrium_utility: f64,
    pub best_deviation_bid: f64,
    pub best_deviation_utility: f64,
    pub regret: f64,
    pub deviator_loses: Deviation,
    pub deviator_wins: Deviation,
}

/// The most profitable recommendation-dependent deviation found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDeviation {
    pub player: usize,
    pub recommendation: f64,
    pub probability: f64,
    pub on_path_utility: f64,
    pub deviation_bid: f64,
    pub deviation_utility: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub class: EquilibriumClass,
    pub policy: DeviationPolicy,
    pub tolerance: f64,
    pub players: Vec<PlayerReport>,
    pub worst: Option<ConditionalDeviation>,
    pub max_regret: f64,
    pub pass: bool,
}

impl VerificationReport {
    /// Largest regret under the other tie policy.
    pub fn max_regret_under(&self, policy: DeviationPolicy) -> f64 {
        self.players
            .iter()
            .map(|p| match policy {
                DeviationPolicy::DeviatorLoses => p.deviator_loses.regret,
                DeviationPolicy::DeviatorWins => p.deviator_wins.regret,
            })
            .fold(0.0, f64::max)
    }
}

/// Cumulative weight of profiles by their highest competing bid.
struct Exposure {
    thresholds: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Exposure {
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut thresholds: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut cumulative: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for (m, w) in pairs {
            acc += w;
            if thresholds.last() == Some(&m) {
                *cumulative.last_mut().unwrap() = acc;
            } else {
                thresholds.push(m);
                cumulative.push(acc);
            }
        }
        Self { thresholds, cumulative }
    }

    fn win_weight(&self, bid: f64, policy: DeviationPolicy) -> f64 {
        let count = match policy {
            DeviationPolicy::DeviatorWins => self.thresholds.partition_point(|&m| m <= bid),
            DeviationPolicy::DeviatorLoses => self.thresholds.partition_point(|&m| m < bid),
        };
        if count == 0 {
            0.0
        } else {
            self.cumulative[count - 1]
        }
    }

    /// Best candidate, lowest bid on exact ties of utility.
    fn best(&self, value: f64, candidates: &[f64], policy: DeviationPolicy) -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        for &d in candidates {
            let u = (value - d) * self.win_weight(d, policy);
            if u > best.1 {
                best = (d, u);
            }
        }
        best
    }
}

fn candidates(eq: &FiniteEquilibrium) -> Vec<f64> {
    let mut c = eq.support_bids();
    if c.first() != Some(&0.0) {
        c.insert(0, 0.0);
    }
    c
}

fn check_player(instance: &AuctionInstance, player: usize) -> Result<()> {
    ensure!(player < instance.n(), InvalidInput, "player {player} out of range for {} players", instance.n());
    Ok(())
}

/// Best fixed bid for `player` against the others' equilibrium bids.
/// Returns `(bid, utility)`.
pub fn best_constant_deviation(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    player: usize,
    policy: DeviationPolicy,
) -> Result<(f64, f64)> {
    eq.check_instance(instance)?;
    check_player(instance, player)?;
    let exposure = Exposure::new(eq.atoms().iter().map(|a| (a.max_other(player), a.probability)).collect());
    Ok(exposure.best(instance.value(player), &candidates(eq), policy))
}

/// Utility of one fixed deviation, for tabulating payoffs.
pub fn deviation_utility(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    player: usize,
    bid: f64,
    policy: DeviationPolicy,
) -> Result<f64> {
    eq.check_instance(instance)?;
    check_player(instance, player)?;
    let exposure = Exposure::new(eq.atoms().iter().map(|a| (a.max_other(player), a.probability)).collect());
    Ok((instance.value(player) - bid) * exposure.win_weight(bid, policy))
}

fn deviation_record(bid: f64, utility: f64, baseline: f64) -> Deviation {
    Deviation { bid, utility, regret: (utility - baseline).max(0.0) }
}

/// Coarse correlated equilibrium check: no player gains more than
/// `tolerance` from any fixed bid.
pub fn verify_cce(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    tolerance: f64,
    policy: DeviationPolicy,
) -> Result<VerificationReport> {
    ensure!(tolerance >= 0.0, InvalidInput, "tolerance must be non-negative, got {tolerance}");
    let summary = summarize(instance, eq)?;
    let cands = candidates(eq);
    let mut players = Vec::with_capacity(instance.n());
    for i in 0..instance.n() {
        let exposure = Exposure::new(eq.atoms().iter().map(|a| (a.max_other(i), a.probability)).collect());
        let u = summary.utility[i];
        let [loses, wins] = DeviationPolicy::BOTH.map(|p| {
            let (bid, dev) = exposure.best(instance.value(i), &cands, p);
            deviation_record(bid, dev, u)
        });
        let chosen = match policy {
            DeviationPolicy::DeviatorLoses => loses,
            DeviationPolicy::DeviatorWins => wins,
        };
        players.push(PlayerReport {
            player: i,
            recommendation: None,
            equilibrium_utility: u,
            best_deviation_bid: chosen.bid,
            best_deviation_utility: chosen.utility,
            regret: chosen.regret,
            deviator_loses: loses,
            deviator_wins: wins,
        });
    }
    let max_regret = players.iter().map(|p| p.regret).fold(0.0, f64::max);
    Ok(VerificationReport {
        class: EquilibriumClass::Cce,
        policy,
        tolerance,
        players,
        worst: None,
        max_regret,
        pass: max_regret <= tolerance,
    })
}

/// Conditional payoffs for `player` told to bid `recommendation`:
/// `(probability, on-path utility, best deviation under each policy)`.
fn conditional(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    player: usize,
    recommendation: f64,
    cands: &[f64],
) -> (f64, f64, [(f64, f64); 2]) {
    let v = instance.value(player);
    let mut prob = 0.0;
    let mut on_path = 0.0;
    let mut pairs = Vec::new();
    for a in eq.atoms().iter().filter(|a| a.bids[player] == recommendation) {
        prob += a.probability;
        on_path += a.probability * a.winner_shares[player] * (v - recommendation);
        pairs.push((a.max_other(player), a.probability));
    }
    let exposure = Exposure::new(pairs);
    let best = DeviationPolicy::BOTH.map(|p| {
        let (bid, u) = exposure.best(v, cands, p);
        (bid, u / prob)
    });
    (prob, on_path / prob, best)
}

/// Best deviation for `player` conditional on being told `recommendation`.
pub fn conditional_deviation(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    player: usize,
    recommendation: f64,
    policy: DeviationPolicy,
) -> Result<ConditionalDeviation> {
    eq.check_instance(instance)?;
    check_player(instance, player)?;
    let (prob, on_path, best) = conditional(instance, eq, player, recommendation, &candidates(eq));
    ensure!(
        prob >= MIN_CONDITIONING_PROB,
        InvalidInput,
        "player {player} is never told to bid {recommendation}"
    );
    let (bid, utility) = best[policy as usize];
    Ok(ConditionalDeviation {
        player,
        recommendation,
        probability: prob,
        on_path_utility: on_path,
        deviation_bid: bid,
        deviation_utility: utility,
        gain: utility - on_path,
    })
}

/// Correlated equilibrium check over every (player, recommendation) pair.
/// With finite support this covers every deviation function.
pub fn verify_ce(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    tolerance: f64,
    policy: DeviationPolicy,
) -> Result<VerificationReport> {
    ensure!(tolerance >= 0.0, InvalidInput, "tolerance must be non-negative, got {tolerance}");
    eq.check_instance(instance)?;
    let cands = candidates(eq);
    let mut players = Vec::with_capacity(instance.n());
    let mut worst: Option<ConditionalDeviation> = None;

    for i in 0..instance.n() {
        let mut recs: BTreeMap<u64, f64> = BTreeMap::new();
        for a in eq.atoms() {
            let r = a.bids[i] + 0.0;
            recs.insert(r.to_bits(), r);
        }
        let mut report: Option<PlayerReport> = None;
        for &r in recs.values() {
            let (prob, on_path, best) = conditional(instance, eq, i, r, &cands);
            if prob < MIN_CONDITIONING_PROB {
                continue;
            }
            let [loses, wins] = [0, 1].map(|k| deviation_record(best[k].0, best[k].1, on_path));
            let chosen = match policy {
                DeviationPolicy::DeviatorLoses => loses,
                DeviationPolicy::DeviatorWins => wins,
            };
            let gain = chosen.utility - on_path;
            if worst.as_ref().is_none_or(|w| gain > w.gain) {
                worst = Some(ConditionalDeviation {
                    player: i,
                    recommendation: r,
                    probability: prob,
                    on_path_utility: on_path,
                    deviation_bid: chosen.bid,
                    deviation_utility: chosen.utility,
                    gain,
                });
            }
            let candidate = PlayerReport {
                player: i,
                recommendation: Some(r),
                equilibrium_utility: on_path,
                best_deviation_bid: chosen.bid,
                best_deviation_utility: chosen.utility,
                regret: chosen.regret,
                deviator_loses: loses,
                deviator_wins: wins,
            };
            match &mut report {
                None => report = Some(candidate),
                Some(cur) => {
                    // keep the worst chosen-policy record, and the worst of each policy
                    let dl = if loses.regret > cur.deviator_loses.regret { loses } else { cur.deviator_loses };
                    let dw = if wins.regret > cur.deviator_wins.regret { wins } else { cur.deviator_wins };
                    if candidate.regret > cur.regret {
                        *cur = candidate;
                    }
                    cur.deviator_loses = dl;
                    cur.deviator_wins = dw;
                }
            }
        }
        players.push(report.ok_or_else(|| Error::InvalidInput(format!("player {i} has no recommendation")))?);
    }
    let max_regret = players.iter().map(|p| p.regret).fold(0.0, f64::max);
    Ok(VerificationReport {
        class: EquilibriumClass::Ce,
        policy,
        tolerance,
        players,
        worst,
        max_regret,
        pass: max_regret <= tolerance,
    })
}

pub fn verify(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    class: EquilibriumClass,
    tolerance: f64,
    policy: DeviationPolicy,
) -> Result<VerificationReport> {
    match class {
        EquilibriumClass::Cce => verify_cce(instance, eq, tolerance, policy),
        EquilibriumClass::Ce => verify_ce(instance, eq, tolerance, policy),
    }
}

/// Outcome properties every correlated equilibrium must have: only
/// top-valued players win, and prices lie between the two highest values
/// (or sit at the common top value, leaving nobody any surplus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub holds: bool,
    /// Probability that a player without the highest value wins.
    pub low_value_win_prob: f64,
    pub min_price: f64,
    pub max_price: f64,
    pub max_utility: f64,
    pub violations: Vec<String>,
}

/// Checks the outcome characterization without first checking that `eq` is
/// a correlated equilibrium.
pub fn outcome_characterization(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    tolerance: f64,
) -> Result<CharacterizationReport> {
    let summary = summarize(instance, eq)?;
    let v1 = instance.value(0);
    let v2 = instance.value(1);
    let low_value_win_prob: f64 = (0..instance.n())
        .filter(|&i| instance.value(i) < v1)
        .map(|i| summary.win_prob[i])
        .sum();
    let live = eq.atoms().iter().filter(|a| a.probability >= MIN_CONDITIONING_PROB);
    let (min_price, max_price) = live.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
        (lo.min(a.price()), hi.max(a.price()))
    });
    let max_utility = summary.utility.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut violations = Vec::new();
    if low_value_win_prob > tolerance {
        violations.push(format!("players below the top value win with probability {low_value_win_prob}"));
    }
    let (lo, hi) = if v1 > v2 { (v2, v1) } else { (v1, v1) };
    if min_price < lo - tolerance {
        violations.push(format!("price {min_price} below {lo}"));
    }
    if max_price > hi + tolerance {
        violations.push(format!("price {max_price} above {hi}"));
    }
    if v1 == v2 && max_utility > tolerance {
        violations.push(format!("a player keeps utility {max_utility} with tied top values"));
    }
    Ok(CharacterizationReport {
        holds: violations.is_empty(),
        low_value_win_prob,
        min_price,
        max_price,
        max_utility,
        violations,
    })
}

/// [`outcome_characterization`] for an equilibrium that must first pass
/// [`verify_ce`] (deviator-wins, same tolerance).
pub fn check_ce_characterization(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    tolerance: f64,
) -> Result<CharacterizationReport> {
    let report = verify_ce(instance, eq, tolerance, DeviationPolicy::DeviatorWins)?;
    if !report.pass {
        return Err(Error::Precondition(format!(
            "not a correlated equilibrium: max conditional regret {} exceeds {tolerance}",
            report.max_regret
        )));
    }
    outcome_characterization(instance, eq, tolerance)
}
