//! The first-price auction model: instances, joint bid distributions with
//! explicit winner shares, and their outcome summaries.
//!
//! Players are indexed from 0 internally and sorted by value, highest first.
//! Bids are compared with exact floating equality; every construction in
//! this crate produces bit-identical repeated bids, so a tie is a tie.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Tolerance for probability sums and winner-share sums.
pub const PROB_TOL: f64 = 1e-12;

/// Player values plus the priority used to break ties outside an
/// equilibrium context.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionInstance {
    values: Vec<f64>,
    tie_priority: Vec<usize>,
    // rank[i] = position of player i in tie_priority
    rank: Vec<usize>,
}

impl AuctionInstance {
    /// Instance whose ties go to the lowest index (the highest value).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::with_priority(values, (0..n).collect())
    }

    pub fn with_priority(values: Vec<f64>, tie_priority: Vec<usize>) -> Result<Self> {
        let n = values.len();
        ensure!(n >= 2, InvalidInput, "need at least two players, got {n}");
        for (i, v) in values.iter().enumerate() {
            ensure!(v.is_finite() && *v >= 0.0, InvalidInput, "value {i} is {v}, must be finite and >= 0");
        }
        ensure!(
            values.windows(2).all(|w| w[0] >= w[1]),
            Invariant,
            "values must be sorted non-increasing: {values:?}"
        );
        ensure!(tie_priority.len() == n, InvalidInput, "tie priority has {} entries for {n} players", tie_priority.len());
        let mut rank = vec![usize::MAX; n];
        for (pos, &p) in tie_priority.iter().enumerate() {
            ensure!(p < n && rank[p] == usize::MAX, Invariant, "tie priority {tie_priority:?} is not a permutation");
            rank[p] = pos;
        }
        Ok(Self { values, tie_priority, rank })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, player: usize) -> f64 {
        self.values[player]
    }

    pub fn tie_priority(&self) -> &[usize] {
        &self.tie_priority
    }

    /// Highest value, the optimal welfare.
    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    /// Same instance with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_priority(self.values.iter().map(|v| v * c).collect(), self.tie_priority.clone())
    }

    pub fn check_profile(&self, bids: &[f64]) -> Result<()> {
        ensure!(
            bids.len() == self.n(),
            InvalidInput,
            "bid profile has {} bids for {} players",
            bids.len(),
            self.n()
        );
        for (i, b) in bids.iter().enumerate() {
            ensure!(b.is_finite() && *b >= 0.0, InvalidInput, "bid {i} is {b}, must be finite and >= 0");
        }
        Ok(())
    }

    /// Winner and price of a single bid profile; ties go to the earliest
    /// player in the tie priority.
    pub fn outcome(&self, bids: &[f64]) -> Result<(usize, f64)> {
        self.check_profile(bids)?;
        Ok(self.outcome_unchecked(bids))
    }

    pub(crate) fn outcome_unchecked(&self, bids: &[f64]) -> (usize, f64) {
        let price = max_bid(bids);
        let winner = (0..bids.len())
            .filter(|&i| bids[i] == price)
            .min_by_key(|&i| self.rank[i])
            .expect("non-empty profile");
        (winner, price)
    }
}

pub(crate) fn max_bid(bids: &[f64]) -> f64 {
    bids.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// One point of a finite joint bid distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub probability: f64,
    pub bids: Vec<f64>,
    /// Share of the item each player receives at this profile; only argmax
    /// bidders may hold a positive share.
    pub winner_shares: Vec<f64>,
}

impl Atom {
    pub fn new(probability: f64, bids: Vec<f64>, winner_shares: Vec<f64>) -> Self {
        Self { probability, bids, winner_shares }
    }

    /// Atom whose item goes entirely to `winner`.
    pub fn pure(probability: f64, bids: Vec<f64>, winner: usize) -> Self {
        let mut shares = vec![0.0; bids.len()];
        shares[winner] = 1.0;
        Self::new(probability, bids, shares)
    }

    /// The winning price (highest bid).
    pub fn price(&self) -> f64 {
        max_bid(&self.bids)
    }

    /// Highest bid among everyone except `player`.
    pub fn max_other(&self, player: usize) -> f64 {
        self.bids
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != player)
            .map(|(_, &b)| b)
            .fold(0.0, f64::max)
    }

    /// The single player holding the whole item, if there is one.
    pub fn sole_winner(&self) -> Option<usize> {
        let mut holders = self.winner_shares.iter().enumerate().filter(|(_, &s)| s > 0.0);
        match (holders.next(), holders.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        ensure!(self.bids.len() == n, InvalidInput, "atom has {} bids, expected {n}", self.bids.len());
        ensure!(self.winner_shares.len() == n, InvalidInput, "atom has {} winner shares, expected {n}", self.winner_shares.len());
        ensure!(
            self.probability > 0.0 && self.probability <= 1.0 + PROB_TOL,
            Invariant,
            "atom probability {} outside (0, 1]",
            self.probability
        );
        for (i, b) in self.bids.iter().enumerate() {
            ensure!(b.is_finite() && *b >= 0.0, InvalidInput, "bid {i} is {b}, must be finite and >= 0");
        }
        let price = self.price();
        let mut total = 0.0;
        for (i, &s) in self.winner_shares.iter().enumerate() {
            ensure!(s.is_finite() && s >= 0.0, Invariant, "winner share {s} of player {i} is negative");
            ensure!(
                s == 0.0 || self.bids[i] == price,
                Invariant,
                "player {i} holds winner share {s} with bid {} below the maximum {price}",
                self.bids[i]
            );
            total += s;
        }
        ensure!((total - 1.0).abs() <= PROB_TOL, Invariant, "winner shares sum to {total}, expected 1");
        Ok(())
    }
}

fn bid_key(bids: &[f64]) -> Vec<u64> {
    // +0.0 folds -0.0 into 0.0
    bids.iter().map(|b| (b + 0.0).to_bits()).collect()
}

/// Finite-support joint bid distribution with explicit winner shares.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteEquilibrium {
    n: usize,
    atoms: Vec<Atom>,
}

impl FiniteEquilibrium {
    /// Validates and wraps the atoms. Probabilities must already sum to one;
    /// nothing is renormalized.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        ensure!(!atoms.is_empty(), InvalidInput, "equilibrium has no atoms");
        let n = atoms[0].bids.len();
        ensure!(n >= 1, InvalidInput, "atoms carry no bids");
        let mut seen = std::collections::HashSet::with_capacity(atoms.len());
        let mut total = 0.0;
        for (k, atom) in atoms.iter().enumerate() {
            atom.validate(n).map_err(|e| match e {
                Error::Invariant(m) => Error::Invariant(format!("atom {k}: {m}")),
                Error::InvalidInput(m) => Error::InvalidInput(format!("atom {k}: {m}")),
                other => other,
            })?;
            ensure!(seen.insert(bid_key(&atom.bids)), Invariant, "atom {k} repeats bid profile {:?}", atom.bids);
            total += atom.probability;
        }
        ensure!((total - 1.0).abs() <= PROB_TOL, Invariant, "atom probabilities sum to {total}, expected 1");
        Ok(Self { n, atoms })
    }

    /// Like [`FiniteEquilibrium::new`], but first drops zero-probability
    /// atoms and merges atoms sharing a bid profile (shares are averaged by
    /// probability). Merged atoms keep first-appearance order.
    pub fn merged(atoms: Vec<Atom>) -> Result<Self> {
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms.into_iter().filter(|a| a.probability > 0.0) {
            match index.get(&bid_key(&atom.bids)) {
                Some(&k) => {
                    let acc = &mut out[k];
                    ensure!(atom.winner_shares.len() == acc.winner_shares.len(), InvalidInput, "atoms disagree on player count");
                    let total = acc.probability + atom.probability;
                    for (s, t) in acc.winner_shares.iter_mut().zip(&atom.winner_shares) {
                        *s = (*s * acc.probability + t * atom.probability) / total;
                    }
                    acc.probability = total;
                }
                None => {
                    index.insert(bid_key(&atom.bids), out.len());
                    out.push(atom);
                }
            }
        }
        Self::new(out)
    }

    /// Distribution over profiles whose winners follow the instance's tie
    /// priority.
    pub fn from_profiles(instance: &AuctionInstance, profiles: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let mut atoms = Vec::with_capacity(profiles.len());
        for (p, bids) in profiles {
            instance.check_profile(&bids)?;
            let (winner, _) = instance.outcome_unchecked(&bids);
            atoms.push(Atom::pure(p, bids, winner));
        }
        Self::merged(atoms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }

    /// Every distinct bid that appears anywhere in the support, ascending.
    pub fn support_bids(&self) -> Vec<f64> {
        let mut bids: Vec<f64> = self.atoms.iter().flat_map(|a| a.bids.iter().map(|b| b + 0.0)).collect();
        bids.sort_by(f64::total_cmp);
        bids.dedup();
        bids
    }

    pub(crate) fn check_instance(&self, instance: &AuctionInstance) -> Result<()> {
        ensure!(
            self.n == instance.n(),
            InvalidInput,
            "equilibrium has {} players, instance has {}",
            self.n,
            instance.n()
        );
        Ok(())
    }
}

/// Expected outcome of a joint distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub win_prob: Vec<f64>,
    pub expected_payment: Vec<f64>,
    pub utility: Vec<f64>,
    pub welfare: f64,
    pub revenue: f64,
}

impl OutcomeSummary {
    pub(crate) fn from_parts(values: &[f64], win_prob: Vec<f64>, expected_payment: Vec<f64>) -> Self {
        let utility = values
            .iter()
            .zip(&win_prob)
            .zip(&expected_payment)
            .map(|((v, p), r)| p * v - r)
            .collect();
        let welfare = values.iter().zip(&win_prob).map(|(v, p)| p * v).sum();
        let revenue = expected_payment.iter().sum();
        Self { win_prob, expected_payment, utility, welfare, revenue }
    }
}

/// Aggregates an equilibrium using its atom-level winner shares (the
/// instance's tie priority plays no role here).
pub fn summarize(instance: &AuctionInstance, eq: &FiniteEquilibrium) -> Result<OutcomeSummary> {
    eq.check_instance(instance)?;
    let n = instance.n();
    let mut win_prob = vec![0.0; n];
    let mut payment = vec![0.0; n];
    for atom in eq.atoms() {
        for i in 0..n {
            let s = atom.winner_shares[i];
            if s > 0.0 {
                win_prob[i] += atom.probability * s;
                payment[i] += atom.probability * s * atom.bids[i];
            }
        }
    }
    Ok(OutcomeSummary::from_parts(instance.values(), win_prob, payment))
}

/// Removes every tie by raising the designated winner's bid by `epsilon`.
/// Atoms whose item is split are first cut into one atom per winner.
pub fn perturb_to_strict(eq: &FiniteEquilibrium, epsilon: f64) -> Result<FiniteEquilibrium> {
    ensure!(epsilon > 0.0 && epsilon.is_finite(), InvalidParameter, "epsilon must be positive, got {epsilon}");
    let mut atoms = Vec::with_capacity(eq.atoms().len());
    for atom in eq.atoms() {
        let price = atom.price();
        let tied = atom.bids.iter().filter(|&&b| b == price).count() > 1;
        if !tied {
            atoms.push(atom.clone());
            continue;
        }
        for (w, &share) in atom.winner_shares.iter().enumerate() {
            if share <= 0.0 {
                continue;
            }
            let mut bids = atom.bids.clone();
            bids[w] += epsilon;
            atoms.push(Atom::pure(atom.probability * share, bids, w));
        }
    }
    FiniteEquilibrium::merged(atoms)
}
