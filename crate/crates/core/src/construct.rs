//! Explicit equilibria: the six-row coarse equilibrium with imperfect
//! welfare, the tight worst-welfare and worst-revenue common-bid
//! constructions, pure-Nash mixtures, and the reduction of an n-bidder
//! equilibrium to two bidders.
//!
//! In a common-bid construction every player bids the same price, drawn from
//! a [`PiecewiseCdf`], and a [`WinnerShare`] says who gets the item at each
//! price. Because everyone bids the price, a fixed deviation to `x` wins
//! exactly when the price is at most `x`, so the deviation payoff is
//! `(v_i - x) F(x)` and [`PiecewiseCdf::best_deviation`] certifies it.

use serde::{Deserialize, Serialize};

use crate::auction::{AuctionInstance, Atom, FiniteEquilibrium, OutcomeSummary, PROB_TOL};
use crate::bounds::{self, beta_of_alpha, bisect, q_of_alpha, CERTIFIED_ALPHA};
use crate::cdf::PiecewiseCdf;
use crate::error::{ensure, Error, Result};

/// Required accuracy of Alice's utility in the worst-welfare construction.
pub const ASSIGNMENT_TOL: f64 = 1e-10;

/// Default offset for the six-row example.
pub const TABLE1_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomShares {
    pub x: f64,
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareInterval {
    pub lo: f64,
    pub hi: f64,
    pub shares: Vec<f64>,
}

/// Piecewise-constant allocation over prices: one entry per price atom and
/// contiguous intervals covering the continuous part on `[0, top]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WinnerShare {
    pub atoms: Vec<AtomShares>,
    pub intervals: Vec<ShareInterval>,
}

fn check_shares(shares: &[f64], n: usize, what: &str) -> Result<()> {
    ensure!(shares.len() == n, InvalidInput, "{what} has {} shares for {n} players", shares.len());
    ensure!(shares.iter().all(|s| *s >= 0.0 && s.is_finite()), Invariant, "{what} has a negative share");
    let total: f64 = shares.iter().sum();
    ensure!((total - 1.0).abs() <= PROB_TOL, Invariant, "{what} shares sum to {total}");
    Ok(())
}

/// Common-bid equilibrium with a continuous price distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEquilibrium {
    instance: AuctionInstance,
    price_cdf: PiecewiseCdf,
    winner_share: WinnerShare,
}

impl ContinuousEquilibrium {
    pub fn new(instance: AuctionInstance, price_cdf: PiecewiseCdf, winner_share: WinnerShare) -> Result<Self> {
        let n = instance.n();
        ensure!(
            winner_share.atoms.len() == price_cdf.atoms().len()
                && winner_share.atoms.iter().zip(price_cdf.atoms()).all(|(s, a)| s.x == a.x),
            Invariant,
            "winner shares must list exactly the price atoms"
        );
        for s in &winner_share.atoms {
            check_shares(&s.shares, n, &format!("atom at {}", s.x))?;
        }
        if !price_cdf.segments().is_empty() {
            let iv = &winner_share.intervals;
            ensure!(!iv.is_empty(), Invariant, "continuous price mass has no winner");
            ensure!(iv[0].lo == 0.0, Invariant, "share intervals must start at 0");
            ensure!(iv.windows(2).all(|w| w[0].hi == w[1].lo), Invariant, "share intervals must be contiguous");
            ensure!(iv.last().unwrap().hi >= price_cdf.top(), Invariant, "share intervals stop before the top price");
        }
        for s in &winner_share.intervals {
            ensure!(s.lo <= s.hi, Invariant, "share interval [{}, {}] is reversed", s.lo, s.hi);
            check_shares(&s.shares, n, &format!("interval [{}, {}]", s.lo, s.hi))?;
        }
        Ok(Self { instance, price_cdf, winner_share })
    }

    pub fn instance(&self) -> &AuctionInstance {
        &self.instance
    }

    pub fn price_cdf(&self) -> &PiecewiseCdf {
        &self.price_cdf
    }

    pub fn winner_share(&self) -> &WinnerShare {
        &self.winner_share
    }

    /// Exact outcome from the closed-form mass and first moment of each piece.
    pub fn summary(&self) -> OutcomeSummary {
        let n = self.instance.n();
        let mut win = vec![0.0; n];
        let mut pay = vec![0.0; n];
        for s in &self.winner_share.atoms {
            let m = self.price_cdf.atom_mass(s.x);
            for i in 0..n {
                win[i] += m * s.shares[i];
                pay[i] += m * s.x * s.shares[i];
            }
        }
        for s in &self.winner_share.intervals {
            let m = self.price_cdf.continuous_mass(s.lo, s.hi);
            let mom = self.price_cdf.continuous_moment(s.lo, s.hi);
            for i in 0..n {
                win[i] += m * s.shares[i];
                pay[i] += mom * s.shares[i];
            }
        }
        OutcomeSummary::from_parts(self.instance.values(), win, pay)
    }

    /// `sup_x (v_i - x) F(x) - u_i` per player; non-positive means no
    /// fixed bid is profitable.
    pub fn deviation_gains(&self) -> Vec<f64> {
        let summary = self.summary();
        (0..self.instance.n())
            .map(|i| self.price_cdf.sup_deviation_utility(self.instance.value(i)) - summary.utility[i])
            .collect()
    }

    pub fn max_deviation_gain(&self) -> f64 {
        self.deviation_gains().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the common bid never exceeds any bidder's value.
    pub fn no_overbidding(&self) -> bool {
        let lowest = self.instance.values().iter().copied().fold(f64::INFINITY, f64::min);
        self.price_cdf.top() <= lowest
    }
}

/// Where Alice wins in the worst-welfare construction: the continuous
/// prices in `[start, end]` plus `atom_share` of the atom at price 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinnerAssignment {
    pub start: f64,
    pub end: f64,
    pub atom_share: f64,
    pub win_prob: f64,
    pub utility: f64,
    /// `|win probability - q|`.
    pub residual: f64,
}

/// Alice (value 1) wins the price-quantile window `[w, w + q]`.
fn window_assignment(cdf: &PiecewiseCdf, q: f64, w: f64) -> Result<WinnerAssignment> {
    let m0 = cdf.atom_mass(0.0);
    let hi_q = (w + q).min(1.0);
    let atom_part = (hi_q.min(m0) - w).max(0.0);
    let start = if w <= m0 { 0.0 } else { cdf.inverse(w)? };
    let end = if hi_q <= m0 { 0.0 } else { cdf.inverse(hi_q)? };
    let mass = atom_part + cdf.continuous_mass(start, end);
    let utility = mass - cdf.continuous_moment(start, end);
    Ok(WinnerAssignment {
        start,
        end,
        atom_share: if m0 > 0.0 { atom_part / m0 } else { 0.0 },
        win_prob: mass,
        utility,
        residual: (mass - q).abs(),
    })
}

/// Finds a contiguous price window on which Alice wins with probability
/// `q_of_alpha(alpha)` and collects utility `alpha`. Her utility falls
/// monotonically as the window slides up from the lowest prices (`u_max`)
/// to the highest (`u_min`).
pub fn solve_winner_assignment(alpha: f64) -> Result<WinnerAssignment> {
    let v = 1.0 - alpha;
    let beta = beta_of_alpha(alpha);
    let q = q_of_alpha(alpha);
    ensure!(q > 0.0 && q < 1.0, Construction, "win probability q={q} outside (0, 1)");
    let cdf = PiecewiseCdf::min_envelope(alpha, beta, v)?;
    let lo = window_assignment(&cdf, q, 0.0)?;
    let hi = window_assignment(&cdf, q, 1.0 - q)?;
    ensure!(
        hi.utility <= alpha && alpha <= lo.utility,
        Construction,
        "alpha={alpha} outside the achievable utility range [{}, {}]",
        hi.utility,
        lo.utility
    );
    let mut gap = |w: f64| window_assignment(&cdf, q, w).map_or(f64::NAN, |a| a.utility - alpha);
    let w = bisect(&mut gap, 0.0, 1.0 - q, 1e-15)?;
    let assignment = window_assignment(&cdf, q, w)?;
    ensure!(
        (assignment.utility - alpha).abs() <= ASSIGNMENT_TOL,
        Construction,
        "utility {} misses alpha={alpha}",
        assignment.utility
    );
    Ok(assignment)
}

/// Two bidders with values 1 and `1 - alpha` bid a common price from the
/// min-envelope distribution; Alice's winning window is chosen so the
/// utilities are `alpha` and the stationary `beta`.
pub fn construct_worst_welfare(alpha: f64) -> Result<ContinuousEquilibrium> {
    let (lo, hi) = CERTIFIED_ALPHA;
    ensure!(
        (lo..=hi).contains(&alpha),
        InvalidParameter,
        "alpha={alpha} outside the certified range [{lo}, {hi}]"
    );
    let v = 1.0 - alpha;
    let beta = beta_of_alpha(alpha);
    let cdf = PiecewiseCdf::min_envelope(alpha, beta, v)?;
    let a = solve_winner_assignment(alpha)?;

    let alice = vec![1.0, 0.0];
    let bob = vec![0.0, 1.0];
    let atoms = vec![AtomShares { x: 0.0, shares: vec![a.atom_share, 1.0 - a.atom_share] }];
    let mut intervals = Vec::new();
    for (l, h, s) in [(0.0, a.start, &bob), (a.start, a.end, &alice), (a.end, cdf.top(), &bob)] {
        if h > l {
            intervals.push(ShareInterval { lo: l, hi: h, shares: s.clone() });
        }
    }
    let instance = AuctionInstance::new(vec![1.0, v])?;
    ContinuousEquilibrium::new(instance, cdf, WinnerShare { atoms, intervals })
}

/// [`construct_worst_welfare`] at the welfare-minimizing `alpha`.
pub fn construct_worst_welfare_optimal() -> Result<ContinuousEquilibrium> {
    let alpha = bounds::minimize_welfare()?.args["alpha"];
    construct_worst_welfare(alpha)
}

/// Boundary-case construction with `v = 1 - alpha` and `beta = v alpha`:
/// Alice wins exactly when the price is 0. It is an equilibrium when
/// `alpha` solves `2x - ln x - 2 = 0`.
pub fn construct_case1(alpha: f64) -> Result<ContinuousEquilibrium> {
    ensure!(alpha > 0.0 && alpha < 1.0, InvalidParameter, "alpha={alpha} outside (0, 1)");
    let v = 1.0 - alpha;
    let cdf = PiecewiseCdf::min_envelope(alpha, v * alpha, v)?;
    let ws = WinnerShare {
        atoms: vec![AtomShares { x: 0.0, shares: vec![1.0, 0.0] }],
        intervals: vec![ShareInterval { lo: 0.0, hi: cdf.top(), shares: vec![0.0, 1.0] }],
    };
    ContinuousEquilibrium::new(AuctionInstance::new(vec![1.0, v])?, cdf, ws)
}

/// `n` bidders of value `v` bid a common price with CDF `alpha / (v - x)`,
/// `alpha = v e^{-(n-1)}`, and split the item evenly at every price.
pub fn construct_symmetric_worst_revenue(n: usize, v: f64) -> Result<ContinuousEquilibrium> {
    ensure!(n >= 2, InvalidParameter, "need n >= 2, got {n}");
    ensure!(v > 0.0 && v.is_finite(), InvalidParameter, "need v > 0, got {v}");
    let alpha = bounds::symmetric_alpha(n, v);
    let cdf = PiecewiseCdf::reciprocal(alpha, v)?;
    let even = vec![1.0 / n as f64; n];
    let ws = WinnerShare {
        atoms: vec![AtomShares { x: 0.0, shares: even.clone() }],
        intervals: vec![ShareInterval { lo: 0.0, hi: cdf.top(), shares: even }],
    };
    ContinuousEquilibrium::new(AuctionInstance::new(vec![v; n])?, cdf, ws)
}

/// The six-row coarse equilibrium with values 2 (player 0) and 1
/// (player 1). The value-1 bidder wins the two lowest rows by `epsilon`;
/// the other rows she undercuts by `epsilon`.
pub fn construct_table1(epsilon: f64) -> Result<(AuctionInstance, FiniteEquilibrium)> {
    ensure!(epsilon > 0.0 && epsilon <= 1e-3, InvalidParameter, "epsilon={epsilon} outside (0, 1e-3]");
    let e = epsilon;
    let rows: [(f64, f64, f64, usize); 6] = [
        (0.02, 0.0, e, 1),
        (0.02, 0.1, 0.1 + e, 1),
        (0.03, 0.5, 0.5 - e, 0),
        (0.11, 0.8, 0.8 - e, 0),
        (0.19, 0.9, 0.9 - e, 0),
        (0.63, 1.0, 1.0 - e, 0),
    ];
    let atoms = rows.iter().map(|&(p, high, low, w)| Atom::pure(p, vec![high, low], w)).collect();
    Ok((AuctionInstance::new(vec![2.0, 1.0])?, FiniteEquilibrium::new(atoms)?))
}

/// Both bidders bid each listed price and the high-value bidder wins.
pub fn construct_pure_nash_mixture(v1: f64, v2: f64, price_atoms: &[(f64, f64)]) -> Result<(AuctionInstance, FiniteEquilibrium)> {
    ensure!(v1 >= v2, InvalidInput, "need v1 >= v2");
    for &(price, _) in price_atoms {
        ensure!(
            (v2..=v1).contains(&price),
            Precondition,
            "price {price} outside the pure-equilibrium range [{v2}, {v1}]"
        );
    }
    let instance = AuctionInstance::new(vec![v1, v2])?;
    let atoms = price_atoms.iter().map(|&(price, mass)| Atom::pure(mass, vec![price, price], 0)).collect();
    Ok((instance, FiniteEquilibrium::merged(atoms)?))
}

/// Collapses an n-bidder equilibrium onto the two highest-valued bidders.
///
/// Each survivor's new bid is the highest bid among itself and the dropped
/// bidders, so the competing bid each survivor faces is unchanged and so are
/// its deviation payoffs. Wins of dropped bidders go to player 0, whose new
/// bid then equals the price. Prices, revenue and the price distribution
/// are unchanged.
pub fn reduce_to_two(instance: &AuctionInstance, eq: &FiniteEquilibrium) -> Result<(AuctionInstance, FiniteEquilibrium)> {
    ensure!(instance.n() >= 3, InvalidInput, "reduction needs at least 3 players, got {}", instance.n());
    ensure!(eq.n() == instance.n(), InvalidInput, "equilibrium and instance disagree on player count");
    let priority: Vec<usize> = instance.tie_priority().iter().copied().filter(|&p| p < 2).collect();
    let reduced = AuctionInstance::with_priority(instance.values()[..2].to_vec(), priority)?;
    let atoms = eq
        .atoms()
        .iter()
        .map(|a| {
            let dropped = a.bids[2..].iter().copied().fold(0.0, f64::max);
            let bids = vec![a.bids[0].max(dropped), a.bids[1].max(dropped)];
            let moved: f64 = a.winner_shares[2..].iter().sum();
            Atom::new(a.probability, bids, vec![a.winner_shares[0] + moved, a.winner_shares[1]])
        })
        .collect();
    Ok((reduced, FiniteEquilibrium::merged(atoms)?))
}

/// Rounds the common price down to the grid `{j top / k : j = 0..=k}`.
/// Atom masses are kept, each cell's continuous mass becomes one atom, and
/// winner shares are integrated over the cell.
pub fn discretize(ce: &ContinuousEquilibrium, k: usize) -> Result<FiniteEquilibrium> {
    ensure!(k >= 2, InvalidParameter, "need k >= 2, got {k}");
    let n = ce.instance.n();
    let cdf = &ce.price_cdf;
    let top = cdf.top();
    let grid: Vec<f64> = (0..=k).map(|j| if j == k { top } else { top * j as f64 / k as f64 }).collect();
    let cell_of = |x: f64| grid.partition_point(|&g| g <= x).saturating_sub(1);

    let mut mass = vec![vec![0.0; n]; k + 1];
    for s in &ce.winner_share.atoms {
        let m = cdf.atom_mass(s.x);
        let cell = &mut mass[cell_of(s.x)];
        for i in 0..n {
            cell[i] += m * s.shares[i];
        }
    }
    for s in &ce.winner_share.intervals {
        for j in cell_of(s.lo)..k {
            let (l, h) = (grid[j].max(s.lo), grid[j + 1].min(s.hi));
            if h <= l {
                if grid[j] >= s.hi {
                    break;
                }
                continue;
            }
            let m = cdf.continuous_mass(l, h);
            for i in 0..n {
                mass[j][i] += m * s.shares[i];
            }
        }
    }

    let mut atoms = Vec::new();
    for (j, cell) in mass.into_iter().enumerate() {
        let total: f64 = cell.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let shares = cell.iter().map(|m| m / total).collect();
        atoms.push(Atom::new(total, vec![grid[j]; n], shares));
    }
    let total: f64 = atoms.iter().map(|a| a.probability).sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::Invariant(format!("discretized mass is {total}")));
    }
    FiniteEquilibrium::new(atoms)
}
