//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test beyond plain data accessors.
#![allow(dead_code)]

use aucteq::auction::{AuctionInstance, FiniteEquilibrium};
use aucteq::lp::{LpProblem, Relation, Sense};
use aucteq::verify::DeviationPolicy;

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m)), f(0.5 * (m + b)));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            go(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + go(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    go(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 48)
}

/// On-path utility of `player`, straight from the atoms.
pub fn on_path_utility(instance: &AuctionInstance, eq: &FiniteEquilibrium, player: usize) -> f64 {
    eq.atoms()
        .iter()
        .map(|a| a.probability * a.winner_shares[player] * (instance.value(player) - a.bids[player]))
        .sum()
}

fn highest_other(bids: &[f64], player: usize) -> f64 {
    let mut m = 0.0_f64;
    for (j, &b) in bids.iter().enumerate() {
        if j != player {
            m = m.max(b);
        }
    }
    m
}

/// Utility of a fixed deviation, by enumeration of atoms.
pub fn fixed_bid_utility(instance: &AuctionInstance, eq: &FiniteEquilibrium, player: usize, bid: f64, policy: DeviationPolicy) -> f64 {
    let v = instance.value(player);
    eq.atoms()
        .iter()
        .filter(|a| {
            let m = highest_other(&a.bids, player);
            match policy {
                DeviationPolicy::DeviatorWins => bid >= m,
                DeviationPolicy::DeviatorLoses => bid > m,
            }
        })
        .map(|a| a.probability * (v - bid))
        .sum()
}

fn deviation_set(eq: &FiniteEquilibrium, mut bids: Vec<f64>, nudge: bool) -> Vec<f64> {
    for a in eq.atoms() {
        for &b in &a.bids {
            bids.push(b);
            if nudge {
                bids.extend([b + 1e-12, (b - 1e-12).max(0.0)]);
            }
        }
    }
    bids
}

/// Largest CCE regret over a dense scan of deviations: a uniform grid on
/// `[0, max value]` (just 0 when `resolution` is 0), every support bid, and
/// with `nudge` points just around them.
pub fn scanned_cce_regret(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    policy: DeviationPolicy,
    resolution: usize,
    nudge: bool,
) -> f64 {
    let top = instance.max_value();
    let grid = (0..=resolution).map(|j| top * (j as f64 / resolution.max(1) as f64)).collect();
    let bids = deviation_set(eq, grid, nudge);
    (0..instance.n())
        .map(|i| {
            let u = on_path_utility(instance, eq, i);
            bids.iter().map(|&d| fixed_bid_utility(instance, eq, i, d, policy) - u).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Largest conditional (CE) regret by scanning, for every player and every
/// recommended bid, the same deviation set as [`scanned_cce_regret`].
pub fn scanned_ce_regret(
    instance: &AuctionInstance,
    eq: &FiniteEquilibrium,
    policy: DeviationPolicy,
    resolution: usize,
    nudge: bool,
) -> f64 {
    let top = instance.max_value();
    let grid = (0..=resolution).map(|j| top * (j as f64 / resolution.max(1) as f64)).collect();
    let bids = deviation_set(eq, grid, nudge);
    let mut worst = 0.0_f64;
    for i in 0..instance.n() {
        let v = instance.value(i);
        let mut recs: Vec<f64> = eq.atoms().iter().map(|a| a.bids[i]).collect();
        recs.sort_by(f64::total_cmp);
        recs.dedup();
        for r in recs {
            let cell: Vec<_> = eq.atoms().iter().filter(|a| a.bids[i] == r).collect();
            let p: f64 = cell.iter().map(|a| a.probability).sum();
            if p < 1e-15 {
                continue;
            }
            let on: f64 = cell.iter().map(|a| a.probability * a.winner_shares[i] * (v - r)).sum();
            for &d in &bids {
                let dev: f64 = cell
                    .iter()
                    .filter(|a| {
                        let m = highest_other(&a.bids, i);
                        match policy {
                            DeviationPolicy::DeviatorWins => d >= m,
                            DeviationPolicy::DeviatorLoses => d > m,
                        }
                    })
                    .map(|a| a.probability * (v - d))
                    .sum();
                worst = worst.max((dev - on) / p);
            }
        }
    }
    worst
}

/// Solves a square system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-11 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Optimum of a small LP by enumerating every basic solution of its
/// equality form (slack per inequality). `None` when infeasible.
pub fn vertex_enumeration(problem: &LpProblem) -> Option<f64> {
    let n = problem.num_vars();
    let rows = &problem.constraints;
    let slacks: Vec<usize> = (0..rows.len()).filter(|&r| rows[r].relation != Relation::Eq).collect();
    let cols = n + slacks.len();
    let m = rows.len();
    let mut matrix = vec![vec![0.0; cols]; m];
    for (r, row) in rows.iter().enumerate() {
        matrix[r][..n].copy_from_slice(&row.coefficients);
    }
    for (k, &r) in slacks.iter().enumerate() {
        matrix[r][n + k] = if rows[r].relation == Relation::Le { 1.0 } else { -1.0 };
    }
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let mut best: Option<f64> = None;
    let mut basis: Vec<usize> = (0..m).collect();
    loop {
        let a: Vec<Vec<f64>> = (0..m).map(|r| basis.iter().map(|&c| matrix[r][c]).collect()).collect();
        if let Some(xb) = gauss_solve(a, rhs.clone()) {
            if xb.iter().all(|&x| x >= -1e-9) {
                let mut x = vec![0.0; n];
                for (k, &c) in basis.iter().enumerate() {
                    if c < n {
                        x[c] = xb[k];
                    }
                }
                if problem.max_residual(&x) <= 1e-9 {
                    let z = problem.objective_value(&x);
                    best = Some(match (best, problem.sense) {
                        (None, _) => z,
                        (Some(b), Sense::Minimize) => b.min(z),
                        (Some(b), Sense::Maximize) => b.max(z),
                    });
                }
            }
        }
        // next m-combination of 0..cols
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if basis[i] < cols - m + i {
                basis[i] += 1;
                for j in i + 1..m {
                    basis[j] = basis[j - 1] + 1;
                }
                break;
            }
        }
    }
}
