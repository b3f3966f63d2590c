mod common;

use aucteq::auction::{summarize, AuctionInstance};
use aucteq::lp::*;
use aucteq::verify::{verify_ce, verify_cce, DeviationPolicy, EquilibriumClass};
use common::vertex_enumeration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const E: f64 = std::f64::consts::E;
const CCE: EquilibriumClass = EquilibriumClass::Cce;
const CE: EquilibriumClass = EquilibriumClass::Ce;

fn solve_optimal(p: &LpProblem) -> LpSolution {
    let s = solve_lp(p).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    s
}

#[test]
fn small_equilibrium_lps_match_vertex_enumeration() {
    let inst = AuctionInstance::new(vec![1.0, 1.0]).unwrap();
    let grid = BidGrid::new(&inst, vec![0.0, 0.5, 1.0], false).unwrap();
    for ties in [TieResolution::Priority, TieResolution::Free] {
        for objective in [Objective::Revenue, Objective::Welfare] {
            for sense in [Sense::Minimize, Sense::Maximize] {
                let lp = build_lp(&inst, &grid, LpQuery::new(CCE, objective, sense).with_ties(ties)).unwrap();
                if ties == TieResolution::Priority {
                    assert_eq!(lp.variables.len(), 9);
                }
                let s = solve_optimal(&lp.problem);
                let oracle = vertex_enumeration(&lp.problem).unwrap();
                assert!((s.objective - oracle).abs() < 1e-9, "{ties:?} {objective:?} {sense:?}: {} vs {oracle}", s.objective);
            }
        }
    }
    let grid = BidGrid::new(&inst, vec![0.0, 1.0], false).unwrap();
    for sense in [Sense::Minimize, Sense::Maximize] {
        let lp = build_lp(&inst, &grid, LpQuery::new(CE, Objective::Revenue, sense)).unwrap();
        let s = solve_optimal(&lp.problem);
        assert!((s.objective - vertex_enumeration(&lp.problem).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn random_lps_satisfy_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..10 {
        let (n, m) = (50, 30);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..10.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let maximize = case % 2 == 0;
        let (sense, relation) = if maximize { (Sense::Maximize, Relation::Le) } else { (Sense::Minimize, Relation::Ge) };
        let mut p = LpProblem::new(sense, c.clone());
        for (row, &rhs) in rows.iter().zip(&b) {
            p.add(row.clone(), relation, rhs);
        }
        let s = solve_optimal(&p);
        assert!(s.certificate.max_residual <= 1e-9);
        assert!(s.x.iter().all(|&x| x >= 0.0));
        // duals belong to the minimization form; flip them for a maximum
        let y: Vec<f64> = s.certificate.duals.iter().map(|&d| if maximize { -d } else { d }).collect();
        assert!(y.iter().all(|&yi| yi >= -1e-9), "case {case}: dual signs");
        for j in 0..n {
            let col: f64 = (0..m).map(|i| rows[i][j] * y[i]).sum();
            if maximize {
                assert!(col >= c[j] - 1e-9);
            } else {
                assert!(col <= c[j] + 1e-9);
            }
        }
        let by: f64 = b.iter().zip(&y).map(|(b, y)| b * y).sum();
        assert!((by - s.objective).abs() < 1e-9 * (1.0 + by.abs()), "case {case}: {by} vs {}", s.objective);
        assert!((s.certificate.dual_bound - s.objective).abs() < 1e-9 * (1.0 + by.abs()));
    }
}

#[test]
fn trivial_lps() {
    let mut p = LpProblem::new(Sense::Minimize, vec![1.0, 0.0]);
    p.add(vec![1.0, 1.0], Relation::Eq, 1.0);
    assert_eq!(solve_optimal(&p).objective, 0.0);
    let inst = AuctionInstance::new(vec![1.0, 1.0]).unwrap();
    let grid = BidGrid::new(&inst, vec![0.0, 1.0], false).unwrap();
    let lp = build_lp(&inst, &grid, LpQuery::new(CCE, Objective::Welfare, Sense::Minimize)).unwrap();
    assert!(lp.problem.validate().is_ok());
}

#[test]
fn single_point_grid_is_infeasible() {
    // the tie loser at (0, 0) gains its value by winning the tie
    let inst = AuctionInstance::new(vec![2.0, 1.0]).unwrap();
    let grid = BidGrid::new(&inst, vec![0.0], false).unwrap();
    let lp = build_lp(&inst, &grid, LpQuery::new(CCE, Objective::Revenue, Sense::Minimize)).unwrap();
    assert_eq!(solve_lp(&lp.problem).unwrap().status, LpStatus::Infeasible);
    assert!(vertex_enumeration(&lp.problem).is_none());
    assert!(extremal_equilibrium(&inst, &grid, LpQuery::new(CCE, Objective::Revenue, Sense::Minimize)).is_err());
}

#[test]
fn ce_optima_are_efficient() {
    for values in [vec![2.0, 1.0], vec![1.0, 1.0]] {
        let inst = AuctionInstance::new(values.clone()).unwrap();
        let grid = BidGrid::uniform(&inst, 20, false).unwrap();
        let w = extremal_equilibrium(&inst, &grid, LpQuery::new(CE, Objective::Welfare, Sense::Minimize)).unwrap();
        assert!((w.value - values[0]).abs() < 1e-9);
        let r = extremal_equilibrium(&inst, &grid, LpQuery::new(CE, Objective::Revenue, Sense::Minimize)).unwrap();
        assert!(r.value >= values[1] - 1e-9);
        for ex in [&w, &r] {
            assert!(verify_ce(&inst, &ex.equilibrium, 1e-7, DeviationPolicy::DeviatorWins).unwrap().pass);
        }
    }
}

#[test]
fn cce_optima_respect_the_floors() {
    let alpha = 0.274322;
    for k in [10, 20, 40] {
        let inst = AuctionInstance::new(vec![1.0, 1.0 - alpha]).unwrap();
        let grid = BidGrid::uniform(&inst, k, true).unwrap();
        let w = extremal_equilibrium(&inst, &grid, LpQuery::new(CCE, Objective::Welfare, Sense::Minimize)).unwrap();
        assert!(w.value >= 0.813559 - 1e-6, "k={k}: {}", w.value);
        for values in [vec![1.0, 1.0], vec![2.0, 1.0], vec![3.0, 2.0]] {
            let inst = AuctionInstance::new(values.clone()).unwrap();
            let grid = BidGrid::uniform(&inst, k, false).unwrap();
            let r = extremal_equilibrium(&inst, &grid, LpQuery::new(CCE, Objective::Revenue, Sense::Minimize)).unwrap();
            assert!(r.value >= (1.0 - 2.0 / E) * values[1] - 1e-6);
        }
    }
    let inst = AuctionInstance::new(vec![1.0, 1.0]).unwrap();
    let grid = BidGrid::uniform(&inst, 40, false).unwrap();
    let r = extremal_equilibrium(&inst, &grid, LpQuery::new(CCE, Objective::Revenue, Sense::Minimize)).unwrap();
    assert!((0.2642..=0.2943).contains(&r.value), "{}", r.value);
}

#[test]
fn optima_are_feasible_equilibria() {
    let inst = AuctionInstance::new(vec![1.0, 0.6, 0.3]).unwrap();
    let grid = BidGrid::uniform(&inst, 5, false).unwrap();
    for objective in [Objective::Welfare, Objective::Revenue] {
        for sense in [Sense::Minimize, Sense::Maximize] {
            let q = LpQuery::new(CCE, objective, sense);
            let lp = build_lp(&inst, &grid, q).unwrap();
            let ex = extremal_equilibrium(&inst, &grid, q).unwrap();
            let total: f64 = ex.solution.x.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(ex.solution.x.iter().all(|&x| x >= -1e-12));
            assert!(lp.problem.max_residual(&ex.solution.x) < 1e-9);
            assert!(verify_cce(&inst, &ex.equilibrium, 1e-7, DeviationPolicy::DeviatorWins).unwrap().pass);
            let s = summarize(&inst, &ex.equilibrium).unwrap();
            let value = match objective {
                Objective::Welfare => s.welfare,
                Objective::Revenue => s.revenue,
            };
            assert!((value - ex.value).abs() < 1e-9);
        }
    }
}

#[test]
fn ce_minimum_dominates_cce_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..10 {
        let v1 = rng.gen_range(2..=10) as f64 / 4.0;
        let v2 = rng.gen_range(1..=(v1 * 4.0) as u32) as f64 / 4.0;
        let inst = AuctionInstance::new(vec![v1, v2]).unwrap();
        let grid = BidGrid::uniform(&inst, 6, rng.gen_bool(0.5)).unwrap();
        for objective in [Objective::Welfare, Objective::Revenue] {
            let cce = extremal_equilibrium(&inst, &grid, LpQuery::new(CCE, objective, Sense::Minimize)).unwrap();
            let ce = extremal_equilibrium(&inst, &grid, LpQuery::new(CE, objective, Sense::Minimize)).unwrap();
            assert!(ce.value >= cce.value - 1e-9, "{v1},{v2} {objective:?}");
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let inst = AuctionInstance::new(vec![1.0, 0.7257]).unwrap();
    let grid = BidGrid::uniform(&inst, 20, true).unwrap();
    let q = LpQuery::new(CCE, Objective::Welfare, Sense::Minimize);
    let a = extremal_equilibrium(&inst, &grid, q).unwrap();
    let b = extremal_equilibrium(&inst, &grid, q).unwrap();
    assert_eq!(a.solution.x.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.solution.x.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.equilibrium, b.equilibrium);
}

#[test]
fn priority_ties_give_one_column_per_profile() {
    let inst = AuctionInstance::new(vec![1.0, 0.5, 0.5]).unwrap();
    let grid = BidGrid::uniform(&inst, 4, true).unwrap();
    let lp = build_lp(&inst, &grid, LpQuery::new(CCE, Objective::Revenue, Sense::Minimize).with_ties(TieResolution::Priority)).unwrap();
    let expected: usize = (0..3).map(|i| grid.num_admissible(i)).product();
    assert_eq!(lp.variables.len(), expected);
    let free = build_lp(&inst, &grid, LpQuery::new(CCE, Objective::Revenue, Sense::Minimize)).unwrap();
    assert!(free.variables.len() > expected);
}
