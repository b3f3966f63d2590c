//! Winning-price distributions built from point masses and reciprocal
//! pieces `F(x) = a / (b - x)`.
//!
//! Every quantity (mean, inverse, deviation payoff) is evaluated in closed
//! form per piece; nothing here integrates numerically.

use crate::error::{ensure, Result};

/// Tolerance on CDF continuity and on reaching one at `top`.
pub const CDF_TOL: f64 = 1e-12;

/// `F(x) = a / (b - x)` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocalSegment {
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ReciprocalSegment {
    pub fn new(a: f64, b: f64, lo: f64, hi: f64) -> Self {
        Self { a, b, lo, hi }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.a / (self.b - x)
    }

    /// `∫_l^r (1 - F(x)) dx`.
    fn tail_integral(&self, l: f64, r: f64) -> f64 {
        (r - l) + self.a * ((self.b - r) / (self.b - l)).ln()
    }

    /// Probability mass on `(l, r]`.
    fn mass(&self, l: f64, r: f64) -> f64 {
        self.value(r) - self.value(l)
    }

    /// `∫_l^r x dF(x)`, using the antiderivative `a (b / (b - x) + ln(b - x))`.
    fn moment(&self, l: f64, r: f64) -> f64 {
        let (bl, br) = (self.b - l, self.b - r);
        self.a * (self.b / br - self.b / bl + (br / bl).ln())
    }

    fn validate(&self, k: usize) -> Result<()> {
        let Self { a, b, lo, hi } = *self;
        ensure!(
            [a, b, lo, hi].iter().all(|x| x.is_finite()),
            InvalidInput,
            "segment {k} has a non-finite field"
        );
        ensure!(a > 0.0 && b > 0.0, InvalidInput, "segment {k}: a={a}, b={b} must be positive");
        ensure!(0.0 <= lo && lo <= hi && hi < b, Invariant, "segment {k}: need 0 <= lo <= hi < b, got lo={lo} hi={hi} b={b}");
        ensure!(self.value(hi) <= 1.0 + CDF_TOL, Invariant, "segment {k} exceeds 1 at hi={hi}");
        Ok(())
    }
}

/// A point mass of the price distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceAtom {
    pub x: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Atom(usize),
    Segment(usize),
}

/// Right-continuous CDF of the winning price on `[0, top]`.
///
/// Atoms are stored explicitly. An atom may sit at the left end of a
/// segment, in which case the segment's value at `lo` already includes it;
/// otherwise the CDF is constant between pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf {
    atoms: Vec<PriceAtom>,
    segments: Vec<ReciprocalSegment>,
    top: f64,
    pieces: Vec<Piece>,
}

impl PiecewiseCdf {
    pub fn new(atoms: Vec<PriceAtom>, segments: Vec<ReciprocalSegment>, top: f64) -> Result<Self> {
        for (k, atom) in atoms.iter().enumerate() {
            ensure!(atom.x.is_finite() && atom.x >= 0.0, InvalidInput, "atom {k} at {} must be finite and >= 0", atom.x);
            ensure!(atom.mass > 0.0 && atom.mass <= 1.0 + CDF_TOL, Invariant, "atom {k} has mass {}", atom.mass);
        }
        ensure!(atoms.windows(2).all(|w| w[0].x < w[1].x), Invariant, "atoms must be strictly increasing in price");
        for (k, seg) in segments.iter().enumerate() {
            seg.validate(k)?;
        }
        ensure!(segments.windows(2).all(|w| w[0].hi <= w[1].lo), Invariant, "segments must be ordered and disjoint");
        for atom in &atoms {
            ensure!(
                !segments.iter().any(|s| atom.x > s.lo && atom.x <= s.hi),
                Invariant,
                "atom at {} lies inside a segment",
                atom.x
            );
        }

        // merge into price order; an atom at a segment's lo comes first
        let mut pieces = Vec::with_capacity(atoms.len() + segments.len());
        let (mut i, mut j) = (0, 0);
        while i < atoms.len() || j < segments.len() {
            let take_atom = j == segments.len() || (i < atoms.len() && atoms[i].x <= segments[j].lo);
            if take_atom {
                pieces.push(Piece::Atom(i));
                i += 1;
            } else {
                pieces.push(Piece::Segment(j));
                j += 1;
            }
        }

        let mut running = 0.0;
        let mut end = 0.0;
        for piece in &pieces {
            match *piece {
                Piece::Atom(k) => {
                    running += atoms[k].mass;
                    end = atoms[k].x;
                }
                Piece::Segment(k) => {
                    let s = &segments[k];
                    ensure!(
                        (s.value(s.lo) - running).abs() <= CDF_TOL,
                        Invariant,
                        "segment {k} starts at F={} but the mass below is {running}; jumps need an explicit atom",
                        s.value(s.lo)
                    );
                    running = s.value(s.hi);
                    end = s.hi;
                }
            }
            ensure!(running <= 1.0 + CDF_TOL, Invariant, "CDF exceeds 1 ({running}) at {end}");
        }
        ensure!(!pieces.is_empty(), InvalidInput, "distribution has no mass");
        ensure!((running - 1.0).abs() <= CDF_TOL, Invariant, "CDF reaches {running} instead of 1");
        ensure!(
            top.is_finite() && (top - end).abs() <= CDF_TOL * end.max(1.0),
            Invariant,
            "top is {top} but the CDF reaches 1 at {end}"
        );
        Ok(Self { atoms, segments, top: end, pieces })
    }

    /// `G(x) = a / (b - x)` on `[0, b - a]`, with the implied atom `a / b` at 0.
    pub fn reciprocal(a: f64, b: f64) -> Result<Self> {
        ensure!(a > 0.0 && b > 0.0 && a <= b, InvalidParameter, "reciprocal CDF needs 0 < a <= b, got a={a}, b={b}");
        let atoms = vec![PriceAtom { x: 0.0, mass: a / b }];
        if a == b {
            return Self::new(atoms, vec![], 0.0);
        }
        Self::new(atoms, vec![ReciprocalSegment::new(a, b, 0.0, b - a)], b - a)
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![PriceAtom { x, mass: 1.0 }], vec![], x)
    }

    /// The largest price CDF compatible with no profitable deviation for a
    /// value-1 bidder with utility `alpha` and a value-`v` bidder with
    /// utility `beta`: `min(alpha / (1 - x), beta / (v - x))`, capped at 1.
    pub fn min_envelope(alpha: f64, beta: f64, v: f64) -> Result<Self> {
        ensure!(
            alpha.is_finite() && beta.is_finite() && v.is_finite(),
            InvalidParameter,
            "envelope parameters must be finite"
        );
        ensure!(alpha > 0.0 && beta > 0.0 && v > 0.0, InvalidParameter, "need alpha, beta, v > 0");
        ensure!(alpha <= 1.0 && beta <= v, InvalidParameter, "F(0) = min(alpha, beta/v) exceeds 1");
        ensure!(v <= 1.0, InvalidParameter, "the second value v={v} must not exceed 1");

        if beta >= v * alpha {
            // the value-1 bidder binds everywhere
            return Self::reciprocal(alpha, 1.0);
        }
        let theta = (v * alpha - beta) / (alpha - beta);
        let bob_top = v - beta;
        if theta >= bob_top {
            return Self::reciprocal(beta, v);
        }
        let atoms = vec![PriceAtom { x: 0.0, mass: beta / v }];
        let segments = vec![
            ReciprocalSegment::new(beta, v, 0.0, theta),
            ReciprocalSegment::new(alpha, 1.0, theta, 1.0 - alpha),
        ];
        Self::new(atoms, segments, 1.0 - alpha)
    }

    pub fn atoms(&self) -> &[PriceAtom] {
        &self.atoms
    }

    pub fn segments(&self) -> &[ReciprocalSegment] {
        &self.segments
    }

    /// Price at which the CDF reaches one.
    pub fn top(&self) -> f64 {
        self.top
    }

    /// Mass of the atom at `x`, zero if there is none.
    pub fn atom_mass(&self, x: f64) -> f64 {
        self.atoms.iter().find(|a| a.x == x).map_or(0.0, |a| a.mass)
    }

    /// `F(x)` for any real `x` (0 below zero, 1 above `top`).
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if x >= self.top {
            return 1.0;
        }
        let mut running = 0.0;
        for piece in &self.pieces {
            match *piece {
                Piece::Atom(k) => {
                    let a = self.atoms[k];
                    if x < a.x {
                        return running;
                    }
                    running += a.mass;
                }
                Piece::Segment(k) => {
                    let s = &self.segments[k];
                    if x < s.lo {
                        return running;
                    }
                    if x <= s.hi {
                        return s.value(x);
                    }
                    running = s.value(s.hi);
                }
            }
        }
        running.min(1.0)
    }

    /// Right-continuous CDF on `[0, top]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        ensure!(x >= 0.0 && x <= self.top, Range, "x={x} outside [0, {}]", self.top);
        Ok(self.cdf(x))
    }

    /// Generalized inverse `inf { x : F(x) >= p }`.
    pub fn inverse(&self, p: f64) -> Result<f64> {
        ensure!((0.0..=1.0).contains(&p), Range, "p={p} outside [0, 1]");
        if p == 0.0 {
            return Ok(0.0);
        }
        let mut running = 0.0;
        for piece in &self.pieces {
            match *piece {
                Piece::Atom(k) => {
                    let a = self.atoms[k];
                    if p <= running + a.mass {
                        return Ok(a.x);
                    }
                    running += a.mass;
                }
                Piece::Segment(k) => {
                    let s = &self.segments[k];
                    if p <= running {
                        return Ok(s.lo);
                    }
                    let end = s.value(s.hi);
                    if p <= end {
                        return Ok((s.b - s.a / p).clamp(s.lo, s.hi));
                    }
                    running = end;
                }
            }
        }
        Ok(self.top)
    }

    /// Mean price, `∫ (1 - F(x)) dx` over `[0, top]`.
    pub fn expected_value(&self) -> f64 {
        let mut total = 0.0;
        let mut pos = 0.0;
        let mut running = 0.0;
        for piece in &self.pieces {
            match *piece {
                Piece::Atom(k) => {
                    let a = self.atoms[k];
                    total += (a.x - pos) * (1.0 - running);
                    running += a.mass;
                    pos = a.x;
                }
                Piece::Segment(k) => {
                    let s = &self.segments[k];
                    total += (s.lo - pos) * (1.0 - running);
                    total += s.tail_integral(s.lo, s.hi);
                    running = s.value(s.hi);
                    pos = s.hi;
                }
            }
        }
        total + (self.top - pos) * (1.0 - running).max(0.0)
    }

    /// Probability of the continuous part on `(lo, hi]`; atoms excluded.
    pub fn continuous_mass(&self, lo: f64, hi: f64) -> f64 {
        self.segments
            .iter()
            .filter_map(|s| overlap(s, lo, hi).map(|(l, r)| s.mass(l, r)))
            .sum()
    }

    /// `∫ x dF` of the continuous part over `(lo, hi]`; atoms excluded.
    pub fn continuous_moment(&self, lo: f64, hi: f64) -> f64 {
        self.segments
            .iter()
            .filter_map(|s| overlap(s, lo, hi).map(|(l, r)| s.moment(l, r)))
            .sum()
    }

    /// Best fixed bid against this price distribution for a bidder of the
    /// given value, counting ties as wins: `sup_x (value - x) F(x)`.
    /// Returns `(bid, utility)`.
    pub fn best_deviation(&self, value: f64) -> (f64, f64) {
        // (value - x) a / (b - x) is monotone on each segment and the CDF is
        // flat between pieces, so piece endpoints suffice.
        let mut candidates = vec![0.0, self.top];
        candidates.extend(self.atoms.iter().map(|a| a.x));
        for s in &self.segments {
            candidates.push(s.lo);
            candidates.push(s.hi);
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let mut best = (0.0, f64::NEG_INFINITY);
        for x in candidates {
            let u = (value - x) * self.cdf(x);
            if u > best.1 {
                best = (x, u);
            }
        }
        best
    }

    pub fn sup_deviation_utility(&self, value: f64) -> f64 {
        self.best_deviation(value).1
    }

    /// `count` equally spaced `(x, F(x))` pairs spanning `[0, top]`.
    pub fn samples(&self, count: usize) -> Vec<(f64, f64)> {
        match count {
            0 => vec![],
            1 => vec![(0.0, self.cdf(0.0))],
            _ => (0..count)
                .map(|i| {
                    let x = self.top * i as f64 / (count - 1) as f64;
                    (x, self.cdf(x))
                })
                .collect(),
        }
    }
}

fn overlap(s: &ReciprocalSegment, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let l = lo.max(s.lo);
    let r = hi.min(s.hi);
    (r > l).then_some((l, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn reciprocal_mean_matches_closed_form() {
        let g = PiecewiseCdf::reciprocal(1.0 / E, 1.0).unwrap();
        assert!((g.expected_value() - (1.0 - 2.0 / E)).abs() < 1e-15);
        let g = PiecewiseCdf::reciprocal(0.25, 1.0).unwrap();
        assert!((g.expected_value() - (0.75 + 0.25 * 0.25f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn all_mass_at_zero() {
        let g = PiecewiseCdf::reciprocal(0.7, 0.7).unwrap();
        assert_eq!(g.expected_value(), 0.0);
        assert_eq!(g.top(), 0.0);
        assert_eq!(g.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn eval_is_right_continuous_at_atoms() {
        let cdf = PiecewiseCdf::new(
            vec![PriceAtom { x: 0.2, mass: 0.4 }, PriceAtom { x: 0.5, mass: 0.6 }],
            vec![],
            0.5,
        )
        .unwrap();
        assert_eq!(cdf.eval(0.2).unwrap(), 0.4);
        assert_eq!(cdf.eval(0.1999).unwrap(), 0.0);
        assert_eq!(cdf.eval(0.5).unwrap(), 1.0);
        assert_eq!(cdf.inverse(0.4).unwrap(), 0.2);
        assert_eq!(cdf.inverse(0.41).unwrap(), 0.5);
        assert!((cdf.expected_value() - (0.4 * 0.2 + 0.6 * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_arguments() {
        let g = PiecewiseCdf::reciprocal(0.5, 1.0).unwrap();
        assert!(g.eval(-0.1).is_err());
        assert!(g.eval(0.6).is_err());
        assert!(g.inverse(1.5).is_err());
        assert_eq!(g.eval(g.top()).unwrap(), 1.0);
    }

    #[test]
    fn jump_without_atom_is_rejected() {
        let err = PiecewiseCdf::new(vec![], vec![ReciprocalSegment::new(0.5, 1.0, 0.0, 0.5)], 0.5);
        assert!(err.is_err());
    }

    #[test]
    fn envelope_branches_coincide_at_case_boundary() {
        let alpha = 0.3;
        let v = 0.6;
        let cdf = PiecewiseCdf::min_envelope(alpha, v * alpha, v).unwrap();
        assert_eq!(cdf.segments().len(), 1);
        assert_eq!(cdf.top(), 1.0 - alpha);
    }

    #[test]
    fn envelope_rejects_mass_above_one() {
        assert!(PiecewiseCdf::min_envelope(1.2, 0.1, 0.5).is_err());
        assert!(PiecewiseCdf::min_envelope(0.5, 0.6, 0.5 - 1e-9).is_err());
    }

    #[test]
    fn point_mass_deviation() {
        let cdf = PiecewiseCdf::point_mass(0.0).unwrap();
        assert_eq!(cdf.sup_deviation_utility(1.0), 1.0);
    }
}
