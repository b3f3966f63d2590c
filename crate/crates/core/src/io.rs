//! JSON and CSV formats.
//!
//! Probabilities, bids, values and CDF parameters are written as decimal
//! strings (shortest round-tripping form) and read from strings or JSON
//! numbers. Player indices in files are 1-based.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::auction::{Atom, AuctionInstance, FiniteEquilibrium};
use crate::cdf::{PiecewiseCdf, PriceAtom, ReciprocalSegment};
use crate::error::{ensure, Error, Result};
use crate::sim::TrajectoryPoint;

/// A finite real carried as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal(pub f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{:?}", self.0))
    }
}

struct DecimalVisitor;

impl Visitor<'_> for DecimalVisitor {
    type Value = Decimal;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a finite decimal number or decimal string")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Decimal, E> {
        let x: f64 = v.trim().parse().map_err(|_| E::custom(format!("`{v}` is not a decimal number")))?;
        self.visit_f64(x)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Decimal, E> {
        if v.is_finite() {
            Ok(Decimal(v))
        } else {
            Err(E::custom(format!("`{v}` is not finite")))
        }
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Decimal, E> {
        Ok(Decimal(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Decimal, E> {
        Ok(Decimal(v as f64))
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Decimal, D::Error> {
        deserializer.deserialize_any(DecimalVisitor)
    }
}

fn decimals(xs: &[f64]) -> Vec<Decimal> {
    xs.iter().copied().map(Decimal).collect()
}

fn reals(xs: &[Decimal]) -> Vec<f64> {
    xs.iter().map(|d| d.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    pub probability: Decimal,
    pub bids: Vec<Decimal>,
    /// 1-based player -> share; absent means the priority winner takes all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner_shares: Option<BTreeMap<String, Decimal>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumJson {
    pub values: Vec<Decimal>,
    /// 1-based players, highest priority first; defaults to value order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_priority: Option<Vec<usize>>,
    pub atoms: Vec<AtomJson>,
}

fn player_index(key: &str, n: usize) -> Result<usize> {
    let k: usize = key.trim().parse().map_err(|_| Error::InvalidInput(format!("player key `{key}` is not an integer")))?;
    ensure!((1..=n).contains(&k), InvalidInput, "player {k} out of range 1..={n}");
    Ok(k - 1)
}

impl EquilibriumJson {
    pub fn from_model(instance: &AuctionInstance, eq: &FiniteEquilibrium) -> Self {
        let priority: Vec<usize> = instance.tie_priority().iter().map(|p| p + 1).collect();
        let identity = priority.iter().enumerate().all(|(i, &p)| p == i + 1);
        Self {
            values: decimals(instance.values()),
            tie_priority: if identity { None } else { Some(priority) },
            atoms: eq
                .atoms()
                .iter()
                .map(|a| AtomJson {
                    probability: Decimal(a.probability),
                    bids: decimals(&a.bids),
                    winner_shares: Some(
                        a.winner_shares
                            .iter()
                            .enumerate()
                            .filter(|(_, &s)| s > 0.0)
                            .map(|(i, &s)| ((i + 1).to_string(), Decimal(s)))
                            .collect(),
                    ),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<(AuctionInstance, FiniteEquilibrium)> {
        let values = reals(&self.values);
        let n = values.len();
        let instance = match &self.tie_priority {
            None => AuctionInstance::new(values)?,
            Some(p) => {
                ensure!(p.iter().all(|&i| (1..=n).contains(&i)), InvalidInput, "tie_priority entries must lie in 1..={n}");
                AuctionInstance::with_priority(values, p.iter().map(|i| i - 1).collect())?
            }
        };
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (k, a) in self.atoms.iter().enumerate() {
            let bids = reals(&a.bids);
            instance.check_profile(&bids).map_err(|e| Error::InvalidInput(format!("atom {}: {e}", k + 1)))?;
            let shares = match &a.winner_shares {
                None => {
                    let (w, _) = instance.outcome(&bids)?;
                    let mut s = vec![0.0; n];
                    s[w] = 1.0;
                    s
                }
                Some(map) => {
                    let mut s = vec![0.0; n];
                    for (key, share) in map {
                        s[player_index(key, n)?] = share.0;
                    }
                    s
                }
            };
            atoms.push(Atom::new(a.probability.0, bids, shares));
        }
        Ok((instance, FiniteEquilibrium::new(atoms)?))
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializing plain data cannot fail")
}

pub fn parse_equilibrium(text: &str) -> Result<(AuctionInstance, FiniteEquilibrium)> {
    from_json::<EquilibriumJson>(text)?.to_model()
}

pub fn equilibrium_to_json(instance: &AuctionInstance, eq: &FiniteEquilibrium) -> String {
    to_json(&EquilibriumJson::from_model(instance, eq))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceAtomJson {
    pub x: Decimal,
    pub mass: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentJson {
    pub a: Decimal,
    pub b: Decimal,
    pub lo: Decimal,
    pub hi: Decimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdfJson {
    #[serde(default)]
    pub atoms: Vec<PriceAtomJson>,
    #[serde(default)]
    pub segments: Vec<SegmentJson>,
    pub top: Decimal,
}

impl CdfJson {
    pub fn from_model(cdf: &PiecewiseCdf) -> Self {
        Self {
            atoms: cdf.atoms().iter().map(|a| PriceAtomJson { x: Decimal(a.x), mass: Decimal(a.mass) }).collect(),
            segments: cdf
                .segments()
                .iter()
                .map(|s| SegmentJson { a: Decimal(s.a), b: Decimal(s.b), lo: Decimal(s.lo), hi: Decimal(s.hi) })
                .collect(),
            top: Decimal(cdf.top()),
        }
    }

    pub fn to_model(&self) -> Result<PiecewiseCdf> {
        PiecewiseCdf::new(
            self.atoms.iter().map(|a| PriceAtom { x: a.x.0, mass: a.mass.0 }).collect(),
            self.segments.iter().map(|s| ReciprocalSegment::new(s.a.0, s.b.0, s.lo.0, s.hi.0)).collect(),
            self.top.0,
        )
    }
}

pub fn parse_cdf(text: &str) -> Result<PiecewiseCdf> {
    from_json::<CdfJson>(text)?.to_model()
}

pub fn cdf_to_json(cdf: &PiecewiseCdf) -> String {
    to_json(&CdfJson::from_model(cdf))
}

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct CdfRow {
    x: f64,
    cdf: f64,
}

/// `count` evenly spaced `(x, F(x))` samples on `[0, top]` as CSV.
pub fn cdf_samples_csv(cdf: &PiecewiseCdf, count: usize) -> Result<String> {
    csv_string(cdf.samples(count).into_iter().map(|(x, cdf)| CdfRow { x, cdf }))
}

pub fn trajectory_csv(points: &[TrajectoryPoint]) -> Result<String> {
    csv_string(points.iter().copied())
}
