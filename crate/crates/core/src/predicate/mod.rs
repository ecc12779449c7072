//! Counting predicates: finite unions of cubes over input counts.

mod parse;
mod synth;

pub use parse::{parse_predicate, ParseError};
pub use synth::{synthesize_io_protocol, synthesize_io_protocol_over};

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-coordinate interval `lower[i] <= x[i] <= upper[i]`; `None` is unbounded.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cube {
    pub lower: Vec<u32>,
    pub upper: Vec<Option<u32>>,
}

impl Cube {
    /// The cube containing every point.
    pub fn full(arity: usize) -> Self {
        Cube {
            lower: vec![0; arity],
            upper: vec![None; arity],
        }
    }

    pub fn arity(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| matches!(u, Some(u) if u < l))
    }

    pub fn contains(&self, x: &[u32]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| v >= l && u.is_none_or(|u| *v <= u))
    }

    pub fn intersect(&self, other: &Cube) -> Cube {
        Cube {
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| *a.max(b)).collect(),
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => Some(*a.min(b)),
                    (Some(a), None) | (None, Some(a)) => Some(*a),
                    (None, None) => None,
                })
                .collect(),
        }
    }

    /// Whether every point of `self` lies in `other`.
    pub fn subset_of(&self, other: &Cube) -> bool {
        self.is_empty()
            || self
                .lower
                .iter()
                .zip(&self.upper)
                .zip(other.lower.iter().zip(&other.upper))
                .all(|((l, u), (ol, ou))| {
                    l >= ol
                        && match (u, ou) {
                            (_, None) => true,
                            (None, Some(_)) => false,
                            (Some(u), Some(ou)) => u <= ou,
                        }
                })
    }

    /// Complement as a union of half-space cubes.
    fn complement(&self) -> Vec<Cube> {
        let n = self.arity();
        let mut out = Vec::new();
        for i in 0..n {
            if self.lower[i] > 0 {
                let mut c = Cube::full(n);
                c.upper[i] = Some(self.lower[i] - 1);
                out.push(c);
            }
            if let Some(u) = self.upper[i] {
                let mut c = Cube::full(n);
                c.lower[i] = u + 1;
                out.push(c);
            }
        }
        out
    }
}

/// Membership in a finite union of cubes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountingPredicate {
    pub arity: usize,
    pub cubes: Vec<Cube>,
    pub source: Option<String>,
}

impl CountingPredicate {
    pub fn new(arity: usize, cubes: Vec<Cube>) -> Self {
        let mut p = CountingPredicate {
            arity,
            cubes,
            source: None,
        };
        p.normalize();
        p
    }

    pub fn always(arity: usize, value: bool) -> Self {
        let cubes = if value { vec![Cube::full(arity)] } else { Vec::new() };
        CountingPredicate::new(arity, cubes)
    }

    /// Drops empty cubes and cubes contained in another one, then sorts.
    pub fn normalize(&mut self) {
        let mut cubes: Vec<Cube> = self.cubes.drain(..).filter(|c| !c.is_empty()).collect();
        cubes.sort();
        cubes.dedup();
        let mut kept: Vec<Cube> = Vec::new();
        for (i, c) in cubes.iter().enumerate() {
            let dominated = cubes
                .iter()
                .enumerate()
                .any(|(j, d)| j != i && c.subset_of(d) && !(d.subset_of(c) && j > i));
            if !dominated {
                kept.push(c.clone());
            }
        }
        self.cubes = kept;
    }

    pub fn union(&self, other: &CountingPredicate) -> CountingPredicate {
        let mut cubes = self.cubes.clone();
        cubes.extend(other.cubes.iter().cloned());
        CountingPredicate::new(self.arity, cubes)
    }

    pub fn intersection(&self, other: &CountingPredicate) -> CountingPredicate {
        let mut cubes = Vec::new();
        for a in &self.cubes {
            for b in &other.cubes {
                cubes.push(a.intersect(b));
            }
        }
        CountingPredicate::new(self.arity, cubes)
    }

    pub fn complement(&self) -> CountingPredicate {
        let mut acc = CountingPredicate::always(self.arity, true);
        for c in &self.cubes {
            acc = acc.intersection(&CountingPredicate::new(self.arity, c.complement()));
        }
        acc
    }

    /// Thresholds per coordinate: every positive lower bound `c` and `u + 1`
    /// for every upper bound `u`. The predicate's value only depends on which
    /// of these each coordinate has reached.
    pub fn thresholds(&self) -> Vec<BTreeSet<u32>> {
        let mut out = vec![BTreeSet::new(); self.arity];
        for c in &self.cubes {
            for (i, set) in out.iter_mut().enumerate() {
                if c.lower[i] > 0 {
                    set.insert(c.lower[i]);
                }
                if let Some(u) = c.upper[i] {
                    set.insert(u + 1);
                }
            }
        }
        out
    }

    pub fn eval(&self, x: &[u32]) -> Result<bool> {
        eval_predicate(self, x)
    }
}

pub fn eval_predicate(pred: &CountingPredicate, x: &[u32]) -> Result<bool> {
    if x.len() != pred.arity {
        return Err(Error::Arity {
            expected: pred.arity,
            got: x.len(),
        });
    }
    Ok(pred.cubes.iter().any(|c| c.contains(x)))
}

/// Exhaustive comparison on `[0, bound]^arity`.
pub fn predicate_equal_on_box(p: &CountingPredicate, q: &CountingPredicate, bound: u32) -> bool {
    if p.arity != q.arity {
        return false;
    }
    box_points(p.arity, bound).all(|x| p.cubes.iter().any(|c| c.contains(&x)) == q.cubes.iter().any(|c| c.contains(&x)))
}

/// Every point of `[0, bound]^arity` in lexicographic order.
pub fn box_points(arity: usize, bound: u32) -> impl Iterator<Item = Vec<u32>> {
    let total = (bound as usize + 1).pow(arity as u32);
    (0..total).map(move |mut k| {
        let mut x = vec![0; arity];
        for slot in x.iter_mut().rev() {
            *slot = (k % (bound as usize + 1)) as u32;
            k /= bound as usize + 1;
        }
        x
    })
}
