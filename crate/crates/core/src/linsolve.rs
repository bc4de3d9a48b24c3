//! Exact sparse Gauss-Jordan elimination over the rationals.
//!
//! Right-hand sides are affine forms so that a system may carry symbolic
//! constants through elimination. A row reducing to `0 = r` with `r != 0`
//! (symbolic or not) is an inconsistency.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::affine::{AffineInt, Rational};

/// `sum coeffs[j] * x_j = rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearEquation {
    pub coeffs: BTreeMap<usize, Rational>,
    pub rhs: AffineInt,
}

impl LinearEquation {
    pub fn new(terms: impl IntoIterator<Item = (usize, Rational)>, rhs: AffineInt) -> Self {
        let mut coeffs: BTreeMap<usize, Rational> = BTreeMap::new();
        for (j, q) in terms {
            *coeffs.entry(j).or_insert_with(Rational::zero) += q;
        }
        coeffs.retain(|_, q| !q.is_zero());
        Self { coeffs, rhs }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinsolveError {
    /// Indices of a minimal inconsistent subset of the input equations.
    #[error("inconsistent system: minimal conflicting subset {0:?}")]
    Inconsistent(Vec<usize>),
    #[error("equation {0} references variable {1} outside 0..{2}")]
    VariableOutOfRange(usize, usize, usize),
}

/// `x = constant + sum coeffs[k] * x_k` over free variables `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableValue {
    pub constant: AffineInt,
    pub free: BTreeMap<usize, Rational>,
}

impl VariableValue {
    pub fn is_determined(&self) -> bool {
        self.free.is_empty()
    }
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: BTreeMap<usize, Rational>,
    rhs: AffineInt,
    origin: BTreeSet<usize>,
}

impl Row {
    fn sub_scaled(&mut self, other: &Row, factor: &Rational) {
        for (j, q) in &other.coeffs {
            let slot = self.coeffs.entry(*j).or_insert_with(Rational::zero);
            *slot -= q * factor;
            if slot.is_zero() {
                self.coeffs.remove(j);
            }
        }
        self.rhs = &self.rhs - &other.rhs.scale(factor);
        self.origin.extend(other.origin.iter().copied());
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    n: usize,
    /// pivot column -> reduced row (pivot coefficient 1, other columns free)
    pivots: BTreeMap<usize, Row>,
}

impl Solution {
    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn is_pivot(&self, j: usize) -> bool {
        self.pivots.contains_key(&j)
    }

    pub fn free_variables(&self) -> Vec<usize> {
        (0..self.n).filter(|j| !self.pivots.contains_key(j)).collect()
    }

    pub fn value(&self, j: usize) -> VariableValue {
        match self.pivots.get(&j) {
            Some(row) => VariableValue {
                constant: row.rhs.clone(),
                free: row
                    .coeffs
                    .iter()
                    .filter(|(k, _)| **k != j)
                    .map(|(k, q)| (*k, -q.clone()))
                    .collect(),
            },
            None => VariableValue {
                constant: AffineInt::zero(),
                free: [(j, Rational::one())].into_iter().collect(),
            },
        }
    }
}

enum Outcome {
    Solved(Solution),
    Conflict(BTreeSet<usize>),
}

fn eliminate(n: usize, eqs: &[LinearEquation], active: &[usize]) -> Outcome {
    let mut rows: Vec<Row> = Vec::new();
    for &i in active {
        let row = Row {
            coeffs: eqs[i].coeffs.clone(),
            rhs: eqs[i].rhs.clone(),
            origin: [i].into_iter().collect(),
        };
        if row.coeffs.is_empty() {
            if !row.rhs.is_zero() {
                return Outcome::Conflict(row.origin);
            }
            continue;
        }
        rows.push(row);
    }
    let mut pivots: BTreeMap<usize, Row> = BTreeMap::new();
    for col in 0..n {
        let candidate = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.coeffs.contains_key(&col))
            .min_by_key(|(i, r)| (r.coeffs.len(), *i))
            .map(|(i, _)| i);
        let Some(pi) = candidate else { continue };
        let mut prow = rows.swap_remove(pi);
        let inv = Rational::one() / &prow.coeffs[&col];
        for q in prow.coeffs.values_mut() {
            *q *= &inv;
        }
        prow.rhs = prow.rhs.scale(&inv);

        let mut kept = Vec::with_capacity(rows.len());
        for mut r in rows.drain(..) {
            if let Some(f) = r.coeffs.get(&col).cloned() {
                r.sub_scaled(&prow, &f);
                if r.coeffs.is_empty() {
                    if !r.rhs.is_zero() {
                        return Outcome::Conflict(r.origin);
                    }
                    continue;
                }
            }
            kept.push(r);
        }
        rows = kept;
        for r in pivots.values_mut() {
            if let Some(f) = r.coeffs.get(&col).cloned() {
                r.sub_scaled(&prow, &f);
            }
        }
        pivots.insert(col, prow);
    }
    Outcome::Solved(Solution { n, pivots })
}

/// Solves the system in reduced row echelon form with columns in index order.
///
/// Pivot columns, and so the set of free variables, depend only on the
/// column order. Each pivot is taken from the sparsest available row.
pub fn solve(n: usize, eqs: &[LinearEquation]) -> Result<Solution, LinsolveError> {
    for (i, e) in eqs.iter().enumerate() {
        if let Some((&j, _)) = e.coeffs.iter().next_back() {
            if j >= n {
                return Err(LinsolveError::VariableOutOfRange(i, j, n));
            }
        }
    }
    let all: Vec<usize> = (0..eqs.len()).collect();
    match eliminate(n, eqs, &all) {
        Outcome::Solved(s) => Ok(s),
        Outcome::Conflict(origin) => Err(LinsolveError::Inconsistent(minimize_conflict(n, eqs, origin))),
    }
}

/// Deletion filter: drop each equation whose removal keeps the set inconsistent.
fn minimize_conflict(n: usize, eqs: &[LinearEquation], origin: BTreeSet<usize>) -> Vec<usize> {
    let mut set: Vec<usize> = origin.into_iter().collect();
    let mut k = 0;
    while k < set.len() {
        let mut trial = set.clone();
        trial.remove(k);
        match eliminate(n, eqs, &trial) {
            Outcome::Conflict(_) => set = trial,
            Outcome::Solved(_) => k += 1,
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::rational;
    use proptest::prelude::*;

    fn eq(terms: &[(usize, i64)], rhs: i64) -> LinearEquation {
        LinearEquation::new(terms.iter().map(|&(j, q)| (j, rational(q))), AffineInt::constant(rhs))
    }

    #[test]
    fn unique_solution() {
        // x0 + x1 = 3, x0 - x1 = 1
        let s = solve(2, &[eq(&[(0, 1), (1, 1)], 3), eq(&[(0, 1), (1, -1)], 1)]).unwrap();
        assert_eq!(s.value(0).constant, AffineInt::constant(2));
        assert_eq!(s.value(1).constant, AffineInt::constant(1));
        assert!(s.free_variables().is_empty());
    }

    #[test]
    fn free_variable_is_the_later_column() {
        // x0 + 2 x1 = 1
        let s = solve(2, &[eq(&[(0, 1), (1, 2)], 1)]).unwrap();
        assert_eq!(s.free_variables(), vec![1]);
        let v = s.value(0);
        assert_eq!(v.constant, AffineInt::constant(1));
        assert_eq!(v.free[&1], rational(-2));
    }

    #[test]
    fn minimal_conflict() {
        let eqs = [
            eq(&[(0, 1)], 1),
            eq(&[(2, 1)], 5),
            eq(&[(0, 1), (1, 1)], 2),
            eq(&[(1, 1)], 3),
        ];
        assert_eq!(solve(3, &eqs).unwrap_err(), LinsolveError::Inconsistent(vec![0, 2, 3]));
    }

    #[test]
    fn symbolic_right_hand_sides() {
        // x0 = a, x0 + x1 = 1
        let e0 = LinearEquation::new([(0, rational(1))], AffineInt::parameter("a"));
        let e1 = eq(&[(0, 1), (1, 1)], 1);
        let s = solve(2, &[e0, e1]).unwrap();
        assert_eq!(s.value(1).constant.to_string(), "-a + 1");
    }

    #[test]
    fn zero_equation_with_nonzero_rhs() {
        assert_eq!(solve(1, &[eq(&[], 1)]).unwrap_err(), LinsolveError::Inconsistent(vec![0]));
        assert!(solve(1, &[eq(&[], 0)]).is_ok());
    }

    proptest! {
        /// A random integer system built from a known solution is solved back
        /// to that solution on pivot variables with free variables set to it.
        #[test]
        fn recovers_planted_solution(
            x in proptest::collection::vec(-5i64..5, 4),
            a in proptest::collection::vec(proptest::collection::vec(-3i64..3, 4), 1..6),
        ) {
            let eqs: Vec<LinearEquation> = a
                .iter()
                .map(|row| {
                    let rhs: i64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
                    eq(&row.iter().enumerate().map(|(j, &q)| (j, q)).collect::<Vec<_>>(), rhs)
                })
                .collect();
            let s = solve(4, &eqs).unwrap();
            for j in 0..4 {
                let v = s.value(j);
                let mut val = v.constant.as_constant().unwrap().clone();
                for (k, q) in &v.free {
                    val += q * rational(x[*k]);
                }
                prop_assert_eq!(val, rational(x[j]));
            }
        }
    }
}
