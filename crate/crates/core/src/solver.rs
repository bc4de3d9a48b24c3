//! Solves for the coefficient matrix `c(S', S'')` converting local Euler
//! characteristics into micro-local multiplicities, and derives the
//! characteristic cycles of all simple objects.
//!
//! Unknowns are the coefficients `c(S', S'')` for `S' <= S''` together with
//! every micro-local multiplicity `mic_{S'}(IC(S, L))`. Five rules generate
//! equations:
//!
//! * expansion: `mic_{S'} = sum_{S''} c(S', S'') * loc_{S''}`, skipped when a
//!   needed local Euler value is not pinned;
//! * vanishing: `mic_{S'} = 0` unless `S'` lies in the closure of `S`;
//! * leading term: `mic_S(IC(S, L)) = dim L`;
//! * Fourier symmetry: `mic_{S'}(IC(S, L)) = mic_{hat S'}(IC(fourier(S, L)))`;
//! * diagonal: `c(S, S) = (-1)^{dim S}` (dataset switch `diagonal_rule`).
//!
//! After exact elimination, a free coefficient that occurs in some equation
//! becomes a named parameter; a free coefficient occurring in none is a
//! residual unknown and every value depending on it is undetermined.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::affine::{format_rational, rational, AffineInt, Rational};
use crate::dataset::{Dataset, LocalSystemId, OrbitId};
use crate::euler::{self, composition_pairing, EulerMatrix, MultiplicityError, Pairing};
use crate::linsolve::{self, LinearEquation, LinsolveError};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Unknown {
    /// `mic_{orbit}(IC(source))`
    Micro { orbit: OrbitId, source: LocalSystemId },
    /// `c(lower, upper)`
    Coefficient { lower: OrbitId, upper: OrbitId },
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unknown::Micro { orbit, source } => {
                write!(f, "mic_{orbit}({},{})", source.orbit, source.irrep)
            }
            Unknown::Coefficient { lower, upper } => write!(f, "c({lower},{upper})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Expansion,
    Vanishing,
    LeadingTerm,
    FourierSymmetry,
    Diagonal,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Expansion => "expansion",
            Rule::Vanishing => "vanishing",
            Rule::LeadingTerm => "leading-term",
            Rule::FourierSymmetry => "fourier-symmetry",
            Rule::Diagonal => "diagonal",
        })
    }
}

/// `sum coeff * unknown = rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub rule: Rule,
    pub orbit: OrbitId,
    pub source: Option<LocalSystemId>,
    pub terms: Vec<(usize, Rational)>,
    pub rhs: AffineInt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedEquation {
    pub rule: Rule,
    pub orbit: OrbitId,
    pub source: LocalSystemId,
    /// Local Euler cells `(orbit, source)` that are not pinned.
    pub unpinned: Vec<OrbitId>,
}

#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub unknowns: Vec<Unknown>,
    pub equations: Vec<Equation>,
    pub skipped: Vec<SkippedEquation>,
    /// Orbits in descending dimension.
    pub orbits: Vec<OrbitId>,
    pub local_systems: Vec<LocalSystemId>,
    names: BTreeMap<(OrbitId, OrbitId), String>,
    index: BTreeMap<Unknown, usize>,
}

impl ConstraintSystem {
    pub fn index_of(&self, u: &Unknown) -> Option<usize> {
        self.index.get(u).copied()
    }

    pub fn describe(&self, e: &Equation) -> String {
        let mut lhs = String::new();
        for (j, q) in &e.terms {
            let neg = q.is_negative();
            let a = q.abs();
            let coef = if a == rational(1) {
                String::new()
            } else {
                format!("{}*", format_rational(&a))
            };
            if lhs.is_empty() {
                lhs = format!("{}{coef}{}", if neg { "-" } else { "" }, self.unknowns[*j]);
            } else {
                lhs.push_str(&format!(" {} {coef}{}", if neg { "-" } else { "+" }, self.unknowns[*j]));
            }
        }
        format!("[{}] {lhs} = {}", e.rule, e.rhs)
    }

    /// Expansion equations rewritten in the coefficients alone: the
    /// multiplicity on the left is replaced by the value forced by the
    /// vanishing or leading-term rule, directly or through one Fourier
    /// identity, and diagonal coefficients are replaced by their values.
    pub fn coefficient_relations(&self) -> Vec<CoefficientRelation> {
        let mut forced: BTreeMap<usize, AffineInt> = BTreeMap::new();
        let mut diagonal: BTreeMap<usize, AffineInt> = BTreeMap::new();
        for e in &self.equations {
            if let [(j, q)] = e.terms.as_slice() {
                let v = e.rhs.scale(&(rational(1) / q));
                match e.rule {
                    Rule::Vanishing | Rule::LeadingTerm => {
                        forced.insert(*j, v);
                    }
                    Rule::Diagonal => {
                        diagonal.insert(*j, v);
                    }
                    _ => {}
                }
            }
        }
        let mut via_fourier = BTreeMap::new();
        for e in self.equations.iter().filter(|e| e.rule == Rule::FourierSymmetry) {
            if let [(a, _), (b, _)] = e.terms.as_slice() {
                if let Some(v) = forced.get(b) {
                    via_fourier.insert(*a, v.clone());
                }
                if let Some(v) = forced.get(a) {
                    via_fourier.insert(*b, v.clone());
                }
            }
        }
        for (k, v) in via_fourier {
            forced.entry(k).or_insert(v);
        }

        let mut out = Vec::new();
        for e in self.equations.iter().filter(|e| e.rule == Rule::Expansion) {
            let Some((micro, q)) = e.terms.first() else { continue };
            let Some(lhs) = forced.get(micro) else { continue };
            // q * mic + sum k * c = 0  =>  mic = sum (-k/q) c
            let mut constant = AffineInt::zero();
            let mut terms = Vec::new();
            for (j, k) in &e.terms[1..] {
                let k = -(k / q);
                match diagonal.get(j) {
                    Some(v) => constant = constant + v.scale(&k),
                    None => {
                        if let Unknown::Coefficient { lower, upper } = &self.unknowns[*j] {
                            terms.push((lower.clone(), upper.clone(), k));
                        }
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            out.push(CoefficientRelation {
                source: e.source.clone().expect("expansion equations carry a source"),
                orbit: e.orbit.clone(),
                lhs: lhs.clone(),
                constant,
                terms,
            });
        }
        out
    }
}

/// `lhs = constant + sum k * c(lower, upper)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoefficientRelation {
    pub source: LocalSystemId,
    pub orbit: OrbitId,
    pub lhs: AffineInt,
    pub constant: AffineInt,
    pub terms: Vec<(OrbitId, OrbitId, Rational)>,
}

impl fmt::Display for CoefficientRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = ", self.lhs)?;
        let mut first = true;
        if !self.constant.is_zero() {
            write!(f, "{}", self.constant)?;
            first = false;
        }
        for (lo, hi, k) in &self.terms {
            let a = k.abs();
            let coef = if a == rational(1) {
                String::new()
            } else {
                format!("{}·", format_rational(&a))
            };
            match (first, k.is_negative()) {
                (true, false) => write!(f, "{coef}c({lo},{hi})")?,
                (true, true) => write!(f, "-{coef}c({lo},{hi})")?,
                (false, false) => write!(f, " + {coef}c({lo},{hi})")?,
                (false, true) => write!(f, " - {coef}c({lo},{hi})")?,
            }
            first = false;
        }
        Ok(())
    }
}

fn parity_sign(dim: u32) -> i64 {
    if dim.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn build_constraints(ds: &Dataset, em: &EulerMatrix) -> ConstraintSystem {
    let p = &ds.poset;
    let n = p.len();
    let desc = p.descending();
    let orbits: Vec<OrbitId> = desc.iter().map(|&i| p.orbits[i].id.clone()).collect();
    let local_systems = ds.local_systems();
    let dim = |i: usize| p.orbits[i].dim;

    let mut unknowns = Vec::new();
    for o in &p.orbits {
        for ls in &local_systems {
            unknowns.push(Unknown::Micro {
                orbit: o.id.clone(),
                source: ls.clone(),
            });
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| p.leq_idx(a, b))
        .collect();
    pairs.sort_by_key(|&(a, b)| (std::cmp::Reverse(dim(a)), a, dim(b), b));
    for (a, b) in &pairs {
        unknowns.push(Unknown::Coefficient {
            lower: p.orbits[*a].id.clone(),
            upper: p.orbits[*b].id.clone(),
        });
    }
    let index: BTreeMap<Unknown, usize> = unknowns.iter().cloned().enumerate().map(|(i, u)| (u, i)).collect();
    let micro = |o: &OrbitId, s: &LocalSystemId| {
        index[&Unknown::Micro {
            orbit: o.clone(),
            source: s.clone(),
        }]
    };
    let coef = |a: &OrbitId, b: &OrbitId| {
        index[&Unknown::Coefficient {
            lower: a.clone(),
            upper: b.clone(),
        }]
    };

    let mut equations = Vec::new();
    let mut skipped = Vec::new();
    for src in &local_systems {
        let si = p.index_of(&src.orbit).expect("dataset ids");
        for &r in &(0..n).collect::<Vec<_>>() {
            let rid = &p.orbits[r].id;
            let m = micro(rid, src);
            // expansion
            let between: Vec<usize> = (0..n).filter(|&t| p.leq_idx(r, t) && p.leq_idx(t, si)).collect();
            let unpinned: Vec<OrbitId> = between
                .iter()
                .map(|&t| &p.orbits[t].id)
                .filter(|t| em.get(src, t).is_none())
                .cloned()
                .collect();
            if unpinned.is_empty() {
                let mut terms = vec![(m, rational(1))];
                for &t in &between {
                    let tid = &p.orbits[t].id;
                    let v = em.get(src, tid).expect("checked above");
                    if v != 0 {
                        terms.push((coef(rid, tid), rational(-v)));
                    }
                }
                equations.push(Equation {
                    rule: Rule::Expansion,
                    orbit: rid.clone(),
                    source: Some(src.clone()),
                    terms,
                    rhs: AffineInt::zero(),
                });
            } else {
                skipped.push(SkippedEquation {
                    rule: Rule::Expansion,
                    orbit: rid.clone(),
                    source: src.clone(),
                    unpinned,
                });
            }
            if !p.leq_idx(r, si) {
                equations.push(Equation {
                    rule: Rule::Vanishing,
                    orbit: rid.clone(),
                    source: Some(src.clone()),
                    terms: vec![(m, rational(1))],
                    rhs: AffineInt::zero(),
                });
            }
            if r == si {
                let d = ds.irrep_dim(src).expect("dataset ids");
                equations.push(Equation {
                    rule: Rule::LeadingTerm,
                    orbit: rid.clone(),
                    source: Some(src.clone()),
                    terms: vec![(m, rational(1))],
                    rhs: AffineInt::constant(i64::from(d)),
                });
            }
            if let (Some(h), Some(f)) = (ds.duality.hat.get(rid), ds.duality.fourier.get(src)) {
                let partner = micro(h, f);
                if partner > m {
                    equations.push(Equation {
                        rule: Rule::FourierSymmetry,
                        orbit: rid.clone(),
                        source: Some(src.clone()),
                        terms: vec![(m, rational(1)), (partner, rational(-1))],
                        rhs: AffineInt::zero(),
                    });
                }
            }
        }
    }
    if ds.diagonal_rule {
        for (i, o) in p.orbits.iter().enumerate() {
            equations.push(Equation {
                rule: Rule::Diagonal,
                orbit: o.id.clone(),
                source: None,
                terms: vec![(coef(&o.id, &o.id), rational(1))],
                rhs: AffineInt::constant(parity_sign(dim(i))),
            });
        }
    }

    let mut names = BTreeMap::new();
    for np in &ds.named_parameters {
        names.insert(np.unknown.clone(), np.name.clone());
    }
    ConstraintSystem {
        unknowns,
        equations,
        skipped,
        orbits,
        local_systems,
        names,
        index,
    }
}

// ---------------------------------------------------------------------------
// Solve report

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleCell {
    pub orbit: OrbitId,
    /// `None` when the multiplicity is not determined by the data.
    pub value: Option<AffineInt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CharacteristicCycle {
    pub source: LocalSystemId,
    /// One cell per orbit, in descending dimension.
    pub mult: Vec<CycleCell>,
}

impl CharacteristicCycle {
    pub fn cell(&self, orbit: &OrbitId) -> Option<&AffineInt> {
        self.mult.iter().find(|c| &c.orbit == orbit).and_then(|c| c.value.as_ref())
    }

    pub fn is_determined(&self) -> bool {
        self.mult.iter().all(|c| c.value.is_some())
    }

    /// Orbits with a nonzero or undetermined multiplicity.
    pub fn support(&self) -> impl Iterator<Item = &CycleCell> {
        self.mult.iter().filter(|c| c.value.as_ref().is_none_or(|v| !v.is_zero()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CMatrixEntry {
    pub lower: OrbitId,
    pub upper: OrbitId,
    pub value: Option<AffineInt>,
}

/// Entries for comparable pairs; all other entries are identically zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CMatrix {
    pub entries: Vec<CMatrixEntry>,
}

impl CMatrix {
    /// `Some(0)` for incomparable pairs, `None` for undetermined entries.
    pub fn get(&self, lower: &OrbitId, upper: &OrbitId) -> Option<AffineInt> {
        match self.entries.iter().find(|e| &e.lower == lower && &e.upper == upper) {
            Some(e) => e.value.clone(),
            None => Some(AffineInt::zero()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FreeParameter {
    pub name: String,
    pub lower: OrbitId,
    pub upper: OrbitId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundWitness {
    pub source: String,
    pub orbit: OrbitId,
    pub expr: AffineInt,
}

/// Integer bounds on a parameter implied by nonnegativity of multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParameterBound {
    pub parameter: String,
    #[serde(serialize_with = "ser_opt_bigint")]
    pub lower: Option<BigInt>,
    #[serde(serialize_with = "ser_opt_bigint")]
    pub upper: Option<BigInt>,
    pub lower_witness: Option<BoundWitness>,
    pub upper_witness: Option<BoundWitness>,
}

fn ser_opt_bigint<S: serde::Serializer>(v: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(b) => match b.to_i64() {
            Some(i) => s.serialize_i64(i),
            None => s.serialize_str(&b.to_string()),
        },
        None => s.serialize_none(),
    }
}

impl ParameterBound {
    pub fn admits(&self, value: &BigInt) -> bool {
        self.lower.as_ref().is_none_or(|l| value >= l) && self.upper.as_ref().is_none_or(|u| value <= u)
    }
}

impl fmt::Display for ParameterBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.lower, &self.upper) {
            (Some(l), Some(u)) => write!(f, "{l} <= {} <= {u}", self.parameter),
            (Some(l), None) => write!(f, "{} >= {l}", self.parameter),
            (None, Some(u)) => write!(f, "{} <= {u}", self.parameter),
            (None, None) => write!(f, "{} unbounded", self.parameter),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundError {
    #[error("multi-parameter multiplicity {expr} at {at} along {orbit}")]
    MultiParameter {
        at: String,
        orbit: OrbitId,
        expr: AffineInt,
    },
    #[error("infeasible bounds for {parameter}: {lower} > {upper}")]
    Infeasible {
        parameter: String,
        lower: BigInt,
        upper: BigInt,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolveReport {
    pub cmatrix: CMatrix,
    pub free_parameters: Vec<FreeParameter>,
    pub parameter_bounds: Vec<ParameterBound>,
    /// Set when bounds could not be derived.
    pub bound_error: Option<String>,
    pub residual_unknowns: Vec<(OrbitId, OrbitId)>,
    pub cc_table: Vec<CharacteristicCycle>,
    /// Cycles completed by the localization recipe rather than by the solver.
    pub localized: Vec<LocalSystemId>,
    pub skipped_equations: usize,
    pub equations: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("inconsistent system; minimal conflicting subset:\n  {}", .0.join("\n  "))]
    Inconsistent(Vec<String>),
    #[error("{0}")]
    Linear(LinsolveError),
}

pub fn solve(cs: &ConstraintSystem) -> Result<SolveReport, SolveError> {
    let n = cs.unknowns.len();
    let eqs: Vec<LinearEquation> = cs
        .equations
        .iter()
        .map(|e| LinearEquation::new(e.terms.iter().cloned(), e.rhs.clone()))
        .collect();
    let sol = linsolve::solve(n, &eqs).map_err(|e| match e {
        LinsolveError::Inconsistent(set) => {
            SolveError::Inconsistent(set.iter().map(|&i| cs.describe(&cs.equations[i])).collect())
        }
        other => SolveError::Linear(other),
    })?;

    let mut appears = vec![false; n];
    for e in &cs.equations {
        for (j, _) in &e.terms {
            appears[*j] = true;
        }
    }
    let mut param_of: BTreeMap<usize, String> = BTreeMap::new();
    let mut free_parameters = Vec::new();
    let mut residual_unknowns = Vec::new();
    for j in sol.free_variables() {
        if let Unknown::Coefficient { lower, upper } = &cs.unknowns[j] {
            if appears[j] {
                let name = cs
                    .names
                    .get(&(lower.clone(), upper.clone()))
                    .cloned()
                    .unwrap_or_else(|| format!("p_{lower}_{upper}"));
                param_of.insert(j, name.clone());
                free_parameters.push(FreeParameter {
                    name,
                    lower: lower.clone(),
                    upper: upper.clone(),
                });
            } else {
                residual_unknowns.push((lower.clone(), upper.clone()));
            }
        }
    }
    let value_of = |j: usize| -> Option<AffineInt> {
        let v = sol.value(j);
        let mut out = v.constant;
        for (k, q) in &v.free {
            out = out + AffineInt::parameter(param_of.get(k)?.clone()).scale(q);
        }
        Some(out)
    };

    let mut entries = Vec::new();
    for (j, u) in cs.unknowns.iter().enumerate() {
        if let Unknown::Coefficient { lower, upper } = u {
            entries.push(CMatrixEntry {
                lower: lower.clone(),
                upper: upper.clone(),
                value: value_of(j),
            });
        }
    }
    let cc_table = cs
        .local_systems
        .iter()
        .map(|ls| CharacteristicCycle {
            source: ls.clone(),
            mult: cs
                .orbits
                .iter()
                .map(|o| CycleCell {
                    orbit: o.clone(),
                    value: value_of(
                        cs.index_of(&Unknown::Micro {
                            orbit: o.clone(),
                            source: ls.clone(),
                        })
                        .expect("every micro unknown is declared"),
                    ),
                })
                .collect(),
        })
        .collect();

    let mut report = SolveReport {
        cmatrix: CMatrix { entries },
        free_parameters,
        parameter_bounds: Vec::new(),
        bound_error: None,
        residual_unknowns,
        cc_table,
        localized: Vec::new(),
        skipped_equations: cs.skipped.len(),
        equations: cs.equations.len(),
    };
    report.refresh_bounds();
    Ok(report)
}

impl SolveReport {
    pub fn cycle(&self, ls: &LocalSystemId) -> Option<&CharacteristicCycle> {
        self.cc_table.iter().find(|c| &c.source == ls)
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.free_parameters.iter().map(|p| p.name.as_str()).collect()
    }

    /// Recomputes parameter bounds from the current cells.
    pub fn refresh_bounds(&mut self) {
        match parameter_bounds(self) {
            Ok(b) => {
                self.parameter_bounds = b;
                self.bound_error = None;
            }
            Err(e) => {
                self.parameter_bounds = Vec::new();
                self.bound_error = Some(e.to_string());
            }
        }
    }
}

pub fn characteristic_cycle<'a>(
    sr: &'a SolveReport,
    ls: &LocalSystemId,
) -> Result<&'a CharacteristicCycle, crate::dataset::DatasetError> {
    sr.cycle(ls)
        .ok_or_else(|| crate::dataset::DatasetError::UnknownLocalSystem(ls.clone()))
}

fn ceil_div(a: &Rational) -> BigInt {
    a.ceil().to_integer()
}

/// Tightest univariate bounds making every listed form nonnegative.
pub fn bounds_from_forms<'a>(
    forms: impl IntoIterator<Item = (String, OrbitId, &'a AffineInt)>,
) -> Result<Vec<ParameterBound>, BoundError> {
    let mut bounds: BTreeMap<String, ParameterBound> = BTreeMap::new();
    for (source, orbit, f) in forms {
        let params: Vec<(&str, &Rational)> = f.coefficients().collect();
        let (name, b) = match params.as_slice() {
            [] => continue,
            [(name, b)] => (name.to_string(), (*b).clone()),
            _ => {
                return Err(BoundError::MultiParameter {
                    at: source,
                    orbit,
                    expr: f.clone(),
                })
            }
        };
        let root = -f.constant_term() / &b;
        let entry = bounds.entry(name.clone()).or_insert_with(|| ParameterBound {
            parameter: name,
            lower: None,
            upper: None,
            lower_witness: None,
            upper_witness: None,
        });
        let witness = BoundWitness {
            source,
            orbit,
            expr: f.clone(),
        };
        if b.is_positive() {
            let l = ceil_div(&root);
            if entry.lower.as_ref().is_none_or(|cur| &l > cur) {
                entry.lower = Some(l);
                entry.lower_witness = Some(witness);
            }
        } else {
            let u = root.floor().to_integer();
            if entry.upper.as_ref().is_none_or(|cur| &u < cur) {
                entry.upper = Some(u);
                entry.upper_witness = Some(witness);
            }
        }
    }
    for b in bounds.values() {
        if let (Some(l), Some(u)) = (&b.lower, &b.upper) {
            if l > u {
                return Err(BoundError::Infeasible {
                    parameter: b.parameter.clone(),
                    lower: l.clone(),
                    upper: u.clone(),
                });
            }
        }
    }
    Ok(bounds.into_values().collect())
}

/// Bounds from nonnegativity of every determined cycle multiplicity.
pub fn parameter_bounds(sr: &SolveReport) -> Result<Vec<ParameterBound>, BoundError> {
    bounds_from_forms(sr.cc_table.iter().flat_map(|cc| {
        cc.mult.iter().filter_map(move |cell| {
            cell.value
                .as_ref()
                .map(|v| (cc.source.to_string(), cell.orbit.clone(), v))
        })
    }))
}

/// Smallest admissible integer for a parameter, if bounded below.
pub fn minimal_admissible(sr: &SolveReport, name: &str) -> Option<BigInt> {
    sr.parameter_bounds
        .iter()
        .find(|b| b.parameter == name)
        .and_then(|b| b.lower.clone())
}

// ---------------------------------------------------------------------------
// Reconstruction of local Euler characteristics

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("parameter does not cancel: {}", .0.iter().map(|(s, o, v)| format!("loc_{o}({s}) = {v}")).collect::<Vec<_>>().join(", "))]
    ParameterDoesNotCancel(Vec<(LocalSystemId, OrbitId, AffineInt)>),
    #[error("non-integral local Euler value loc_{1}({0}) = {2}")]
    NotIntegral(LocalSystemId, OrbitId, AffineInt),
}

/// Inverts the coefficient matrix against the given cycles:
/// `loc_r = (mic_r - sum_{t > r} c(r, t) loc_t) / c(r, r)`, top down.
/// Cells that depend on undetermined inputs are left unknown.
pub fn reconstruct_local_euler(
    ds: &Dataset,
    sr: &SolveReport,
    published: &[CharacteristicCycle],
) -> Result<EulerMatrix, ReconstructError> {
    let p = &ds.poset;
    let desc = p.descending();
    let orbits: Vec<OrbitId> = p.ids().cloned().collect();
    let mut cells = Vec::new();
    let mut offending = Vec::new();
    for cc in published {
        let si = p.index_of(&cc.source.orbit).ok();
        let mut loc: BTreeMap<usize, Option<AffineInt>> = BTreeMap::new();
        for &r in &desc {
            let rid = &p.orbits[r].id;
            let value = match si {
                Some(si) if p.leq_idx(r, si) => (|| {
                    let mut acc = cc.cell(rid)?.clone();
                    for &t in &desc {
                        if t != r && p.leq_idx(r, t) && p.leq_idx(t, si) {
                            let lt = loc.get(&t)?.as_ref()?;
                            if lt.is_zero() {
                                continue;
                            }
                            let c = sr.cmatrix.get(rid, &p.orbits[t].id)?;
                            let prod = match (c.as_constant(), lt.as_constant()) {
                                (Some(k), _) => lt.scale(k),
                                (_, Some(k)) => c.scale(k),
                                _ => return None,
                            };
                            acc = acc - prod;
                        }
                    }
                    let d = sr.cmatrix.get(rid, rid)?;
                    let d = d.as_constant()?.clone();
                    if d.is_zero() {
                        return None;
                    }
                    Some(acc.scale(&(rational(1) / d)))
                })(),
                Some(_) => Some(AffineInt::zero()),
                None => None,
            };
            loc.insert(r, value);
        }
        let mut row = Vec::new();
        for (i, o) in orbits.iter().enumerate() {
            let v = loc.get(&i).cloned().flatten();
            row.push(match v {
                None => None,
                Some(v) => {
                    if !v.is_constant() {
                        offending.push((cc.source.clone(), o.clone(), v));
                        None
                    } else {
                        match v.as_integer() {
                            Some(k) => Some(k),
                            None => return Err(ReconstructError::NotIntegral(cc.source.clone(), o.clone(), v)),
                        }
                    }
                }
            });
        }
        cells.push(row);
    }
    if !offending.is_empty() {
        return Err(ReconstructError::ParameterDoesNotCancel(offending));
    }
    Ok(EulerMatrix {
        sources: published.iter().map(|c| c.source.clone()).collect(),
        orbits,
        cells,
    })
}

// ---------------------------------------------------------------------------
// Localization recipe for the open-orbit local system

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LocalizationError {
    #[error("dataset has no localization data")]
    Missing,
    #[error("exceptional orbit {0} must carry a single rank-one local system")]
    ExceptionalShape(OrbitId),
    #[error("composition series of the direct image is not unique ({0} decompositions)")]
    NotUnique(usize),
    #[error("no composition series of the direct image matches its characteristic cycle")]
    NoDecomposition,
    #[error("cannot solve the pairing for the exceptional multiplicities")]
    Underdetermined,
    #[error("coefficient c({0},{1}) is undetermined")]
    UndeterminedCoefficient(OrbitId, OrbitId),
    #[error("composition check nonzero at {probe}: {value}")]
    CompositionCheckNonzero { probe: LocalSystemId, value: AffineInt },
    #[error("localized cycle disagrees with the solver at {0}: {1} vs {2}")]
    Mismatch(OrbitId, AffineInt, AffineInt),
    #[error(transparent)]
    Pairing(#[from] MultiplicityError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExceptionalValue {
    pub orbit: OrbitId,
    pub symbol: String,
    /// The multiplicity forced by the vanishing pairing.
    pub from_pairing: AffineInt,
    /// `c(orbit, open orbit)` read from the coefficient matrix.
    pub from_coefficients: AffineInt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Localization {
    pub cycle: CharacteristicCycle,
    pub pushforward: LocalSystemId,
    /// Composition series of the direct image, with exceptional
    /// multiplicities written in the symbols of `exceptional`.
    pub composition: Vec<(LocalSystemId, AffineInt)>,
    pub pairings: Vec<Pairing>,
    pub exceptional: Vec<ExceptionalValue>,
    /// Pairing totals after substituting the coefficient-matrix values; all zero.
    pub checks: Vec<(LocalSystemId, AffineInt)>,
}

struct Peeler<'a> {
    ds: &'a Dataset,
    sr: &'a SolveReport,
    order: Vec<OrbitId>,
    target: BTreeMap<OrbitId, AffineInt>,
    exceptional: BTreeMap<OrbitId, String>,
    top: LocalSystemId,
    found: Vec<Vec<(LocalSystemId, AffineInt)>>,
}

impl Peeler<'_> {
    fn remainder(&self, orbit: &OrbitId, chosen: &[(LocalSystemId, AffineInt)]) -> Option<AffineInt> {
        let mut r = self.target[orbit].clone();
        for (g, m) in chosen {
            let cell = self.sr.cycle(g)?.cell(orbit)?;
            if cell.is_zero() {
                continue;
            }
            let prod = match (m.as_constant(), cell.as_constant()) {
                (Some(k), _) => cell.scale(k),
                (_, Some(k)) => m.scale(k),
                _ => return None,
            };
            r = r - prod;
        }
        Some(r)
    }

    fn run(&mut self, k: usize, chosen: &mut Vec<(LocalSystemId, AffineInt)>) {
        if self.found.len() > 1 {
            return;
        }
        if k == self.order.len() {
            self.found.push(chosen.clone());
            return;
        }
        let orbit = self.order[k].clone();
        let Some(r) = self.remainder(&orbit, chosen) else { return };
        if k == 0 {
            let d = self.ds.irrep_dim(&self.top).unwrap_or(0);
            if r == AffineInt::constant(i64::from(d)) {
                chosen.push((self.top.clone(), AffineInt::constant(1)));
                self.run(1, chosen);
                chosen.pop();
            }
            return;
        }
        if self.exceptional.contains_key(&orbit) {
            let irrep = &self.ds.poset.orbit(&orbit).expect("dataset ids").group.irreps[0];
            chosen.push((LocalSystemId::new(orbit.as_str(), irrep.label.as_str()), r));
            self.run(k + 1, chosen);
            chosen.pop();
            return;
        }
        let Some(total) = r.as_integer() else { return };
        if total < 0 {
            return;
        }
        let irreps: Vec<(LocalSystemId, i64)> = self
            .ds
            .poset
            .orbit(&orbit)
            .expect("dataset ids")
            .group
            .irreps
            .iter()
            .map(|i| (LocalSystemId::new(orbit.as_str(), i.label.as_str()), i64::from(i.dim)))
            .collect();
        self.split(k, &irreps, 0, total, chosen);
    }

    /// Every way of writing `left` as `sum m_i * dim_i` with `m_i >= 0`.
    fn split(
        &mut self,
        k: usize,
        irreps: &[(LocalSystemId, i64)],
        i: usize,
        left: i64,
        chosen: &mut Vec<(LocalSystemId, AffineInt)>,
    ) {
        if i == irreps.len() {
            if left == 0 {
                self.run(k + 1, chosen);
            }
            return;
        }
        let (ls, d) = &irreps[i];
        for m in 0..=left / d {
            if m > 0 {
                chosen.push((ls.clone(), AffineInt::constant(m)));
            }
            self.split(k, irreps, i + 1, left - m * d, chosen);
            if m > 0 {
                chosen.pop();
            }
        }
    }
}

/// Characteristic cycle of the open-orbit local system `ds.localization.target`.
///
/// Its cycle equals that of the direct image of `pushforward`, which is 1 on
/// every conormal with a dense orbit and an unknown `a_S` on each orbit listed
/// in `non_dense_conormal`. The composition series of the direct image is
/// peeled off top down from the solved cycle table; the pairing of the
/// inverse multiplicity row at each exceptional orbit with that series
/// vanishes, which determines `a_S`. The result must agree with
/// `c(S, open orbit)`, the open-orbit column of the coefficient matrix.
pub fn special_cc_localization(ds: &Dataset, sr: &SolveReport) -> Result<Localization, LocalizationError> {
    let loc = ds.localization.as_ref().ok_or(LocalizationError::Missing)?;
    let p = &ds.poset;
    let order: Vec<OrbitId> = p.descending().into_iter().map(|i| p.orbits[i].id.clone()).collect();
    let top_orbit = order[0].clone();
    let single = ds.non_dense_conormal.len() == 1;
    let mut exceptional = BTreeMap::new();
    for o in &ds.non_dense_conormal {
        let irreps = &p.orbit(o).expect("validated at load").group.irreps;
        if irreps.len() != 1 || irreps[0].dim != 1 {
            return Err(LocalizationError::ExceptionalShape(o.clone()));
        }
        let symbol = if single { "a".to_string() } else { format!("a_{o}") };
        exceptional.insert(o.clone(), symbol);
    }
    let target: BTreeMap<OrbitId, AffineInt> = order
        .iter()
        .map(|o| {
            let v = match exceptional.get(o) {
                Some(s) => AffineInt::parameter(s.clone()),
                None => AffineInt::constant(1),
            };
            (o.clone(), v)
        })
        .collect();

    let mut peeler = Peeler {
        ds,
        sr,
        order: order.clone(),
        target: target.clone(),
        exceptional: exceptional.clone(),
        top: loc.pushforward.clone(),
        found: Vec::new(),
    };
    peeler.run(0, &mut Vec::new());
    let composition: Vec<(LocalSystemId, AffineInt)> = match peeler.found.len() {
        0 => return Err(LocalizationError::NoDecomposition),
        1 => peeler.found.pop().expect("one element"),
        n => return Err(LocalizationError::NotUnique(n)),
    };

    let mut pairings = Vec::new();
    for o in exceptional.keys() {
        let irrep = &p.orbit(o).expect("validated").group.irreps[0];
        let probe = LocalSystemId::new(o.as_str(), irrep.label.as_str());
        pairings.push(composition_pairing(ds, &probe, &composition)?);
    }

    // pairing totals vanish: a linear system in the exceptional symbols
    let symbols: Vec<(&OrbitId, &String)> = exceptional.iter().collect();
    let eqs: Vec<LinearEquation> = pairings
        .iter()
        .map(|pr| {
            let terms: Vec<(usize, Rational)> = symbols
                .iter()
                .enumerate()
                .map(|(j, (_, s))| (j, pr.total.coefficient(s)))
                .collect();
            let mut rest = pr.total.clone();
            for (_, s) in &symbols {
                rest = rest - AffineInt::parameter(s.to_string()).scale(&pr.total.coefficient(s));
            }
            LinearEquation::new(terms, -rest)
        })
        .collect();
    let sol = linsolve::solve(symbols.len(), &eqs).map_err(|_| LocalizationError::Underdetermined)?;
    let mut values = Vec::new();
    let mut kashiwara: BTreeMap<String, AffineInt> = BTreeMap::new();
    for (j, (o, s)) in symbols.iter().enumerate() {
        let v = sol.value(j);
        if !v.is_determined() {
            return Err(LocalizationError::Underdetermined);
        }
        let c = sr
            .cmatrix
            .get(o, &top_orbit)
            .ok_or_else(|| LocalizationError::UndeterminedCoefficient((*o).clone(), top_orbit.clone()))?;
        kashiwara.insert(s.to_string(), c.clone());
        values.push(ExceptionalValue {
            orbit: (*o).clone(),
            symbol: s.to_string(),
            from_pairing: v.constant,
            from_coefficients: c,
        });
    }
    let mut checks = Vec::new();
    for pr in &pairings {
        let value = pr.total.substitute_affine(&kashiwara);
        if !value.is_zero() {
            return Err(LocalizationError::CompositionCheckNonzero {
                probe: pr.probe.clone(),
                value,
            });
        }
        checks.push((pr.probe.clone(), value));
    }

    let cycle = CharacteristicCycle {
        source: loc.target.clone(),
        mult: order
            .iter()
            .map(|o| CycleCell {
                orbit: o.clone(),
                value: Some(target[o].substitute_affine(&kashiwara)),
            })
            .collect(),
    };
    Ok(Localization {
        cycle,
        pushforward: loc.pushforward.clone(),
        composition,
        pairings,
        exceptional: values,
        checks,
    })
}

/// Completes the target cycle with the localized values. Cells the solver
/// already determined must agree.
pub fn apply_localization(sr: &mut SolveReport, loc: &Localization) -> Result<(), LocalizationError> {
    let Some(cc) = sr.cc_table.iter_mut().find(|c| c.source == loc.cycle.source) else {
        return Ok(());
    };
    for cell in &mut cc.mult {
        let new = loc.cycle.cell(&cell.orbit).cloned();
        match (&cell.value, new) {
            (Some(old), Some(new)) if old != &new => {
                return Err(LocalizationError::Mismatch(cell.orbit.clone(), old.clone(), new));
            }
            (None, Some(new)) => cell.value = Some(new),
            _ => {}
        }
    }
    if !sr.localized.contains(&loc.cycle.source) {
        sr.localized.push(loc.cycle.source.clone());
    }
    sr.refresh_bounds();
    Ok(())
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
}

/// Constraints, solve, and localization (when the dataset supplies it).
pub fn solve_dataset(ds: &Dataset) -> Result<(ConstraintSystem, SolveReport, Option<Localization>), PipelineError> {
    let em = euler::euler_matrix(ds);
    let cs = build_constraints(ds, &em);
    let mut sr = solve(&cs)?;
    let loc = match ds.localization {
        Some(_) => {
            let loc = special_cc_localization(ds, &sr)?;
            apply_localization(&mut sr, &loc)?;
            Some(loc)
        }
        None => None,
    };
    Ok((cs, sr, loc))
}

/// True iff no root lies in `Z + 1/2`.
pub fn check_halfinteger_roots(roots: &[Rational]) -> bool {
    let two = BigInt::from(2);
    roots.iter().all(|r| {
        let twice = r * Rational::from_integer(two.clone());
        !(twice.is_integer() && !(twice.to_integer() % &two).is_zero())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affine::parse_rational;
    use crate::dataset::{bundled_f4a3, parse_dataset};

    fn o(s: &str) -> OrbitId {
        OrbitId::new(s)
    }
    fn ls(a: &str, b: &str) -> LocalSystemId {
        LocalSystemId::new(a, b)
    }
    fn c() -> AffineInt {
        AffineInt::parameter("c")
    }
    fn k(n: i64) -> AffineInt {
        AffineInt::constant(n)
    }

    fn bundled() -> (Dataset, ConstraintSystem, SolveReport, Localization) {
        let ds = bundled_f4a3();
        let (cs, sr, loc) = solve_dataset(&ds).unwrap();
        (ds, cs, sr, loc.unwrap())
    }

    fn point() -> Dataset {
        parse_dataset(
            r#"{
          "schema_version": 1, "ambient_dim": 0,
          "orbits": [{"id": "P", "dim": 0, "group": {"name": "trivial", "irreps": [{"label": "(1)", "dim": 1}]}}],
          "covers": [],
          "duality": {"hat": [["P", "P"]], "fourier": [[["P", "(1)"], ["P", "(1)"]]]},
          "catalog": [{"id": "Y", "param": ["P", "(1)"], "az": "Y", "iwahori_spherical": true, "unitary": true}],
          "special_piece": ["P"],
          "localization": {"target": ["P", "(1)"], "pushforward": ["P", "(1)"]}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn coefficient_relations_are_generated() {
        let (_, cs, _, _) = bundled();
        let rels: Vec<String> = cs.coefficient_relations().iter().map(|r| r.to_string()).collect();
        assert!(rels.iter().any(|r| r == "0 = 1 + 2·c(S8,S10) + 3·c(S8,S11)"), "{rels:#?}");
        assert!(rels.iter().any(|r| r == "0 = -1 + c(S10,S11)"), "{rels:#?}");
    }

    #[test]
    fn point_dataset_has_only_the_diagonal_coefficient() {
        let ds = point();
        let cs = build_constraints(&ds, &euler::euler_matrix(&ds));
        let coefficient_eqs: Vec<&Equation> = cs
            .equations
            .iter()
            .filter(|e| e.terms.iter().any(|(j, _)| matches!(cs.unknowns[*j], Unknown::Coefficient { .. })))
            .collect();
        assert_eq!(coefficient_eqs.len(), 2);
        let sr = solve(&cs).unwrap();
        assert_eq!(sr.cmatrix.get(&o("P"), &o("P")), Some(k(1)));
        assert!(sr.free_parameters.is_empty());
        assert!(sr.parameter_bounds.is_empty());
        assert_eq!(sr.cc_table[0].cell(&o("P")), Some(&k(1)));
        let loc = special_cc_localization(&ds, &sr).unwrap();
        assert_eq!(loc.cycle.cell(&o("P")), Some(&k(1)));
    }

    #[test]
    fn single_free_parameter_named_c() {
        let (_, _, sr, _) = bundled();
        assert_eq!(sr.parameter_names(), vec!["c"]);
        assert_eq!(sr.free_parameters[0].lower, o("S4"));
        assert_eq!(sr.free_parameters[0].upper, o("S11"));
        let rows: std::collections::BTreeSet<&str> = sr.residual_unknowns.iter().map(|(a, _)| a.as_str()).collect();
        assert_eq!(rows, ["S0", "S1", "S2", "S3", "S6"].into_iter().collect());
    }

    #[test]
    fn cycles_of_closed_and_open_orbits() {
        let (_, _, sr, _) = bundled();
        let cc = characteristic_cycle(&sr, &ls("S1", "(1)")).unwrap();
        let support: Vec<(String, String)> = cc
            .support()
            .map(|c| (c.orbit.to_string(), c.value.as_ref().unwrap().to_string()))
            .collect();
        assert_eq!(support, vec![("S1".into(), "1".into()), ("S0".into(), "3".into())]);
        let cc = characteristic_cycle(&sr, &ls("S8", "(1)")).unwrap();
        assert_eq!(cc.cell(&o("S4")), Some(&(c() - k(2))));
        assert_eq!(characteristic_cycle(&sr, &ls("S0", "(1)")).unwrap().support().count(), 1);
        assert!(characteristic_cycle(&sr, &ls("S0", "(7)")).is_err());
    }

    #[test]
    fn bounds() {
        let (_, _, sr, _) = bundled();
        assert_eq!(sr.parameter_bounds.len(), 1);
        assert_eq!(sr.parameter_bounds[0].to_string(), "c >= 2");
        let w = sr.parameter_bounds[0].lower_witness.as_ref().unwrap();
        assert_eq!((w.source.as_str(), w.orbit.as_str()), ("(S8, (1))", "S4"));

        let f = k(1) - AffineInt::parameter("p");
        let b = bounds_from_forms([("x".to_string(), o("A"), &f)]).unwrap();
        assert_eq!(b[0].to_string(), "p <= 1");
        let g = AffineInt::parameter("p") - k(3);
        assert!(matches!(
            bounds_from_forms([("x".to_string(), o("A"), &f), ("y".to_string(), o("A"), &g)]),
            Err(BoundError::Infeasible { .. })
        ));
        let h = AffineInt::parameter("p") + AffineInt::parameter("q");
        assert!(matches!(
            bounds_from_forms([("x".to_string(), o("A"), &h)]),
            Err(BoundError::MultiParameter { .. })
        ));
        let half = AffineInt::parameter("p").scale(&rational(2)) - k(3);
        assert_eq!(bounds_from_forms([("x".to_string(), o("A"), &half)]).unwrap()[0].to_string(), "p >= 2");
    }

    #[test]
    fn localization_matches_the_coefficient_column() {
        let (_, _, sr, loc) = bundled();
        for cell in &loc.cycle.mult {
            let expected = if cell.orbit.as_str() == "S4" { c() } else { k(1) };
            assert_eq!(cell.value.as_ref(), Some(&expected), "{}", cell.orbit);
        }
        assert_eq!(loc.pairings[0].constant_arithmetic(), "-1 + 2 - 1");
        assert_eq!(loc.exceptional[0].from_pairing, c());
        assert_eq!(loc.exceptional[0].from_coefficients, c());
        assert!(loc.checks.iter().all(|(_, v)| v.is_zero()));
        assert_eq!(sr.localized, vec![ls("S11", "(1^4)")]);
        assert!(sr.cycle(&ls("S11", "(1^4)")).unwrap().is_determined());
    }

    #[test]
    fn localization_rejects_a_wrong_coefficient() {
        let (ds, _, mut sr, _) = bundled();
        for e in &mut sr.cmatrix.entries {
            if e.lower.as_str() == "S4" && e.upper.as_str() == "S11" {
                e.value = Some(c() + k(1));
            }
        }
        assert!(matches!(
            special_cc_localization(&ds, &sr),
            Err(LocalizationError::CompositionCheckNonzero { .. })
        ));
    }

    #[test]
    fn reconstruction_of_the_identity() {
        let ds = point();
        let (_, sr, _) = solve_dataset(&ds).unwrap();
        let em = reconstruct_local_euler(&ds, &sr, &sr.cc_table).unwrap();
        assert_eq!(em.get(&ls("P", "(1)"), &o("P")), Some(1));
    }

    #[test]
    fn reconstruction_rejects_uncancelled_parameters() {
        let (ds, _, sr, _) = bundled();
        let mut cc = sr.cycle(&ls("S9", "(1)")).unwrap().clone();
        for cell in &mut cc.mult {
            if cell.orbit.as_str() == "S4" {
                cell.value = Some(c());
            }
        }
        assert!(matches!(
            reconstruct_local_euler(&ds, &sr, &[cc]),
            Err(ReconstructError::ParameterDoesNotCancel(_))
        ));
    }

    #[test]
    fn half_integer_roots() {
        let q = |s: &str| parse_rational(s).unwrap();
        assert!(check_halfinteger_roots(&[q("-1"), q("-3/4"), q("-5/4"), q("-5/6"), q("-7/6")]));
        assert!(!check_halfinteger_roots(&[q("-1/2")]));
        assert!(!check_halfinteger_roots(&[q("-3/2"), q("-1")]));
        assert!(check_halfinteger_roots(&[q("-1")]));
    }

    #[test]
    fn inconsistent_data_reports_a_minimal_subset() {
        let ds = bundled_f4a3();
        let mut em = euler::euler_matrix(&ds);
        let i = em.sources.iter().position(|s| s == &ls("S11", "(4)")).unwrap();
        let j = em.orbits.iter().position(|x| x.as_str() == "S10").unwrap();
        em.cells[i][j] = Some(5);
        let err = solve(&build_constraints(&ds, &em)).unwrap_err();
        let SolveError::Inconsistent(lines) = err else { panic!() };
        assert!(!lines.is_empty() && lines.len() < 20, "{lines:#?}");
    }

    #[test]
    fn solving_is_deterministic() {
        let (_, _, a, _) = bundled();
        let (_, _, b, _) = bundled();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
