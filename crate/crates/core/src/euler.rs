//! Kazhdan-Lusztig evaluations, local Euler characteristics, and the
//! geometric multiplicity matrix relating standard and simple objects.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::affine::{rational, AffineInt};
use crate::dataset::{Dataset, DatasetError, LocalSystemId, OrbitId, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Value stated in the source text.
    Quoted,
    /// Value recovered by inverting the coefficient matrix against a published cycle table.
    Reconstructed,
    /// Value supplied by an external table.
    External,
}

impl Provenance {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quoted" => Some(Self::Quoted),
            "reconstructed" => Some(Self::Reconstructed),
            "external" => Some(Self::External),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KlRecord {
    pub value: i64,
    pub provenance: Provenance,
}

/// `P_{target, source}(1)` for pinned pairs, plus orbit-level weighted sums
/// `sum_{L''} dim(L'') P_{(S'', L''), source}(1)` where only the sum is known.
///
/// Pairs forced by support (target orbit not in the closure of the source
/// orbit) or by normalization (same orbit) are never stored; [`kl_value`]
/// supplies them.
#[derive(Clone, Debug, Default)]
pub struct KlEvaluationTable {
    pub entries: BTreeMap<(LocalSystemId, LocalSystemId), KlRecord>,
    pub sums: BTreeMap<(OrbitId, LocalSystemId), KlRecord>,
}

/// `P_{target, source}(1)`, or `None` when the pair is not pinned.
pub fn kl_value(
    ds: &Dataset,
    target: &LocalSystemId,
    source: &LocalSystemId,
) -> Result<Option<i64>, DatasetError> {
    ds.check_local_system(target)?;
    ds.check_local_system(source)?;
    if target.orbit == source.orbit {
        return Ok(Some(i64::from(target == source)));
    }
    let p = &ds.poset;
    if !p.leq_idx(p.index_of(&target.orbit)?, p.index_of(&source.orbit)?) {
        return Ok(Some(0));
    }
    Ok(ds
        .kl
        .entries
        .get(&(target.clone(), source.clone()))
        .map(|r| r.value))
}

/// `sum_{L''} dim(L'') P_{(target, L''), source}(1)`.
pub fn weighted_orbit_sum(
    ds: &Dataset,
    source: &LocalSystemId,
    target: &OrbitId,
) -> Result<Option<i64>, DatasetError> {
    let orbit = ds.poset.orbit(target)?;
    let mut total = 0i64;
    let mut complete = true;
    for irrep in &orbit.group.irreps {
        let ls = LocalSystemId::new(target.as_str(), irrep.label.as_str());
        match kl_value(ds, &ls, source)? {
            Some(v) => total += i64::from(irrep.dim) * v,
            None => {
                complete = false;
                break;
            }
        }
    }
    if complete {
        return Ok(Some(total));
    }
    Ok(ds
        .kl
        .sums
        .get(&(target.clone(), source.clone()))
        .map(|r| r.value))
}

fn sign(dim: u32) -> i64 {
    if dim.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Local Euler characteristic of `IC(source)` along `target`:
/// `(-1)^{dim source orbit} * sum_{L''} dim(L'') P_{(target, L''), source}(1)`.
/// `None` when a required evaluation is not pinned.
pub fn local_euler(
    ds: &Dataset,
    source: &LocalSystemId,
    target: &OrbitId,
) -> Result<Option<i64>, DatasetError> {
    let d = ds.orbit_dim(&source.orbit)?;
    Ok(weighted_orbit_sum(ds, source, target)?.map(|s| sign(d) * s))
}

/// Local Euler characteristics, rows by source local system and columns by orbit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EulerMatrix {
    pub sources: Vec<LocalSystemId>,
    pub orbits: Vec<OrbitId>,
    /// `cells[i][j]` is the value for `sources[i]` along `orbits[j]`.
    pub cells: Vec<Vec<Option<i64>>>,
}

impl EulerMatrix {
    pub fn get(&self, source: &LocalSystemId, target: &OrbitId) -> Option<i64> {
        let i = self.sources.iter().position(|s| s == source)?;
        let j = self.orbits.iter().position(|o| o == target)?;
        self.cells[i][j]
    }

    pub fn pinned(&self) -> impl Iterator<Item = (&LocalSystemId, &OrbitId, i64)> {
        self.sources.iter().enumerate().flat_map(move |(i, s)| {
            self.orbits
                .iter()
                .enumerate()
                .filter_map(move |(j, o)| self.cells[i][j].map(|v| (s, o, v)))
        })
    }
}

pub fn euler_matrix(ds: &Dataset) -> EulerMatrix {
    let sources = ds.local_systems();
    let orbits: Vec<OrbitId> = ds.poset.ids().cloned().collect();
    let cells = sources
        .iter()
        .map(|s| {
            orbits
                .iter()
                .map(|o| local_euler(ds, s, o).expect("ids come from the dataset"))
                .collect()
        })
        .collect();
    EulerMatrix {
        sources,
        orbits,
        cells,
    }
}

/// Normalization, support, and agreement of stored sums with stored entries.
pub fn validate_kl(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let p = &ds.poset;
    let below = |a: &OrbitId, b: &OrbitId| match (p.index_of(a), p.index_of(b)) {
        (Ok(i), Ok(j)) => p.leq_idx(i, j),
        _ => false,
    };
    for ((t, s), rec) in &ds.kl.entries {
        if t == s && rec.value != 1 {
            out.push(Violation::new(
                "kl-normalization",
                format!("P at {t} / {s} must be 1, found {}", rec.value),
            ));
        } else if t != s && t.orbit == s.orbit && rec.value != 0 {
            out.push(Violation::new(
                "kl-normalization",
                format!("P at {t} / {s} on a single orbit must be 0, found {}", rec.value),
            ));
        } else if !below(&t.orbit, &s.orbit) && rec.value != 0 {
            out.push(Violation::new(
                "kl-support",
                format!("P at {t} / {s} is {} but {} is not in the closure of {}", rec.value, t.orbit, s.orbit),
            ));
        }
    }
    for ((t, s), rec) in &ds.kl.sums {
        if !below(t, &s.orbit) && rec.value != 0 {
            out.push(Violation::new(
                "kl-support",
                format!("KL sum at {t} / {s} is {} but {t} is not in the closure of {}", rec.value, s.orbit),
            ));
            continue;
        }
        let Ok(orbit) = p.orbit(t) else { continue };
        let mut total = 0i64;
        let mut complete = true;
        for irrep in &orbit.group.irreps {
            let ls = LocalSystemId::new(t.as_str(), irrep.label.as_str());
            match ds.kl.entries.get(&(ls, s.clone())) {
                Some(r) => total += i64::from(irrep.dim) * r.value,
                None => complete = false,
            }
        }
        if complete && total != rec.value {
            out.push(Violation::new(
                "kl-sum",
                format!("KL sum at {t} / {s} is {} but the entries add up to {total}", rec.value),
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Geometric multiplicities

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MultiplicityError {
    #[error("insufficient KL data: {} unpinned pair(s), first {}", .0.len(), .0.first().map(|(a, b)| format!("{a} / {b}")).unwrap_or_default())]
    InsufficientKlData(Vec<(LocalSystemId, LocalSystemId)>),
    #[error("not unitriangular at {0} / {1}")]
    NotUnitriangular(LocalSystemId, LocalSystemId),
    #[error("unknown local system {0}")]
    UnknownLocalSystem(LocalSystemId),
}

/// Coefficient of `[IC(gamma)]` in the class of the standard object attached
/// to `delta`: `(-1)^{dim S_gamma - dim S_delta} P_{delta, gamma}(1)`.
///
/// When `delta` lies on an orbit with a single irrep, an orbit-level sum is
/// enough to pin the value.
pub fn perverse_coefficient(
    ds: &Dataset,
    delta: &LocalSystemId,
    gamma: &LocalSystemId,
) -> Result<Option<i64>, DatasetError> {
    let s = sign(ds.orbit_dim(&gamma.orbit)? + ds.orbit_dim(&delta.orbit)?);
    if let Some(v) = kl_value(ds, delta, gamma)? {
        return Ok(Some(s * v));
    }
    let orbit = ds.poset.orbit(&delta.orbit)?;
    if orbit.group.irreps.len() == 1 {
        let dim = i64::from(orbit.group.irreps[0].dim);
        if let Some(sum) = weighted_orbit_sum(ds, gamma, &delta.orbit)? {
            if sum % dim == 0 {
                return Ok(Some(s * sum / dim));
            }
        }
    }
    Ok(None)
}

/// `cg[delta][gamma]` from KL data and `mg` its exact inverse, indexed by
/// `local_systems`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MultiplicityMatrices {
    pub local_systems: Vec<LocalSystemId>,
    pub cg: Vec<Vec<i64>>,
    pub mg: Vec<Vec<i64>>,
}

impl MultiplicityMatrices {
    fn index(&self, ls: &LocalSystemId) -> Result<usize, MultiplicityError> {
        self.local_systems
            .iter()
            .position(|l| l == ls)
            .ok_or_else(|| MultiplicityError::UnknownLocalSystem(ls.clone()))
    }
}

/// Inverse of a matrix that is unitriangular after ordering rows and columns by `order`.
fn unitriangular_inverse(
    a: &[Vec<i64>],
    order: &[usize],
    labels: &[LocalSystemId],
) -> Result<Vec<Vec<i64>>, MultiplicityError> {
    let n = a.len();
    let pos: Vec<usize> = {
        let mut p = vec![0; n];
        for (k, &i) in order.iter().enumerate() {
            p[i] = k;
        }
        p
    };
    for i in 0..n {
        for j in 0..n {
            let ok = if i == j {
                a[i][j] == 1
            } else {
                pos[i] <= pos[j] || a[i][j] == 0
            };
            if !ok {
                return Err(MultiplicityError::NotUnitriangular(labels[i].clone(), labels[j].clone()));
            }
        }
    }
    // a is upper triangular in `order`; back-substitute column by column
    let mut inv = vec![vec![0i64; n]; n];
    for col in 0..n {
        for &i in order.iter().rev() {
            let mut v = i64::from(i == col);
            for &j in &order[pos[i] + 1..] {
                v -= a[i][j] * inv[j][col];
            }
            inv[i][col] = v;
        }
    }
    Ok(inv)
}

/// Requires every KL evaluation between local systems to be pinned.
pub fn geometric_multiplicity_matrix(ds: &Dataset) -> Result<MultiplicityMatrices, MultiplicityError> {
    let ls = ds.local_systems();
    let n = ls.len();
    let mut cg = vec![vec![0i64; n]; n];
    let mut missing = Vec::new();
    for (i, d) in ls.iter().enumerate() {
        for (j, g) in ls.iter().enumerate() {
            match perverse_coefficient(ds, d, g).expect("ids come from the dataset") {
                Some(v) => cg[i][j] = v,
                None => missing.push((d.clone(), g.clone())),
            }
        }
    }
    if !missing.is_empty() {
        return Err(MultiplicityError::InsufficientKlData(missing));
    }
    // closure order refined by dimension, smallest first
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (ds.orbit_dim(&ls[i].orbit).unwrap_or(0), i));
    let mg = unitriangular_inverse(&cg, &order, &ls)?;
    Ok(MultiplicityMatrices {
        local_systems: ls,
        cg,
        mg,
    })
}

/// `sum_gamma cg(probe, gamma) mg(gamma, column)`.
pub fn composition_multiplicity(
    mm: &MultiplicityMatrices,
    probe: &LocalSystemId,
    column: &LocalSystemId,
) -> Result<i64, MultiplicityError> {
    let p = mm.index(probe)?;
    let c = mm.index(column)?;
    Ok((0..mm.local_systems.len()).map(|g| mm.cg[p][g] * mm.mg[g][c]).sum())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairingTerm {
    pub gamma: LocalSystemId,
    pub coefficient: i64,
    pub multiplicity: AffineInt,
    pub product: AffineInt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pairing {
    pub probe: LocalSystemId,
    pub terms: Vec<PairingTerm>,
    pub total: AffineInt,
}

impl Pairing {
    /// The constant contributions, e.g. `-1 + 2 - 1`.
    pub fn constant_arithmetic(&self) -> String {
        let mut s = String::new();
        for t in self.terms.iter().filter(|t| t.product.is_constant()) {
            let v = t.product.to_string();
            if s.is_empty() {
                s = v;
            } else if let Some(rest) = v.strip_prefix('-') {
                s.push_str(&format!(" - {rest}"));
            } else {
                s.push_str(&format!(" + {v}"));
            }
        }
        s
    }
}

/// `sum_gamma cg(probe, gamma) m(gamma)` for a column `m` given as a
/// multiplicity per local system (possibly symbolic). Only the row of
/// `cg` at `probe` needs to be pinned on the support of `m`.
pub fn composition_pairing(
    ds: &Dataset,
    probe: &LocalSystemId,
    column: &[(LocalSystemId, AffineInt)],
) -> Result<Pairing, MultiplicityError> {
    let mut terms = Vec::new();
    let mut total = AffineInt::zero();
    let mut missing = Vec::new();
    for (gamma, m) in column {
        if m.is_zero() {
            continue;
        }
        match perverse_coefficient(ds, probe, gamma) {
            Err(_) => return Err(MultiplicityError::UnknownLocalSystem(gamma.clone())),
            Ok(None) => missing.push((probe.clone(), gamma.clone())),
            Ok(Some(0)) => {}
            Ok(Some(k)) => {
                let product = m.scale(&rational(k));
                total = total + product.clone();
                terms.push(PairingTerm {
                    gamma: gamma.clone(),
                    coefficient: k,
                    multiplicity: m.clone(),
                    product,
                });
            }
        }
    }
    if !missing.is_empty() {
        return Err(MultiplicityError::InsufficientKlData(missing));
    }
    Ok(Pairing {
        probe: probe.clone(),
        terms,
        total,
    })
}
