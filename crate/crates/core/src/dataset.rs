//! Orbit stratification datasets: schema, loading and structural validation.
//!
//! A dataset is one JSON document describing a finite orbit stratification
//! (orbits, component groups, closure covers), the hat and Fourier dualities,
//! Kazhdan-Lusztig evaluations at `q = 1`, and the representation catalog.
//! See `docs/dataset-schema.md` for the field-by-field description.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{parse_rational, Rational};
use crate::duality::{self, DualityData};
use crate::euler::{self, KlEvaluationTable, KlRecord, Provenance};

pub const SCHEMA_VERSION: u32 = 1;

/// The bundled dataset, embedded at compile time.
pub const BUNDLED_F4A3: &str = include_str!("../data/f4a3.json");

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown orbit `{0}`")]
    UnknownOrbit(String),
    #[error("unknown local system {0}")]
    UnknownLocalSystem(LocalSystemId),
    #[error("unknown representation `{0}`")]
    UnknownRepresentation(String),
}

fn schema(msg: impl Into<String>) -> DatasetError {
    DatasetError::Schema(msg.into())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrbitId(pub String);

impl OrbitId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for OrbitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Irrep {
    pub label: String,
    pub dim: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentGroup {
    pub name: String,
    pub irreps: Vec<Irrep>,
}

impl ComponentGroup {
    pub fn trivial() -> Self {
        Self {
            name: "trivial".into(),
            irreps: vec![Irrep {
                label: "(1)".into(),
                dim: 1,
            }],
        }
    }

    pub fn irrep(&self, label: &str) -> Option<&Irrep> {
        self.irreps.iter().find(|i| i.label == label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orbit {
    pub id: OrbitId,
    pub dim: u32,
    pub group: ComponentGroup,
}

/// An equivariant local system: an orbit and an irreducible representation of its component group.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(OrbitId, String)", into = "(OrbitId, String)")]
pub struct LocalSystemId {
    pub orbit: OrbitId,
    pub irrep: String,
}

impl LocalSystemId {
    pub fn new(orbit: impl Into<String>, irrep: impl Into<String>) -> Self {
        Self {
            orbit: OrbitId(orbit.into()),
            irrep: irrep.into(),
        }
    }
}

impl From<(OrbitId, String)> for LocalSystemId {
    fn from((orbit, irrep): (OrbitId, String)) -> Self {
        Self { orbit, irrep }
    }
}

impl From<LocalSystemId> for (OrbitId, String) {
    fn from(ls: LocalSystemId) -> Self {
        (ls.orbit, ls.irrep)
    }
}

impl fmt::Display for LocalSystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.orbit, self.irrep)
    }
}

/// Orbits with their closure order.
///
/// The closure relation is the reflexive-transitive hull of the covers and is
/// computed once at construction; it is meaningful as a partial order only
/// when the cover graph is acyclic (see [`validate_dataset`]).
#[derive(Clone, Debug)]
pub struct OrbitPoset {
    pub orbits: Vec<Orbit>,
    pub covers: Vec<(OrbitId, OrbitId)>,
    pub ambient_dim: u32,
    index: BTreeMap<OrbitId, usize>,
    leq: Vec<Vec<bool>>,
}

impl OrbitPoset {
    pub fn new(
        orbits: Vec<Orbit>,
        covers: Vec<(OrbitId, OrbitId)>,
        ambient_dim: u32,
    ) -> Result<Self, DatasetError> {
        let mut index = BTreeMap::new();
        for (i, o) in orbits.iter().enumerate() {
            if index.insert(o.id.clone(), i).is_some() {
                return Err(schema(format!("duplicate orbit id `{}`", o.id)));
            }
        }
        let n = orbits.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (lo, hi) in &covers {
            let a = *index
                .get(lo)
                .ok_or_else(|| schema(format!("cover references unknown orbit `{lo}`")))?;
            let b = *index
                .get(hi)
                .ok_or_else(|| schema(format!("cover references unknown orbit `{hi}`")))?;
            leq[a][b] = true;
        }
        // Warshall
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        Ok(Self {
            orbits,
            covers,
            ambient_dim,
            index,
            leq,
        })
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn index_of(&self, id: &OrbitId) -> Result<usize, DatasetError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| DatasetError::UnknownOrbit(id.0.clone()))
    }

    pub fn orbit(&self, id: &OrbitId) -> Result<&Orbit, DatasetError> {
        Ok(&self.orbits[self.index_of(id)?])
    }

    pub fn contains(&self, id: &OrbitId) -> bool {
        self.index.contains_key(id)
    }

    /// Closure order by index.
    pub fn leq_idx(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn ids(&self) -> impl Iterator<Item = &OrbitId> {
        self.orbits.iter().map(|o| &o.id)
    }

    /// Orbits that are maximal for the closure order.
    pub fn maximal(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| (0..self.len()).all(|j| j == i || !self.leq[i][j] || self.leq[j][i]))
            .collect()
    }

    pub fn minimal(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| (0..self.len()).all(|j| j == i || !self.leq[j][i] || self.leq[i][j]))
            .collect()
    }

    /// The unique maximal orbit, when there is one.
    pub fn open_orbit(&self) -> Option<&Orbit> {
        match self.maximal().as_slice() {
            [i] => Some(&self.orbits[*i]),
            _ => None,
        }
    }

    /// Orbit indices sorted by descending dimension (ties by file order).
    pub fn descending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by_key(|&i| (std::cmp::Reverse(self.orbits[i].dim), i));
        idx
    }
}

/// `a <= b` in the closure order: `a` lies in the closure of `b`.
pub fn closure_leq(poset: &OrbitPoset, a: &OrbitId, b: &OrbitId) -> Result<bool, DatasetError> {
    Ok(poset.leq_idx(poset.index_of(a)?, poset.index_of(b)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representation {
    pub id: String,
    pub param: LocalSystemId,
    pub az: String,
    pub iwahori_spherical: bool,
    pub unitary: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArthurTypeEntry {
    pub orbit: OrbitId,
    pub label: String,
}

/// An unknown coefficient `c(lower, upper)` given a fixed display name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedParameter {
    pub unknown: (OrbitId, OrbitId),
    pub name: String,
}

/// Inputs of the localization recipe: `target` is the open-orbit local system whose
/// characteristic cycle equals that of the direct image of `pushforward`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationSpec {
    pub target: LocalSystemId,
    pub pushforward: LocalSystemId,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub poset: OrbitPoset,
    pub duality: DualityData,
    pub kl: KlEvaluationTable,
    pub catalog: Vec<Representation>,
    pub special_piece_orbits: Vec<OrbitId>,
    pub arthur_type: Vec<ArthurTypeEntry>,
    pub non_dense_conormal: Vec<OrbitId>,
    pub named_parameters: Vec<NamedParameter>,
    pub localization: Option<LocalizationSpec>,
    pub diagonal_rule: bool,
    pub b_function_roots: Option<Vec<Rational>>,
    pub notes: Vec<String>,
}

impl Dataset {
    /// All local systems, orbit by orbit in file order, irreps in group order.
    pub fn local_systems(&self) -> Vec<LocalSystemId> {
        self.poset
            .orbits
            .iter()
            .flat_map(|o| {
                o.group
                    .irreps
                    .iter()
                    .map(move |i| LocalSystemId::new(o.id.0.clone(), i.label.clone()))
            })
            .collect()
    }

    pub fn irrep_dim(&self, ls: &LocalSystemId) -> Result<u32, DatasetError> {
        self.poset
            .orbit(&ls.orbit)?
            .group
            .irrep(&ls.irrep)
            .map(|i| i.dim)
            .ok_or_else(|| DatasetError::UnknownLocalSystem(ls.clone()))
    }

    pub fn check_local_system(&self, ls: &LocalSystemId) -> Result<(), DatasetError> {
        self.irrep_dim(ls).map(|_| ())
    }

    pub fn orbit_dim(&self, id: &OrbitId) -> Result<u32, DatasetError> {
        Ok(self.poset.orbit(id)?.dim)
    }

    pub fn representation(&self, id: &str) -> Result<&Representation, DatasetError> {
        self.catalog
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| DatasetError::UnknownRepresentation(id.to_string()))
    }

    pub fn representation_with_param(&self, ls: &LocalSystemId) -> Option<&Representation> {
        self.catalog.iter().find(|r| &r.param == ls)
    }

    /// Catalog position, used to order representation ids.
    pub fn catalog_rank(&self, id: &str) -> usize {
        self.catalog
            .iter()
            .position(|r| r.id == id)
            .unwrap_or(usize::MAX)
    }

    pub fn parameter_name(&self, lower: &OrbitId, upper: &OrbitId) -> Option<&str> {
        self.named_parameters
            .iter()
            .find(|p| &p.unknown.0 == lower && &p.unknown.1 == upper)
            .map(|p| p.name.as_str())
    }
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDataset {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub ambient_dim: u32,
    pub orbits: Vec<Orbit>,
    pub covers: Vec<(OrbitId, OrbitId)>,
    pub duality: RawDuality,
    #[serde(default)]
    pub kl: Vec<RawKl>,
    #[serde(default)]
    pub kl_sums: Vec<RawKlSum>,
    pub catalog: Vec<Representation>,
    #[serde(default)]
    pub special_piece: Vec<OrbitId>,
    #[serde(default)]
    pub arthur_type: Vec<ArthurTypeEntry>,
    #[serde(default)]
    pub non_dense_conormal: Vec<OrbitId>,
    #[serde(default)]
    pub named_parameters: Vec<NamedParameter>,
    #[serde(default)]
    pub localization: Option<LocalizationSpec>,
    #[serde(default = "default_true")]
    pub diagonal_rule: bool,
    #[serde(default)]
    pub b_function: Option<Vec<String>>,
    #[serde(default)]
    pub notes: Vec<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDuality {
    pub hat: Vec<(OrbitId, OrbitId)>,
    pub fourier: Vec<(LocalSystemId, LocalSystemId)>,
    #[serde(default = "default_true")]
    pub order_reversing: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKl {
    pub target: LocalSystemId,
    pub source: LocalSystemId,
    pub value: i64,
    pub provenance: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawKlSum {
    pub target_orbit: OrbitId,
    pub source: LocalSystemId,
    pub value: i64,
    pub provenance: String,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

pub fn bundled_f4a3() -> Dataset {
    parse_dataset(BUNDLED_F4A3).expect("bundled dataset parses")
}

pub fn parse_dataset(text: &str) -> Result<Dataset, DatasetError> {
    let raw: RawDataset = serde_json::from_str(text)?;
    from_raw(raw)
}

pub fn from_raw(raw: RawDataset) -> Result<Dataset, DatasetError> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(schema(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    let poset = OrbitPoset::new(raw.orbits, raw.covers, raw.ambient_dim)?;

    let check_orbit = |id: &OrbitId, what: &str| -> Result<(), DatasetError> {
        if poset.contains(id) {
            Ok(())
        } else {
            Err(schema(format!("{what} references unknown orbit `{id}`")))
        }
    };
    let check_ls = |ls: &LocalSystemId, what: &str| -> Result<(), DatasetError> {
        check_orbit(&ls.orbit, what)?;
        let orbit = poset.orbit(&ls.orbit)?;
        if orbit.group.irrep(&ls.irrep).is_none() {
            return Err(schema(format!(
                "{what} references irrep `{}` which is not an irrep of the component group of {}",
                ls.irrep, ls.orbit
            )));
        }
        Ok(())
    };

    let mut hat = BTreeMap::new();
    for (a, b) in &raw.duality.hat {
        check_orbit(a, "hat")?;
        check_orbit(b, "hat")?;
        if hat.insert(a.clone(), b.clone()).is_some() {
            return Err(schema(format!("hat lists `{a}` twice")));
        }
    }
    let mut fourier = BTreeMap::new();
    for (a, b) in &raw.duality.fourier {
        check_ls(a, "fourier")?;
        check_ls(b, "fourier")?;
        if fourier.insert(a.clone(), b.clone()).is_some() {
            return Err(schema(format!("fourier lists {a} twice")));
        }
    }

    let mut kl = KlEvaluationTable::default();
    for r in raw.kl {
        check_ls(&r.target, "kl target")?;
        check_ls(&r.source, "kl source")?;
        let provenance = Provenance::parse(&r.provenance)
            .ok_or_else(|| schema(format!("unknown kl provenance `{}`", r.provenance)))?;
        if r.value < 0 {
            return Err(schema(format!("negative KL evaluation at {} / {}", r.target, r.source)));
        }
        let rec = KlRecord {
            value: r.value,
            provenance,
        };
        if kl.entries.insert((r.target.clone(), r.source.clone()), rec).is_some() {
            return Err(schema(format!("kl entry {} / {} listed twice", r.target, r.source)));
        }
    }
    for r in raw.kl_sums {
        check_orbit(&r.target_orbit, "kl_sums target")?;
        check_ls(&r.source, "kl_sums source")?;
        let provenance = Provenance::parse(&r.provenance)
            .ok_or_else(|| schema(format!("unknown kl provenance `{}`", r.provenance)))?;
        if r.value < 0 {
            return Err(schema(format!("negative KL sum at {} / {}", r.target_orbit, r.source)));
        }
        let rec = KlRecord {
            value: r.value,
            provenance,
        };
        if kl.sums.insert((r.target_orbit.clone(), r.source.clone()), rec).is_some() {
            return Err(schema(format!("kl_sums entry {} / {} listed twice", r.target_orbit, r.source)));
        }
    }

    let mut seen = BTreeSet::new();
    for rep in &raw.catalog {
        check_ls(&rep.param, &format!("representation {}", rep.id))?;
        if !seen.insert(rep.id.clone()) {
            return Err(schema(format!("representation `{}` listed twice", rep.id)));
        }
    }
    for rep in &raw.catalog {
        if !seen.contains(&rep.az) {
            return Err(schema(format!(
                "representation {} has AZ partner `{}` which is not in the catalog",
                rep.id, rep.az
            )));
        }
    }
    for o in &raw.special_piece {
        check_orbit(o, "special_piece")?;
    }
    for e in &raw.arthur_type {
        check_orbit(&e.orbit, "arthur_type")?;
    }
    for o in &raw.non_dense_conormal {
        check_orbit(o, "non_dense_conormal")?;
    }
    for p in &raw.named_parameters {
        check_orbit(&p.unknown.0, "named_parameters")?;
        check_orbit(&p.unknown.1, "named_parameters")?;
    }
    if let Some(loc) = &raw.localization {
        check_ls(&loc.target, "localization target")?;
        check_ls(&loc.pushforward, "localization pushforward")?;
    }
    let b_function_roots = match raw.b_function {
        None => None,
        Some(list) => Some(
            list.iter()
                .map(|s| parse_rational(s).ok_or_else(|| schema(format!("b_function root `{s}` is not a rational"))))
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };

    Ok(Dataset {
        name: raw.name,
        poset,
        duality: DualityData {
            hat,
            fourier,
            order_reversing: raw.duality.order_reversing,
        },
        kl,
        catalog: raw.catalog,
        special_piece_orbits: raw.special_piece,
        arthur_type: raw.arthur_type,
        non_dense_conormal: raw.non_dense_conormal,
        named_parameters: raw.named_parameters,
        localization: raw.localization,
        diagonal_rule: raw.diagonal_rule,
        b_function_roots,
        notes: raw.notes,
    })
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Stable machine code, e.g. `cover-dim`.
    pub code: String,
    pub message: String,
}

impl Violation {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

fn cover_cycle(poset: &OrbitPoset) -> Option<Vec<OrbitId>> {
    // a cycle exists iff two distinct orbits are mutually <=
    let n = poset.len();
    for i in 0..n {
        for j in 0..n {
            if i != j && poset.leq_idx(i, j) && poset.leq_idx(j, i) {
                return Some(vec![poset.orbits[i].id.clone(), poset.orbits[j].id.clone()]);
            }
        }
    }
    None
}

fn validate_poset(poset: &OrbitPoset, out: &mut Vec<Violation>) {
    for o in &poset.orbits {
        let mut labels = BTreeSet::new();
        for irrep in &o.group.irreps {
            if !labels.insert(irrep.label.as_str()) {
                out.push(Violation::new(
                    "irrep-duplicate",
                    format!("irrep label `{}` repeated on {}", irrep.label, o.id),
                ));
            }
            if irrep.dim == 0 {
                out.push(Violation::new(
                    "irrep-dim",
                    format!("irrep `{}` on {} has dimension 0", irrep.label, o.id),
                ));
            }
        }
        if o.group.irreps.is_empty() {
            out.push(Violation::new("irrep-empty", format!("{} has no irreps", o.id)));
        }
        if o.dim > poset.ambient_dim {
            out.push(Violation::new(
                "orbit-dim",
                format!("{} has dimension {} above the ambient dimension {}", o.id, o.dim, poset.ambient_dim),
            ));
        }
    }
    for (lo, hi) in &poset.covers {
        let (Ok(a), Ok(b)) = (poset.orbit(lo), poset.orbit(hi)) else {
            continue;
        };
        if a.dim >= b.dim {
            out.push(Violation::new(
                "cover-dim",
                format!(
                    "dim decreases along cover {lo} < {hi} (dim {} -> {})",
                    a.dim, b.dim
                ),
            ));
        }
    }
    if let Some(cycle) = cover_cycle(poset) {
        out.push(Violation::new(
            "cover-cycle",
            format!("cover graph cyclic: {} and {} lie in each other's closure", cycle[0], cycle[1]),
        ));
        return;
    }
    match poset.maximal().as_slice() {
        [top] => {
            let o = &poset.orbits[*top];
            if o.dim != poset.ambient_dim {
                out.push(Violation::new(
                    "top-dim",
                    format!(
                        "top orbit {} has dimension {} but the ambient dimension is {}",
                        o.id, o.dim, poset.ambient_dim
                    ),
                ));
            }
        }
        tops => out.push(Violation::new(
            "top",
            format!(
                "closure order has {} maximal orbits; expected a unique dense orbit",
                tops.len()
            ),
        )),
    }
    let bottoms = poset.minimal();
    if bottoms.len() != 1 {
        out.push(Violation::new(
            "bottom",
            format!("closure order has {} minimal orbits; expected one", bottoms.len()),
        ));
    }
}

fn validate_catalog(ds: &Dataset, out: &mut Vec<Violation>) {
    for rep in &ds.catalog {
        let Ok(partner) = ds.representation(&rep.az) else {
            continue;
        };
        if partner.az != rep.id {
            out.push(Violation::new(
                "az-involution",
                format!(
                    "az not involutive / not bijective: AZ({}) = {} but AZ({}) = {}",
                    rep.id, partner.id, partner.id, partner.az
                ),
            ));
        }
        if let Some(f) = ds.duality.fourier.get(&rep.param) {
            if f != &partner.param {
                out.push(Violation::new(
                    "az-fourier",
                    format!(
                        "AZ({}) = {} has parameter {} but the Fourier partner of {} is {}",
                        rep.id, partner.id, partner.param, rep.param, f
                    ),
                ));
            }
        }
    }
    let mut covered: BTreeMap<LocalSystemId, Vec<&str>> = BTreeMap::new();
    for rep in &ds.catalog {
        covered.entry(rep.param.clone()).or_default().push(&rep.id);
    }
    for ls in ds.local_systems() {
        match covered.get(&ls).map(Vec::len) {
            None => out.push(Violation::new(
                "catalog-cover",
                format!("no representation has parameter {ls}"),
            )),
            Some(1) => {}
            Some(_) => out.push(Violation::new(
                "catalog-cover",
                format!("parameter {ls} is used by {}", covered[&ls].join(", ")),
            )),
        }
    }
}

/// Checks every structural invariant. An empty list means the dataset is consistent.
pub fn validate_dataset(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_poset(&ds.poset, &mut out);
    validate_catalog(ds, &mut out);
    out.extend(duality::validate_duality(ds));
    out.extend(euler::validate_kl(ds));
    if let Some(roots) = &ds.b_function_roots {
        if roots.is_empty() {
            out.push(Violation::new("b-function", "b_function is present but lists no roots"));
        }
    }
    if let Some(loc) = &ds.localization {
        let open = ds.poset.open_orbit().map(|o| o.id.clone());
        for ls in [&loc.target, &loc.pushforward] {
            if Some(&ls.orbit) != open.as_ref() {
                out.push(Violation::new(
                    "localization",
                    format!("localization local system {ls} is not on the open orbit"),
                ));
            }
        }
    }
    out
}
