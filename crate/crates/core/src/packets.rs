//! Micro-packets, basic and weak Arthur packets, and the identities relating them.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::affine::AffineInt;
use crate::dataset::{Dataset, OrbitId};
use crate::solver::SolveReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketKind {
    Micro,
    BasicArthur,
    WeakArthur,
    AzImage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Packet {
    pub kind: PacketKind,
    pub anchor: String,
    /// Representation ids in catalog order.
    pub members: Vec<String>,
    /// Representations whose membership depends on a free parameter or on an
    /// undetermined multiplicity.
    pub indeterminate: Vec<String>,
}

impl Packet {
    pub fn member_set(&self) -> BTreeSet<&str> {
        self.members.iter().map(String::as_str).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.indeterminate.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("dataset lists no special-piece orbits")]
    EmptySpecialPiece,
    #[error("dataset has no unique open orbit")]
    NoOpenOrbit,
    #[error("hat is not defined on orbit {0}")]
    UndefinedHat(OrbitId),
    #[error("unknown representation {0}")]
    UnknownRepresentation(String),
}

fn sort_by_catalog(ds: &Dataset, ids: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut v: Vec<String> = ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    v.sort_by_key(|id| ds.catalog_rank(id));
    v
}

enum Membership {
    In,
    Out,
    Unknown,
}

/// Whether `f` is nonzero for every admissible integer assignment.
fn membership(sr: &SolveReport, f: Option<&AffineInt>) -> Membership {
    let Some(f) = f else { return Membership::Unknown };
    if let Some(q) = f.as_constant() {
        return if q.is_zero() { Membership::Out } else { Membership::In };
    }
    let params: Vec<_> = f.coefficients().collect();
    let [(name, b)] = params.as_slice() else { return Membership::Unknown };
    let root = -f.constant_term() / *b;
    if !root.is_integer() {
        return Membership::In;
    }
    if sr.bound_error.is_some() {
        return Membership::Unknown;
    }
    let root: BigInt = root.to_integer();
    let admissible = sr
        .parameter_bounds
        .iter()
        .find(|pb| pb.parameter == *name)
        .is_none_or(|pb| pb.admits(&root));
    if admissible {
        Membership::Unknown
    } else {
        Membership::In
    }
}

/// Representations whose simple object has nonzero micro-local multiplicity along `anchor`.
pub fn micro_packet(ds: &Dataset, sr: &SolveReport, anchor: &OrbitId) -> Packet {
    let mut members = Vec::new();
    let mut indeterminate = Vec::new();
    for rep in &ds.catalog {
        let cell = sr.cycle(&rep.param).and_then(|cc| cc.cell(anchor));
        match membership(sr, cell) {
            Membership::In => members.push(rep.id.clone()),
            Membership::Unknown => indeterminate.push(rep.id.clone()),
            Membership::Out => {}
        }
    }
    Packet {
        kind: PacketKind::Micro,
        anchor: anchor.to_string(),
        members,
        indeterminate,
    }
}

fn az_of(ds: &Dataset, id: &str) -> Result<String, PacketError> {
    ds.representation(id)
        .map(|r| r.az.clone())
        .map_err(|_| PacketError::UnknownRepresentation(id.to_string()))
}

/// AZ image of a packet.
pub fn az_image(ds: &Dataset, p: &Packet) -> Result<Packet, PacketError> {
    let image = |ids: &[String]| -> Result<Vec<String>, PacketError> {
        Ok(sort_by_catalog(ds, ids.iter().map(|i| az_of(ds, i)).collect::<Result<Vec<_>, _>>()?))
    };
    Ok(Packet {
        kind: PacketKind::AzImage,
        anchor: format!("AZ({})", p.anchor),
        members: image(&p.members)?,
        indeterminate: image(&p.indeterminate)?,
    })
}

fn arthur_packet(ds: &Dataset, kind: PacketKind, anchor: String, orbits: &BTreeSet<&OrbitId>) -> Packet {
    let members = ds
        .catalog
        .iter()
        .filter(|r| orbits.contains(&r.param.orbit))
        .map(|r| r.az.clone());
    Packet {
        kind,
        anchor,
        members: sort_by_catalog(ds, members),
        indeterminate: Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BasicPacket {
    pub packet: Packet,
    /// `Pi^mic` at the hat image of the open orbit.
    pub micro: Packet,
    pub agrees: bool,
}

/// AZ duals of the representations with parameter on the open orbit,
/// cross-checked against the micro-packet at the hat image of the open orbit.
pub fn basic_arthur_packet(ds: &Dataset, sr: &SolveReport) -> Result<BasicPacket, PacketError> {
    let open = ds
        .poset
        .open_orbit()
        .map(|o| o.id.clone())
        .ok_or(PacketError::NoOpenOrbit)?;
    let dual = ds
        .duality
        .hat
        .get(&open)
        .cloned()
        .ok_or_else(|| PacketError::UndefinedHat(open.clone()))?;
    let packet = arthur_packet(ds, PacketKind::BasicArthur, open.to_string(), &[&open].into_iter().collect());
    let micro = micro_packet(ds, sr, &dual);
    let agrees = micro.is_exact() && packet.members == micro.members;
    Ok(BasicPacket { packet, micro, agrees })
}

/// AZ duals of the representations with parameter in the special piece.
pub fn weak_arthur_packet(ds: &Dataset) -> Result<Packet, PacketError> {
    if ds.special_piece_orbits.is_empty() {
        return Err(PacketError::EmptySpecialPiece);
    }
    let orbits: BTreeSet<&OrbitId> = ds.special_piece_orbits.iter().collect();
    let anchor = ds.special_piece_orbits.iter().map(|o| o.as_str()).collect::<Vec<_>>().join(",");
    Ok(arthur_packet(ds, PacketKind::WeakArthur, format!("special piece {{{anchor}}}"), &orbits))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeakUnionReport {
    pub weak: Packet,
    pub anchors: Vec<OrbitId>,
    pub micro: Vec<Packet>,
    pub union: Vec<String>,
    pub indeterminate: Vec<String>,
    pub only_in_weak: Vec<String>,
    pub only_in_union: Vec<String>,
    pub equal: bool,
}

/// Compares the weak packet with the union of the micro-packets at the hat
/// images of the special-piece orbits.
pub fn verify_weak_equals_union(ds: &Dataset, sr: &SolveReport) -> Result<WeakUnionReport, PacketError> {
    let weak = weak_arthur_packet(ds)?;
    let mut anchors = Vec::new();
    for o in &ds.special_piece_orbits {
        let h = ds
            .duality
            .hat
            .get(o)
            .ok_or_else(|| PacketError::UndefinedHat(o.clone()))?;
        if !anchors.contains(h) {
            anchors.push(h.clone());
        }
    }
    let micro: Vec<Packet> = anchors.iter().map(|a| micro_packet(ds, sr, a)).collect();
    let union = sort_by_catalog(ds, micro.iter().flat_map(|p| p.members.iter().cloned()));
    let indeterminate = sort_by_catalog(
        ds,
        micro
            .iter()
            .flat_map(|p| p.indeterminate.iter().cloned())
            .filter(|i| !union.contains(i)),
    );
    let w: BTreeSet<&String> = weak.members.iter().collect();
    let u: BTreeSet<&String> = union.iter().collect();
    let only_in_weak = sort_by_catalog(ds, w.difference(&u).map(|s| s.to_string()));
    let only_in_union = sort_by_catalog(ds, u.difference(&w).map(|s| s.to_string()));
    let equal = only_in_weak.is_empty() && only_in_union.is_empty() && indeterminate.is_empty();
    Ok(WeakUnionReport {
        weak,
        anchors,
        micro,
        union,
        indeterminate,
        only_in_weak,
        only_in_union,
        equal,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AzCheck {
    pub anchor: OrbitId,
    pub dual_anchor: OrbitId,
    pub image: Packet,
    pub target: Packet,
    pub symmetric_difference: Vec<String>,
    pub equal: bool,
}

/// For each anchor `S`, checks `AZ(Pi^mic_S) = Pi^mic_{hat S}`.
pub fn verify_az_micro_compatibility(
    ds: &Dataset,
    sr: &SolveReport,
    anchors: &[OrbitId],
) -> Result<Vec<AzCheck>, PacketError> {
    let mut out = Vec::new();
    for a in anchors {
        let h = ds
            .duality
            .hat
            .get(a)
            .cloned()
            .ok_or_else(|| PacketError::UndefinedHat(a.clone()))?;
        let image = az_image(ds, &micro_packet(ds, sr, a))?;
        let target = micro_packet(ds, sr, &h);
        let x: BTreeSet<&String> = image.members.iter().collect();
        let y: BTreeSet<&String> = target.members.iter().collect();
        let symmetric_difference = sort_by_catalog(ds, x.symmetric_difference(&y).map(|s| s.to_string()));
        let equal = symmetric_difference.is_empty() && image.is_exact() && target.is_exact();
        out.push(AzCheck {
            anchor: a.clone(),
            dual_anchor: h,
            image,
            target,
            symmetric_difference,
            equal,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimplifiedArthurParameter {
    pub langlands_orbit: OrbitId,
    pub arthur_orbit: OrbitId,
    pub label: String,
}

/// One parameter `(S, hat S)` per listed Arthur-type orbit.
pub fn simplified_arthur_parameters(ds: &Dataset) -> Result<Vec<SimplifiedArthurParameter>, PacketError> {
    ds.arthur_type
        .iter()
        .map(|e| {
            let h = ds
                .duality
                .hat
                .get(&e.orbit)
                .ok_or_else(|| PacketError::UndefinedHat(e.orbit.clone()))?;
            Ok(SimplifiedArthurParameter {
                langlands_orbit: e.orbit.clone(),
                arthur_orbit: h.clone(),
                label: e.label.clone(),
            })
        })
        .collect()
}

/// Whether every pair `(S, hat S)` has its transpose `(hat S, S)` in the list.
pub fn transpose_closed(params: &[SimplifiedArthurParameter]) -> bool {
    params.iter().all(|p| {
        params
            .iter()
            .any(|q| q.langlands_orbit == p.arthur_orbit && q.arthur_orbit == p.langlands_orbit)
    })
}

pub fn non_unitary_members(ds: &Dataset, members: &[String]) -> Vec<String> {
    members
        .iter()
        .filter(|id| ds.representation(id).is_ok_and(|r| !r.unitary))
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UnitarityLine {
    pub packet: String,
    pub non_unitary: Vec<String>,
}

pub fn unitarity_report(ds: &Dataset, packets: &[Packet]) -> Vec<UnitarityLine> {
    packets
        .iter()
        .map(|p| UnitarityLine {
            packet: p.anchor.clone(),
            non_unitary: non_unitary_members(
                ds,
                &p.members.iter().chain(&p.indeterminate).cloned().collect::<Vec<_>>(),
            ),
        })
        .collect()
}
