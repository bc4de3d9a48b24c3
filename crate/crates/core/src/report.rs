//! Plain-text and machine renderings of solver and packet results, and the
//! verification checks run by `verify`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::affine::AffineInt;
use crate::dataset::{validate_dataset, Dataset, LocalSystemId, OrbitId, Violation};
use crate::euler::euler_matrix;
use crate::packets::{
    basic_arthur_packet, micro_packet, simplified_arthur_parameters, transpose_closed, unitarity_report,
    verify_az_micro_compatibility, verify_weak_equals_union, weak_arthur_packet, Packet,
};
use crate::solver::{check_halfinteger_roots, reconstruct_local_euler, CharacteristicCycle, Localization, SolveReport};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Multiplicity as a coefficient in front of an orbit: `""` for 1, `"2"`, `"(c - 2)"`, `"?"`.
pub fn coefficient_text(v: Option<&AffineInt>) -> String {
    match v {
        None => "?".to_string(),
        Some(v) if *v == AffineInt::constant(1) => String::new(),
        Some(v) if v.is_constant() => v.to_string(),
        Some(v) => {
            let s = v.to_string();
            let single = v.constant_term() == &num_traits::Zero::zero()
                && v.coefficients().count() == 1
                && v.coefficients().all(|(_, q)| q == &crate::affine::rational(1));
            if single {
                s
            } else {
                format!("({s})")
            }
        }
    }
}

/// Orbits from the open one down, reversing file order.
pub fn display_order(ds: &Dataset) -> Vec<OrbitId> {
    let mut v: Vec<OrbitId> = ds.poset.ids().cloned().collect();
    v.reverse();
    v
}

/// `[S8] + [S7] + 2[S6] + (c - 2)[S4]`.
pub fn cycle_formula(ds: &Dataset, cc: &CharacteristicCycle) -> String {
    let terms: Vec<String> = display_order(ds)
        .iter()
        .filter_map(|o| cc.support().find(|cell| &cell.orbit == o))
        .map(|cell| format!("{}[{}]", coefficient_text(cell.value.as_ref()), cell.orbit))
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

fn ic(ls: &LocalSystemId) -> String {
    format!("IC({},{})", ls.orbit, ls.irrep)
}

/// Table rows: orbits in file order, irreps in
/// group order, localized cycles last.
pub fn table_rows<'a>(ds: &Dataset, sr: &'a SolveReport) -> Vec<&'a CharacteristicCycle> {
    let mut rows: Vec<&CharacteristicCycle> = ds
        .local_systems()
        .iter()
        .filter(|ls| !sr.localized.contains(ls))
        .filter_map(|ls| sr.cycle(ls))
        .collect();
    rows.extend(sr.localized.iter().filter_map(|ls| sr.cycle(ls)));
    rows
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let pad = widths[i] - c.chars().count();
                if i == 0 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(out, "{}", line(header)).unwrap();
    for r in rows {
        writeln!(out, "{}", line(r).trim_end()).unwrap();
    }
    out
}

pub fn cc_table_text(ds: &Dataset, sr: &SolveReport, loc: Option<&Localization>) -> String {
    let order = display_order(ds);
    let mut header = vec!["local system".to_string()];
    header.extend(order.iter().map(|o| o.to_string()));
    let rows: Vec<Vec<String>> = table_rows(ds, sr)
        .into_iter()
        .map(|cc| {
            let mut r = vec![format!("({}, {})", cc.source.orbit, cc.source.irrep)];
            r.extend(order.iter().map(|o| match cc.mult.iter().find(|c| &c.orbit == o).and_then(|c| c.value.as_ref()) {
                Some(v) => v.to_string(),
                None => "?".into(),
            }));
            r
        })
        .collect();
    let mut out = String::new();
    writeln!(out, "Characteristic cycles (micro-local multiplicities, open orbit first)").unwrap();
    out.push_str(&table(&header, &rows));
    writeln!(out).unwrap();
    for cc in table_rows(ds, sr) {
        let tag = if sr.localized.contains(&cc.source) {
            "   [localization]"
        } else {
            ""
        };
        writeln!(out, "CC({}) = {}{tag}", ic(&cc.source), cycle_formula(ds, cc)).unwrap();
    }
    if let Some(loc) = loc {
        writeln!(out).unwrap();
        out.push_str(&localization_text(ds, loc));
    }
    out
}

pub fn localization_text(ds: &Dataset, loc: &Localization) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Localization: CC({}) = CC(direct image of {}) = {}",
        ic(&loc.cycle.source),
        ic(&loc.pushforward),
        cycle_formula(ds, &loc.cycle)
    )
    .unwrap();
    let comp: Vec<String> = loc
        .composition
        .iter()
        .map(|(g, m)| format!("{}{}", coefficient_text(Some(m)), ic(g)))
        .collect();
    writeln!(out, "  composition series: {}", comp.join(" + ")).unwrap();
    for (pr, ex) in loc.pairings.iter().zip(&loc.exceptional) {
        writeln!(
            out,
            "  pairing with the inverse multiplicity row at {}: {} = {}",
            ic(&pr.probe),
            {
                let mut parts: Vec<String> = pr
                    .terms
                    .iter()
                    .filter(|t| !t.product.is_constant())
                    .map(|t| format!("({})", t.product))
                    .collect();
                let arith = pr.constant_arithmetic();
                if !arith.is_empty() {
                    parts.push(format!("({arith})"));
                }
                parts.join(" + ")
            },
            pr.total
        )
        .unwrap();
        writeln!(
            out,
            "  vanishing pairing gives {} = {}; coefficient column gives c({}, open) = {}",
            ex.symbol, ex.from_pairing, ex.orbit, ex.from_coefficients
        )
        .unwrap();
    }
    for (probe, v) in &loc.checks {
        writeln!(out, "  composition check at {}: {v}", ic(probe)).unwrap();
    }
    out
}

pub fn cmatrix_text(ds: &Dataset, sr: &SolveReport) -> String {
    let order = display_order(ds);
    let mut header = vec!["c(S', S'')".to_string()];
    header.extend(order.iter().map(|o| o.to_string()));
    let rows: Vec<Vec<String>> = order
        .iter()
        .map(|r| {
            let mut row = vec![r.to_string()];
            row.extend(order.iter().map(|c| {
                let comparable = sr.cmatrix.entries.iter().any(|e| &e.lower == r && &e.upper == c);
                if !comparable {
                    ".".into()
                } else {
                    sr.cmatrix.get(r, c).map_or("?".into(), |v| v.to_string())
                }
            }));
            row
        })
        .collect();
    table(&header, &rows)
}

pub fn solve_text(ds: &Dataset, sr: &SolveReport) -> String {
    let mut out = String::new();
    writeln!(out, "Solved {} equations ({} skipped for unpinned local Euler values)", sr.equations, sr.skipped_equations).unwrap();
    let names: Vec<String> = sr
        .free_parameters
        .iter()
        .map(|p| format!("{} = c({},{})", p.name, p.lower, p.upper))
        .collect();
    writeln!(out, "Free parameters: {}", if names.is_empty() { "none".into() } else { names.join(", ") }).unwrap();
    match &sr.bound_error {
        Some(e) => writeln!(out, "Parameter bounds: not derived ({e})").unwrap(),
        None if sr.parameter_bounds.is_empty() => writeln!(out, "Parameter bounds: none").unwrap(),
        None => {
            for b in &sr.parameter_bounds {
                let w = b.lower_witness.as_ref().or(b.upper_witness.as_ref());
                let why = w.map(|w| format!(" (from {} at {} along {})", w.expr, w.source, w.orbit)).unwrap_or_default();
                writeln!(out, "Parameter bound: {b}{why}").unwrap();
            }
        }
    }
    let res: Vec<String> = sr.residual_unknowns.iter().map(|(a, b)| format!("c({a},{b})")).collect();
    writeln!(out, "Residual unknowns ({}): {}", res.len(), if res.is_empty() { "none".into() } else { res.join(", ") }).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "Coefficient matrix ('.' = incomparable, '?' = undetermined)").unwrap();
    out.push_str(&cmatrix_text(ds, sr));
    out
}

pub fn packet_line(p: &Packet) -> String {
    let mut s = format!("{{{}}}", p.members.join(", "));
    if !p.indeterminate.is_empty() {
        write!(s, "  indeterminate: {{{}}}", p.indeterminate.join(", ")).unwrap();
    }
    s
}

pub fn packets_text(ds: &Dataset, sr: &SolveReport) -> String {
    let mut out = String::new();
    writeln!(out, "Micro-packets").unwrap();
    for o in ds.poset.ids() {
        let label = format!("Pi^mic_{o}");
        writeln!(out, "  {label:<11} = {}", packet_line(&micro_packet(ds, sr, o))).unwrap();
    }
    if let Ok(b) = basic_arthur_packet(ds, sr) {
        writeln!(out).unwrap();
        writeln!(
            out,
            "Basic Arthur packet (AZ of open-orbit parameters) = {}; equals Pi^mic_{}: {}",
            packet_line(&b.packet),
            b.micro.anchor,
            if b.agrees { "yes" } else { "NO" }
        )
        .unwrap();
    }
    if let Ok(w) = weak_arthur_packet(ds) {
        writeln!(out, "Weak Arthur packet ({}) = {}", w.anchor, packet_line(&w)).unwrap();
    }
    if let Ok(ps) = simplified_arthur_parameters(ds) {
        writeln!(out).unwrap();
        writeln!(out, "Simplified Arthur parameters ({}):", ps.len()).unwrap();
        for p in &ps {
            writeln!(out, "  {:<8} = ({}, {})", p.label, p.langlands_orbit, p.arthur_orbit).unwrap();
        }
        writeln!(out, "  closed under transpose: {}", if transpose_closed(&ps) { "yes" } else { "no" }).unwrap();
    }
    out
}

/// Every verification run by `verify`.
pub fn verification_checks(ds: &Dataset, sr: &SolveReport, loc: Option<&Localization>) -> Vec<Check> {
    let mut checks = Vec::new();
    let violations = validate_dataset(ds);
    checks.push(Check::new(
        "dataset validation",
        violations.is_empty(),
        if violations.is_empty() {
            "no violations".to_string()
        } else {
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
        },
    ));

    match verify_weak_equals_union(ds, sr) {
        Ok(r) => {
            let anchors: Vec<&str> = r.anchors.iter().map(|a| a.as_str()).collect();
            let detail = if r.equal {
                format!(
                    "weak = union of {} micro-packets ({}), {} members",
                    r.anchors.len(),
                    anchors.join(", "),
                    r.union.len()
                )
            } else {
                format!(
                    "NOT EQUAL over anchors {}: only in weak {:?}, only in union {:?}, indeterminate {:?}",
                    anchors.join(", "),
                    r.only_in_weak,
                    r.only_in_union,
                    r.indeterminate
                )
            };
            checks.push(Check::new("weak packet equals union of micro-packets", r.equal, detail));
            match verify_az_micro_compatibility(ds, sr, &r.anchors) {
                Ok(az) => {
                    for a in az {
                        let detail = if a.equal {
                            format!("AZ(Pi^mic_{}) = Pi^mic_{} = {}", a.anchor, a.dual_anchor, packet_line(&a.target))
                        } else {
                            format!(
                                "AZ(Pi^mic_{}) = {} but Pi^mic_{} = {}; symmetric difference {{{}}}",
                                a.anchor,
                                packet_line(&a.image),
                                a.dual_anchor,
                                packet_line(&a.target),
                                a.symmetric_difference.join(", ")
                            )
                        };
                        checks.push(Check::new(&format!("AZ compatibility at {}", a.anchor), a.equal, detail));
                    }
                }
                Err(e) => checks.push(Check::new("AZ compatibility", false, e.to_string())),
            }
        }
        Err(e) => checks.push(Check::new("weak packet equals union of micro-packets", false, e.to_string())),
    }

    if let Ok(b) = basic_arthur_packet(ds, sr) {
        checks.push(Check::new(
            "basic packet equals micro-packet at hat(open orbit)",
            b.agrees,
            format!("{} vs Pi^mic_{} = {}", packet_line(&b.packet), b.micro.anchor, packet_line(&b.micro)),
        ));
    }

    let fs = fourier_symmetry_failures(ds, sr);
    checks.push(Check::new(
        "Fourier symmetry of micro-local multiplicities",
        fs.is_empty(),
        if fs.is_empty() {
            format!("{} identities hold", ds.local_systems().len() * ds.poset.len())
        } else {
            fs.join("; ")
        },
    ));

    let lead: Vec<String> = sr
        .cc_table
        .iter()
        .filter(|cc| {
            let d = ds.irrep_dim(&cc.source).map(i64::from).unwrap_or(-1);
            cc.cell(&cc.source.orbit) != Some(&AffineInt::constant(d))
        })
        .map(|cc| cc.source.to_string())
        .collect();
    checks.push(Check::new(
        "leading multiplicity equals rank",
        lead.is_empty(),
        if lead.is_empty() { "all local systems".to_string() } else { lead.join(", ") },
    ));

    if sr.bound_error.is_some() {
        checks.push(Check::new("parameter bounds", false, sr.bound_error.clone().unwrap_or_default()));
    }

    if let Some(loc) = loc {
        let ok = loc.checks.iter().all(|(_, v)| v.is_zero());
        let arith: Vec<String> = loc.pairings.iter().map(|p| p.constant_arithmetic()).collect();
        checks.push(Check::new(
            "localization composition check",
            ok,
            format!("pairing constants {} = 0; {}", arith.join(", "), cycle_formula(ds, &loc.cycle)),
        ));
    }

    let em = euler_matrix(ds);
    match reconstruct_local_euler(ds, sr, &sr.cc_table) {
        Ok(rec) => {
            let mut compared = 0;
            let mut bad = Vec::new();
            for (s, o, v) in em.pinned() {
                if let Some(r) = rec.get(s, o) {
                    compared += 1;
                    if r != v {
                        bad.push(format!("loc_{o}({s}) = {v} but reconstructed {r}"));
                    }
                }
            }
            checks.push(Check::new(
                "local Euler round trip",
                bad.is_empty(),
                if bad.is_empty() {
                    format!("{compared} pinned values reproduced")
                } else {
                    bad.join("; ")
                },
            ));
        }
        Err(e) => checks.push(Check::new("local Euler round trip", false, e.to_string())),
    }

    if let Some(roots) = &ds.b_function_roots {
        let ok = check_halfinteger_roots(roots);
        checks.push(Check::new(
            "b-function has no half-integer roots",
            ok,
            format!("{} roots", roots.len()),
        ));
    }

    let packets: Vec<Packet> = verify_weak_equals_union(ds, sr).map(|r| r.micro).unwrap_or_default();
    let unit = unitarity_report(ds, &packets);
    let flagged: Vec<String> = unit
        .iter()
        .filter(|l| !l.non_unitary.is_empty())
        .map(|l| format!("Pi^mic_{}: {}", l.packet, l.non_unitary.join(", ")))
        .collect();
    checks.push(Check::new(
        "weak-packet micro-packets are unitary",
        flagged.is_empty(),
        if flagged.is_empty() { "no non-unitary members".to_string() } else { flagged.join("; ") },
    ));
    checks
}

/// `mic_{S'}(IC(S, L))` against `mic_{hat S'}(IC(fourier(S, L)))` for all pairs.
pub fn fourier_symmetry_failures(ds: &Dataset, sr: &SolveReport) -> Vec<String> {
    let mut out = Vec::new();
    for ls in ds.local_systems() {
        let Some(f) = ds.duality.fourier.get(&ls) else {
            out.push(format!("no Fourier partner for {ls}"));
            continue;
        };
        for o in ds.poset.ids() {
            let Some(h) = ds.duality.hat.get(o) else { continue };
            let a = sr.cycle(&ls).and_then(|c| c.cell(o));
            let b = sr.cycle(f).and_then(|c| c.cell(h));
            if a != b {
                let show = |v: Option<&AffineInt>| v.map_or("?".to_string(), |v| v.to_string());
                out.push(format!("mic_{o}{ls} = {} but mic_{h}{f} = {}", show(a), show(b)));
            }
        }
    }
    out
}

pub fn checks_text(checks: &[Check]) -> String {
    let mut out = String::new();
    for c in checks {
        writeln!(out, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    out
}

pub fn violations_text(v: &[Violation]) -> String {
    if v.is_empty() {
        return "OK: no violations\n".to_string();
    }
    let mut out = format!("{} violation(s):\n", v.len());
    for x in v {
        writeln!(out, "  {x}").unwrap();
    }
    out
}

/// Representations for which the Fourier/AZ correspondence is used beyond
/// the Iwahori-spherical range.
pub fn assumption_banner(ds: &Dataset) -> Option<String> {
    let ids: Vec<&str> = ds
        .catalog
        .iter()
        .filter(|r| !r.iwahori_spherical)
        .map(|r| r.id.as_str())
        .collect();
    if ids.is_empty() {
        return None;
    }
    Some(format!(
        "ASSUMPTION: AZ duality is taken to agree with the transposed Fourier transform also for the non-Iwahori-spherical representation(s) {}.",
        ids.join(", ")
    ))
}
