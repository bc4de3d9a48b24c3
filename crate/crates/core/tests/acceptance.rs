//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stderr so the lines survive output capture.
//!
//! Expected values are written out by hand, not read back from the bundled
//! dataset.

use std::collections::BTreeMap;
use std::io::Write;

use microlocal::affine::{AffineInt, Rational};
use microlocal::dataset::{bundled_f4a3, parse_dataset, validate_dataset, Dataset, LocalSystemId, OrbitId, BUNDLED_F4A3};
use microlocal::euler::euler_matrix;
use microlocal::packets::{basic_arthur_packet, micro_packet, verify_az_micro_compatibility, verify_weak_equals_union};
use microlocal::report::verification_checks;
use microlocal::solver::{
    check_halfinteger_roots, minimal_admissible, reconstruct_local_euler, solve_dataset, Localization, SolveReport,
};
use num_bigint::BigInt;

type Outcome = Result<String, String>;

fn o(s: &str) -> OrbitId {
    OrbitId::new(s)
}
fn ls(a: &str, b: &str) -> LocalSystemId {
    LocalSystemId::new(a, b)
}
/// `k + m c`
fn lin(k: i64, m: i64) -> AffineInt {
    AffineInt::constant(k) + AffineInt::parameter("c").scale(&Rational::from_integer(m.into()))
}
fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}
fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Run {
    ds: Dataset,
    sr: SolveReport,
    loc: Localization,
}

fn run() -> Run {
    let ds = bundled_f4a3();
    let (_, sr, loc) = solve_dataset(&ds).expect("bundled dataset solves");
    Run {
        ds,
        sr,
        loc: loc.expect("bundled dataset carries a localization"),
    }
}

/// Expected characteristic cycles: (orbit, irrep, [(orbit, constant, coefficient of c)]).
#[rustfmt::skip]
const GOLDEN_CC: &[(&str, &str, &[(&str, i64, i64)])] = &[
    ("S0", "(1)", &[("S0", 1, 0)]),
    ("S1", "(1)", &[("S1", 1, 0), ("S0", 3, 0)]),
    ("S2", "(1)", &[("S2", 1, 0), ("S1", 1, 0), ("S0", 2, 0)]),
    ("S2", "(1^2)", &[("S2", 1, 0)]),
    ("S3", "(1)", &[("S3", 1, 0), ("S1", 1, 0)]),
    ("S4", "(1)", &[("S4", 1, 0)]),
    ("S5", "(1)", &[("S5", 1, 0)]),
    ("S5", "(1^2)", &[("S5", 1, 0), ("S3", 1, 0), ("S2", 1, 0), ("S1", 2, 0), ("S0", 3, 0)]),
    ("S6", "(1)", &[("S6", 1, 0)]),
    ("S7", "(1)", &[("S7", 1, 0), ("S4", 1, 1), ("S3", 1, 0), ("S2", 2, 0), ("S1", 1, 0)]),
    ("S8", "(1)", &[("S8", 1, 0), ("S7", 1, 0), ("S6", 2, 0), ("S5", 2, 0), ("S4", -2, 1), ("S3", 1, 0)]),
    ("S9", "(1)", &[("S9", 1, 0)]),
    ("S9", "(1^2)", &[("S9", 1, 0), ("S7", 1, 0), ("S4", 0, 1), ("S2", 1, 0)]),
    ("S10", "(1)", &[("S10", 1, 0), ("S8", 1, 0)]),
    ("S10", "(1^2)", &[("S10", 1, 0), ("S9", 2, 0), ("S8", 1, 0), ("S7", 1, 0), ("S4", 1, 1)]),
    ("S11", "(4)", &[("S11", 1, 0)]),
    ("S11", "(31)", &[("S11", 3, 0), ("S10", 1, 0)]),
    ("S11", "(22)", &[("S11", 2, 0), ("S10", 1, 0), ("S9", 1, 0)]),
    ("S11", "(211)", &[("S11", 3, 0), ("S10", 2, 0), ("S9", 1, 0), ("S8", 1, 0), ("S6", 1, 0)]),
];

const ORBITS: [&str; 12] = ["S0", "S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S10", "S11"];

fn criterion_1(r: &Run) -> Outcome {
    let mut checked = 0;
    for (orbit, irrep, terms) in GOLDEN_CC {
        let src = ls(orbit, irrep);
        let cc = r.sr.cycle(&src).ok_or_else(|| format!("no cycle for {src}"))?;
        let expected: BTreeMap<&str, AffineInt> = terms.iter().map(|(s, k, m)| (*s, lin(*k, *m))).collect();
        for s in ORBITS {
            let want = expected.get(s).cloned().unwrap_or_else(AffineInt::zero);
            let got = cc.cell(&o(s));
            ensure(got == Some(&want), || format!("mic_{s}{src}: expected {want}, got {got:?}"))?;
            checked += 1;
        }
    }
    ensure(r.sr.parameter_names() == vec!["c"], || format!("free parameters {:?}", r.sr.parameter_names()))?;
    Ok(format!("19 cycles, {checked} cells equal, single parameter c"))
}

fn criterion_2(r: &Run) -> Outcome {
    let cc = &r.loc.cycle;
    ensure(cc.source == ls("S11", "(1^4)"), || format!("localized {}", cc.source))?;
    for s in ORBITS {
        let want = if s == "S4" { lin(0, 1) } else { lin(1, 0) };
        ensure(cc.cell(&o(s)) == Some(&want), || format!("localized cell at {s}: {:?}", cc.cell(&o(s))))?;
    }
    let pr = r.loc.pairings.first().ok_or("no pairing")?;
    let constants: Vec<i64> = pr
        .terms
        .iter()
        .filter_map(|t| t.product.as_integer())
        .filter(|v| *v != 0)
        .collect();
    ensure(constants == vec![-1, 2, -1], || format!("constant terms {constants:?}"))?;
    ensure(pr.constant_arithmetic() == "-1 + 2 - 1", || pr.constant_arithmetic())?;
    for (probe, v) in &r.loc.checks {
        ensure(v.is_zero(), || format!("composition check at {probe} = {v}"))?;
    }
    ensure(!r.loc.checks.is_empty(), || "no composition check ran".into())?;
    ensure(r.loc.exceptional.iter().all(|e| e.from_pairing == lin(0, 1)), || {
        format!("{:?}", r.loc.exceptional)
    })?;
    ensure(r.sr.cycle(&ls("S11", "(1^4)")) == Some(cc), || "localized row not merged".into())?;
    Ok("1 on every orbit but S4, c on S4; composition check -1 + 2 - 1 = 0".into())
}

#[rustfmt::skip]
const C_VALUES: &[(&str, &str, i64, i64)] = &[
    ("S10", "S11", 1, 0),
    ("S8", "S10", -2, 0), ("S8", "S11", 1, 0), ("S9", "S10", -2, 0), ("S9", "S11", 1, 0),
    ("S5", "S11", 1, 0), ("S5", "S10", -3, 0), ("S5", "S9", 0, 0), ("S5", "S8", 3, 0), ("S5", "S7", -2, 0),
    ("S7", "S11", 1, 0), ("S7", "S10", -3, 0), ("S7", "S9", 1, 0), ("S7", "S8", 2, 0), ("S7", "S7", -1, 0),
    ("S4", "S11", 0, 1), ("S4", "S10", 0, -3), ("S4", "S9", 1, 1), ("S4", "S8", 0, 2), ("S4", "S7", 0, -1),
];

fn criterion_3(r: &Run) -> Outcome {
    for (a, b, k, m) in C_VALUES {
        let got = r.sr.cmatrix.get(&o(a), &o(b));
        let want = lin(*k, *m);
        ensure(got.as_ref() == Some(&want), || format!("c({a},{b}): expected {want}, got {got:?}"))?;
    }
    Ok(format!("{} coefficient values equal", C_VALUES.len()))
}

fn criterion_4(r: &Run) -> Outcome {
    let b = match r.sr.parameter_bounds.as_slice() {
        [b] => b,
        other => return Err(format!("expected one bound, got {other:?}")),
    };
    ensure(b.parameter == "c" && b.lower == Some(BigInt::from(2)) && b.upper.is_none(), || b.to_string())?;
    let w = b.lower_witness.as_ref().ok_or("no witness")?;
    ensure(w.orbit == o("S4") && w.expr == lin(-2, 1) && w.source.contains("S8"), || {
        format!("witness {} at {} along {}", w.expr, w.source, w.orbit)
    })?;
    ensure(minimal_admissible(&r.sr, "c") == Some(BigInt::from(2)), || "minimal value".into())?;
    // c = 2 keeps every cell nonnegative; c = 1 does not
    let min_cell = |c: i64| -> Option<i64> {
        let vals: BTreeMap<String, Rational> = [("c".to_string(), Rational::from_integer(c.into()))].into();
        r.sr.cc_table
            .iter()
            .flat_map(|cc| cc.mult.iter())
            .filter_map(|cell| cell.value.as_ref())
            .map(|v| v.substitute(&vals).as_integer().unwrap())
            .min()
    };
    ensure(min_cell(2) == Some(0), || format!("min cell at c=2: {:?}", min_cell(2)))?;
    ensure(min_cell(1) == Some(-1), || format!("min cell at c=1: {:?}", min_cell(1)))?;
    Ok("c >= 2 from mic_S4(S8,(1)) = c - 2, no upper bound".into())
}

const PACKETS: [(&str, &[&str]); 5] = [
    ("S0", &["X5", "X13", "X17", "X19", "X20"]),
    ("S1", &["X5", "X9", "X13", "X15", "X17", "X19"]),
    ("S2", &["X5", "X9", "X11", "X13", "X17", "X18"]),
    ("S3", &["X5", "X8", "X9", "X13", "X15"]),
    ("S7", &["X5", "X7", "X8", "X9", "X11"]),
];

fn criterion_5(r: &Run) -> Outcome {
    for (anchor, members) in PACKETS {
        let p = micro_packet(&r.ds, &r.sr, &o(anchor));
        ensure(p.members == ids(members) && p.indeterminate.is_empty(), || {
            format!("Pi^mic_{anchor} = {:?} (indeterminate {:?})", p.members, p.indeterminate)
        })?;
    }
    let b = basic_arthur_packet(&r.ds, &r.sr).map_err(|e| e.to_string())?;
    ensure(b.packet.members == ids(PACKETS[0].1) && b.agrees, || format!("basic {:?}", b.packet.members))?;
    Ok("five micro-packets exact; basic packet = Pi^mic_S0".into())
}

const AZ_IMAGES: [(&str, &str, &[&str]); 5] = [
    ("S0", "S11", &["X1", "X2", "X3", "X4", "X5"]),
    ("S1", "S10", &["X2", "X3", "X4", "X5", "X6", "X7"]),
    ("S2", "S9", &["X3", "X4", "X5", "X7", "X10", "X11"]),
    ("S3", "S8", &["X4", "X5", "X6", "X7", "X8"]),
    ("S7", "S7", &["X5", "X7", "X8", "X9", "X11"]),
];

fn criterion_6(r: &Run) -> Outcome {
    let w = verify_weak_equals_union(&r.ds, &r.sr).map_err(|e| e.to_string())?;
    ensure(w.equal && w.union.len() == 11 && w.weak.members.len() == 11, || {
        format!("weak {:?} union {:?}", w.weak.members, w.union)
    })?;
    let anchors: Vec<OrbitId> = AZ_IMAGES.iter().map(|(a, _, _)| o(a)).collect();
    let checks = verify_az_micro_compatibility(&r.ds, &r.sr, &anchors).map_err(|e| e.to_string())?;
    for ((a, h, image), c) in AZ_IMAGES.iter().zip(&checks) {
        ensure(c.equal && c.dual_anchor == o(h) && c.image.members == ids(image), || {
            format!("AZ(Pi^mic_{a}) = {:?} vs Pi^mic_{h} = {:?}", c.image.members, c.target.members)
        })?;
    }
    Ok("weak = union (11 members); AZ compatibility at S0, S1, S2, S3, S7".into())
}

/// Orbit duality and Fourier permutation, written independently of the data file.
fn published_dualities() -> (BTreeMap<&'static str, &'static str>, BTreeMap<LocalSystemId, LocalSystemId>) {
    let mut hat = BTreeMap::new();
    for (a, b) in [("S11", "S0"), ("S10", "S1"), ("S9", "S2"), ("S8", "S3"), ("S6", "S5"), ("S7", "S7"), ("S4", "S4")] {
        hat.insert(a, b);
        hat.insert(b, a);
    }
    let mut f = BTreeMap::new();
    for ((a, x), (b, y)) in [
        (("S11", "(4)"), ("S0", "(1)")),
        (("S11", "(31)"), ("S1", "(1)")),
        (("S11", "(22)"), ("S2", "(1)")),
        (("S11", "(211)"), ("S5", "(1^2)")),
        (("S10", "(1)"), ("S3", "(1)")),
        (("S10", "(1^2)"), ("S7", "(1)")),
        (("S9", "(1)"), ("S2", "(1^2)")),
        (("S5", "(1)"), ("S6", "(1)")),
        (("S8", "(1)"), ("S8", "(1)")),
        (("S9", "(1^2)"), ("S9", "(1^2)")),
        (("S4", "(1)"), ("S4", "(1)")),
        (("S11", "(1^4)"), ("S11", "(1^4)")),
    ] {
        f.insert(ls(a, x), ls(b, y));
        f.insert(ls(b, y), ls(a, x));
    }
    (hat, f)
}

fn criterion_7(r: &Run) -> Outcome {
    let (hat, fourier) = published_dualities();
    ensure(fourier.len() == 20, || format!("{} local systems in the published map", fourier.len()))?;
    let mut n = 0;
    for (src, partner) in &fourier {
        for s in ORBITS {
            let lhs = r.sr.cycle(src).and_then(|c| c.cell(&o(s))).ok_or_else(|| format!("mic_{s}{src} undetermined"))?;
            let h = hat[s];
            let rhs = r
                .sr
                .cycle(partner)
                .and_then(|c| c.cell(&o(h)))
                .ok_or_else(|| format!("mic_{h}{partner} undetermined"))?;
            ensure(lhs == rhs, || format!("mic_{s}{src} = {lhs} but mic_{h}{partner} = {rhs}"))?;
            n += 1;
        }
    }
    ensure(n == 240, || format!("{n} identities"))?;
    Ok("240 identities hold".into())
}

fn criterion_8(r: &Run) -> Outcome {
    let em = euler_matrix(&r.ds);
    let rec = reconstruct_local_euler(&r.ds, &r.sr, &r.sr.cc_table).map_err(|e| e.to_string())?;
    let quoted = [
        (ls("S11", "(4)"), "S10", 1),
        (ls("S10", "(1)"), "S9", -2),
        (ls("S11", "(22)"), "S11", 2),
        (ls("S11", "(31)"), "S11", 3),
    ];
    for (src, s, v) in &quoted {
        ensure(em.get(src, &o(s)) == Some(*v), || format!("pinned loc_{s}{src} = {:?}", em.get(src, &o(s))))?;
        ensure(rec.get(src, &o(s)) == Some(*v), || format!("reconstructed loc_{s}{src} = {:?}", rec.get(src, &o(s))))?;
    }
    let mut n = 0;
    for (src, s, v) in em.pinned() {
        let got = rec.get(src, s);
        ensure(got == Some(v), || format!("loc_{s}{src}: pinned {v}, reconstructed {got:?}"))?;
        n += 1;
    }
    Ok(format!("{n} pinned values reproduced, including the four quoted ones"))
}

fn criterion_9(r: &Run) -> Outcome {
    let published = [q(-1, 1), q(-3, 4), q(-5, 4), q(-5, 6), q(-7, 6)];
    ensure(check_halfinteger_roots(&published), || "published roots flagged".into())?;
    ensure(!check_halfinteger_roots(&[q(-1, 2)]) && !check_halfinteger_roots(&[q(-3, 2)]), || {
        "half-integers not detected".into()
    })?;
    let data = r.ds.b_function_roots.as_ref().ok_or("dataset has no b-function roots")?;
    let mut distinct: Vec<Rational> = data.clone();
    distinct.sort();
    distinct.dedup();
    let mut want = published.to_vec();
    want.sort();
    ensure(distinct == want, || format!("dataset roots {distinct:?}"))?;
    ensure(check_halfinteger_roots(data), || "dataset roots flagged".into())?;
    Ok("no half-integer roots among -1, -3/4, -5/4, -5/6, -7/6".into())
}

fn mutate(pairs: &[(&str, &str)]) -> Dataset {
    let mut text = BUNDLED_F4A3.to_string();
    for (from, to) in pairs {
        assert!(text.contains(from), "mutation anchor {from:?} missing");
        text = text.replacen(from, to, 1);
    }
    parse_dataset(&text).expect("mutated dataset still parses")
}

fn criterion_10(r: &Run) -> Outcome {
    let clean = validate_dataset(&r.ds);
    ensure(clean.is_empty(), || format!("unmutated dataset: {clean:?}"))?;
    let failed: Vec<_> = verification_checks(&r.ds, &r.sr, Some(&r.loc)).into_iter().filter(|c| !c.passed).collect();
    ensure(failed.is_empty(), || format!("unmutated verify: {failed:?}"))?;

    let reversed = mutate(&[(r#"["S10", "S11"]"#, r#"["S11", "S10"]"#)]);
    let v = validate_dataset(&reversed);
    ensure(
        v.iter().any(|x| x.code == "cover-dim" && x.message.contains("S11 < S10")),
        || format!("reversed cover: {v:?}"),
    )?;

    let broken_hat = mutate(&[(r#"["S6", "S5"]"#, r#"["S6", "S6"]"#)]);
    let v = validate_dataset(&broken_hat);
    ensure(
        v.iter().any(|x| x.code == "hat-involution" && x.message.contains("S5")),
        || format!("broken hat: {v:?}"),
    )?;

    let swapped = mutate(&[
        (r#""id": "X7", "param": ["S10", "(1^2)"], "az": "X9""#, r#""id": "X7", "param": ["S10", "(1^2)"], "az": "X8""#),
        (r#""id": "X8", "param": ["S8", "(1)"], "az": "X8""#, r#""id": "X8", "param": ["S8", "(1)"], "az": "X7""#),
        (r#""id": "X9", "param": ["S7", "(1)"], "az": "X7""#, r#""id": "X9", "param": ["S7", "(1)"], "az": "X9""#),
    ]);
    let v = validate_dataset(&swapped);
    ensure(
        v.iter().any(|x| x.code == "az-fourier" && x.message.starts_with("AZ(X7)")),
        || format!("swapped AZ: {v:?}"),
    )?;
    let (_, sr, loc) = solve_dataset(&swapped).map_err(|e| e.to_string())?;
    let failing: Vec<String> = verification_checks(&swapped, &sr, loc.as_ref())
        .into_iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    for want in ["AZ compatibility at S1", "AZ compatibility at S2", "AZ compatibility at S3"] {
        ensure(failing.iter().any(|f| f == want), || format!("swapped AZ verify failures: {failing:?}"))?;
    }
    Ok("reversed cover, broken hat involution and swapped AZ pair each flagged; unmutated clean".into())
}

#[test]
fn acceptance_criteria() {
    let r = run();
    let criteria: [(&str, fn(&Run) -> Outcome); 10] = [
        ("characteristic-cycle golden table", criterion_1),
        ("localized cycle of the sign local system", criterion_2),
        ("coefficient matrix values", criterion_3),
        ("parameter bound", criterion_4),
        ("micro-packets and basic packet", criterion_5),
        ("weak packet = union, AZ compatibility", criterion_6),
        ("Fourier symmetry", criterion_7),
        ("local Euler round trip", criterion_8),
        ("b-function roots", criterion_9),
        ("mutation robustness", criterion_10),
    ];
    let mut failures = Vec::new();
    let mut err = std::io::stderr().lock();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        let line = match f(&r) {
            Ok(detail) => format!("PASS criterion {n}: {name}: {detail}\n"),
            Err(detail) => {
                failures.push(n);
                format!("FAIL criterion {n}: {name}: {detail}\n")
            }
        };
        err.write_all(line.as_bytes()).unwrap();
    }
    assert!(failures.is_empty(), "failing criteria: {failures:?}");
}
