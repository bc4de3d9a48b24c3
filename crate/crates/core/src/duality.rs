//! The hat involution on orbits and the Fourier pairing on local systems.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dataset::{Dataset, LocalSystemId, OrbitId, Violation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualityData {
    pub hat: BTreeMap<OrbitId, OrbitId>,
    pub fourier: BTreeMap<LocalSystemId, LocalSystemId>,
    /// Whether hat is expected to reverse the closure order. When false only
    /// the exchange of the open and the closed orbit is checked.
    pub order_reversing: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DualityError {
    #[error("hat is not defined on orbit `{0}`")]
    UnknownOrbit(OrbitId),
    #[error("fourier is not defined on local system {0}")]
    UnknownLocalSystem(LocalSystemId),
}

pub fn hat<'a>(d: &'a DualityData, s: &OrbitId) -> Result<&'a OrbitId, DualityError> {
    d.hat.get(s).ok_or_else(|| DualityError::UnknownOrbit(s.clone()))
}

pub fn fourier_partner<'a>(
    d: &'a DualityData,
    ls: &LocalSystemId,
) -> Result<&'a LocalSystemId, DualityError> {
    d.fourier
        .get(ls)
        .ok_or_else(|| DualityError::UnknownLocalSystem(ls.clone()))
}

fn involution_violations<K: Ord + Clone + std::fmt::Display>(
    name: &str,
    domain: &[K],
    map: &BTreeMap<K, K>,
    out: &mut Vec<Violation>,
) {
    let code = format!("{name}-involution");
    for k in domain {
        if !map.contains_key(k) {
            out.push(Violation::new(&code, format!("{name} is not defined on {k}")));
        }
    }
    let image: BTreeSet<&K> = map.values().collect();
    for k in domain {
        if !image.contains(k) {
            out.push(Violation::new(&code, format!("{name} not involutive ({k} unmatched)")));
        }
    }
    for (k, v) in map {
        match map.get(v) {
            Some(back) if back == k => {}
            Some(back) => out.push(Violation::new(
                &code,
                format!("{name} not involutive: {name}({name}({k})) = {back}"),
            )),
            None => {}
        }
    }
}

/// Involution checks for hat and fourier, and order reversal of hat.
pub fn validate_duality(ds: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let d = &ds.duality;
    let orbits: Vec<OrbitId> = ds.poset.ids().cloned().collect();
    involution_violations("hat", &orbits, &d.hat, &mut out);
    involution_violations("fourier", &ds.local_systems(), &d.fourier, &mut out);

    if !orbits.iter().all(|o| d.hat.contains_key(o)) {
        return out;
    }
    let p = &ds.poset;
    if let ([top], [bottom]) = (p.maximal().as_slice(), p.minimal().as_slice()) {
        let (top, bottom) = (&p.orbits[*top].id, &p.orbits[*bottom].id);
        if &d.hat[top] != bottom || &d.hat[bottom] != top {
            out.push(Violation::new(
                "hat-order",
                format!("order-reversal broken: hat does not exchange the open orbit {top} and the closed orbit {bottom}"),
            ));
        }
    }
    if d.order_reversing {
        let idx = |o: &OrbitId| p.index_of(o).expect("validated at load");
        for a in &orbits {
            for b in &orbits {
                let forward = p.leq_idx(idx(a), idx(b));
                let (ha, hb) = (&d.hat[a], &d.hat[b]);
                let backward = p.leq_idx(idx(hb), idx(ha));
                if forward != backward {
                    let msg = if forward {
                        format!("order-reversal broken: {a} <= {b} but hat({b}) = {hb} is not <= hat({a}) = {ha}")
                    } else {
                        format!("order-reversal broken: hat({b}) = {hb} <= hat({a}) = {ha} but {a} is not <= {b}")
                    };
                    out.push(Violation::new("hat-order", msg));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{bundled_f4a3, parse_dataset, BUNDLED_F4A3};

    fn o(s: &str) -> OrbitId {
        OrbitId::new(s)
    }

    #[test]
    fn hat_examples() {
        let ds = bundled_f4a3();
        assert_eq!(hat(&ds.duality, &o("S11")).unwrap(), &o("S0"));
        assert_eq!(hat(&ds.duality, &o("S4")).unwrap(), &o("S4"));
        for s in ds.poset.ids() {
            assert_eq!(hat(&ds.duality, hat(&ds.duality, s).unwrap()).unwrap(), s);
        }
        assert!(hat(&ds.duality, &o("S99")).is_err());
    }

    #[test]
    fn fixed_points() {
        let ds = bundled_f4a3();
        let hat_fixed: Vec<&str> = ds
            .duality
            .hat
            .iter()
            .filter(|(a, b)| a == b)
            .map(|(a, _)| a.as_str())
            .collect();
        assert_eq!(hat_fixed, vec!["S4", "S7"]);
        let fourier_fixed: BTreeSet<LocalSystemId> = ds
            .duality
            .fourier
            .iter()
            .filter(|(a, b)| a == b)
            .map(|(a, _)| a.clone())
            .collect();
        let expected: BTreeSet<LocalSystemId> = [
            LocalSystemId::new("S8", "(1)"),
            LocalSystemId::new("S9", "(1^2)"),
            LocalSystemId::new("S4", "(1)"),
            LocalSystemId::new("S11", "(1^4)"),
        ]
        .into_iter()
        .collect();
        assert_eq!(fourier_fixed, expected);
    }

    #[test]
    fn fourier_examples() {
        let ds = bundled_f4a3();
        let f = |a: &str, b: &str| fourier_partner(&ds.duality, &LocalSystemId::new(a, b)).unwrap().clone();
        assert_eq!(f("S11", "(4)"), LocalSystemId::new("S0", "(1)"));
        assert_eq!(f("S8", "(1)"), LocalSystemId::new("S8", "(1)"));
        assert_eq!(f("S11", "(1^4)"), LocalSystemId::new("S11", "(1^4)"));
        for ls in ds.local_systems() {
            let back = fourier_partner(&ds.duality, fourier_partner(&ds.duality, &ls).unwrap()).unwrap();
            assert_eq!(back, &ls);
        }
    }

    #[test]
    fn broken_hat_is_reported() {
        let text = BUNDLED_F4A3.replace(r#"["S6", "S5"]"#, r#"["S6", "S6"]"#);
        assert_ne!(text, BUNDLED_F4A3);
        let ds = parse_dataset(&text).unwrap();
        let v = validate_duality(&ds);
        assert!(v.iter().any(|v| v.message.contains("not involutive (S5 unmatched)")), "{v:?}");
        let mut strict = ds.clone();
        strict.duality.order_reversing = true;
        let v = validate_duality(&strict);
        assert!(v.iter().any(|v| v.message.contains("order-reversal broken: S5 <= S7")), "{v:?}");
    }

    #[test]
    fn bundled_hat_fixes_a_comparable_pair() {
        // S4 < S7 and both are fixed, so hat cannot reverse the closure order here
        let mut ds = bundled_f4a3();
        assert!(!ds.duality.order_reversing);
        assert!(validate_duality(&ds).is_empty());
        ds.duality.order_reversing = true;
        let v = validate_duality(&ds);
        assert!(v.iter().any(|v| v.message == "order-reversal broken: S4 <= S7 but hat(S7) = S7 is not <= hat(S4) = S4"));
    }

    #[test]
    fn identity_hat_on_chain_is_not_order_reversing() {
        let text = r#"{
          "schema_version": 1, "ambient_dim": 1,
          "orbits": [
            {"id": "A", "dim": 0, "group": {"name": "trivial", "irreps": [{"label": "(1)", "dim": 1}]}},
            {"id": "B", "dim": 1, "group": {"name": "trivial", "irreps": [{"label": "(1)", "dim": 1}]}}],
          "covers": [["A", "B"]],
          "duality": {"hat": [["A", "A"], ["B", "B"]],
                      "fourier": [[["A", "(1)"], ["A", "(1)"]], [["B", "(1)"], ["B", "(1)"]]]},
          "catalog": [
            {"id": "Y1", "param": ["A", "(1)"], "az": "Y1", "iwahori_spherical": true, "unitary": true},
            {"id": "Y2", "param": ["B", "(1)"], "az": "Y2", "iwahori_spherical": true, "unitary": true}]
        }"#;
        let ds = parse_dataset(text).unwrap();
        let v = validate_duality(&ds);
        assert!(v.iter().any(|v| v.code == "hat-order"));
        assert!(v.iter().all(|v| v.code == "hat-order"));
    }
}
