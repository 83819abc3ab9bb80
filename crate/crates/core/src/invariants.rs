//! Decision-level invariants, shared by the property tests and the
//! acceptance suite. Each check returns a description of the first
//! violation it finds.

use crate::pdp::{decide, AccessRequest, DecisionValue, PolicyStore};
use crate::policy::AccessRule;

/// The same store with its rules replaced.
pub fn with_rules(store: &PolicyStore, rules: Vec<AccessRule>) -> PolicyStore {
    let mut parts = store.parts().clone();
    parts.policy.rules = rules;
    PolicyStore::activate(parts, store.version()).expect("rules were already valid")
}

/// `decide` gives identical results on repeated calls and on a copy of
/// the store.
pub fn determinism(store: &PolicyStore, req: &AccessRequest) -> Result<(), String> {
    let first = decide(store, req);
    let again = decide(store, req);
    let copy = decide(&store.clone(), &req.clone());
    if first != again || first != copy {
        return Err(format!("unstable decision: {first:?} / {again:?} / {copy:?}"));
    }
    Ok(())
}

/// Flipping any rule's public flag, or all of them, leaves the decision
/// value alone.
pub fn masking_invariance(store: &PolicyStore, req: &AccessRequest) -> Result<(), String> {
    let base = decide(store, req).value;
    let rules = store.rules();
    let mut variants: Vec<Vec<AccessRule>> = (0..rules.len())
        .map(|i| {
            let mut v = rules.to_vec();
            v[i].public = !v[i].public;
            v
        })
        .collect();
    variants.push(
        rules
            .iter()
            .map(|r| AccessRule { public: !r.public, ..r.clone() })
            .collect(),
    );
    for v in variants {
        let got = decide(&with_rules(store, v), req).value;
        if got != base {
            return Err(format!("public flag toggle changed {base} to {got}"));
        }
    }
    Ok(())
}

/// For each rule on its own: if the request with subject concepts `{r}`
/// is permitted, it stays permitted for every senior role of `r`.
pub fn role_monotonicity(store: &PolicyStore, req: &AccessRequest) -> Result<(), String> {
    let so = &store.ontologies().so;
    let roles: Vec<&str> = so.node_ids().collect();
    for rule in store.rules() {
        let single = with_rules(store, vec![rule.clone()]);
        for &junior in &roles {
            let as_role = |role: &str| AccessRequest {
                subject_concepts: [role.to_string()].into(),
                ..req.clone()
            };
            if decide(&single, &as_role(junior)).value != DecisionValue::Permit {
                continue;
            }
            for &senior in &roles {
                let holds = so
                    .inherited_rights_roles(senior)
                    .is_ok_and(|held| held.contains(junior));
                if !holds {
                    continue;
                }
                let got = decide(&single, &as_role(senior)).value;
                if got != DecisionValue::Permit {
                    return Err(format!(
                        "rule {}: {junior} is permitted but senior {senior} gets {got}",
                        rule.name
                    ));
                }
            }
        }
    }
    Ok(())
}

/// For each rule on its own: turning equivalence off for any required
/// attribute (or all of them) never produces a Permit the original rule
/// did not.
pub fn equivalence_soundness(store: &PolicyStore, req: &AccessRequest) -> Result<(), String> {
    for rule in store.rules() {
        let before = decide(&with_rules(store, vec![rule.clone()]), req).value;
        if before == DecisionValue::Permit {
            continue;
        }
        let n = rule.required_attributes.len();
        let mut variants: Vec<AccessRule> = (0..n)
            .filter(|&i| rule.required_attributes[i].equivalence_enabled)
            .map(|i| {
                let mut r = rule.clone();
                r.required_attributes[i].equivalence_enabled = false;
                r
            })
            .collect();
        let mut all = rule.clone();
        for a in &mut all.required_attributes {
            a.equivalence_enabled = false;
        }
        variants.push(all);
        for v in variants {
            if decide(&with_rules(store, vec![v]), req).value == DecisionValue::Permit {
                return Err(format!(
                    "rule {}: disabling equivalence turned {before} into Permit",
                    rule.name
                ));
            }
        }
    }
    Ok(())
}
