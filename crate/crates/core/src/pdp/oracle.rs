//! Reference decision procedure used to cross-check [`super::decide`].
//!
//! Shares no matching code with the engine: every relation is materialized
//! as a boolean matrix (Floyd-Warshall closure) and every rule is evaluated
//! in full. Meant for fixture-scale inputs only.

use std::collections::BTreeMap;

use super::{AccessRequest, Decision, DecisionValue, PolicyStore, TraceEntry};
use crate::ontology::{AttributeDescriptor, OntologyGraph};
use crate::policy::{AccessRule, ConceptPattern, ConditionExpr, Operator, PurposeRef, Side};
use crate::value::Scalar;

/// Reflexive-transitive closure over a node set.
struct Closure {
    index: BTreeMap<String, usize>,
    m: Vec<Vec<bool>>,
}

impl Closure {
    fn build<'a>(nodes: impl Iterator<Item = &'a str>, edges: impl Iterator<Item = (&'a str, &'a str)>, symmetric: bool) -> Self {
        let index: BTreeMap<String, usize> =
            nodes.enumerate().map(|(i, n)| (n.to_string(), i)).collect();
        let n = index.len();
        let mut m = vec![vec![false; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in edges {
            let (i, j) = (index[a], index[b]);
            m[i][j] = true;
            if symmetric {
                m[j][i] = true;
            }
        }
        for k in 0..n {
            let via = m[k].clone();
            for row in m.iter_mut() {
                if row[k] {
                    for (cell, &r) in row.iter_mut().zip(&via) {
                        *cell |= r;
                    }
                }
            }
        }
        Closure { index, m }
    }

    fn has(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn holds(&self, a: &str, b: &str) -> bool {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.m[i][j],
            _ => false,
        }
    }
}

/// `isa[x][y]`: x is-a* y.
fn isa(g: &OntologyGraph) -> Closure {
    Closure::build(g.node_ids(), g.isa_edges(), false)
}

struct Matrices {
    so: Closure,
    oo: Closure,
    ao: Closure,
    ato: Closure,
    /// `[senior][junior]`: senior holds junior's rights.
    holds: Closure,
    equiv: Closure,
    /// `[p][q]`: q is p or an ancestor of p.
    purpose: Closure,
}

impl Matrices {
    fn new(store: &PolicyStore) -> Self {
        let o = store.ontologies();
        let tree = store.purposes();
        let parent_edges: Vec<(&str, &str)> =
            tree.ids().filter_map(|p| tree.parent_of(p).map(|q| (p, q))).collect();
        Matrices {
            so: isa(&o.so),
            oo: isa(&o.oo),
            ao: isa(&o.ao),
            ato: isa(&o.ato),
            holds: Closure::build(
                o.so.node_ids(),
                o.so.inherit_edges().map(|(junior, senior)| (senior, junior)),
                false,
            ),
            equiv: Closure::build(o.ato.node_ids(), o.ato.equiv_edges(), true),
            purpose: Closure::build(tree.ids(), parent_edges.into_iter(), false),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum V3 {
    T,
    F,
    M,
    E,
}

fn cond(expr: &ConditionExpr, ctx: &BTreeMap<String, Scalar>) -> V3 {
    match expr {
        ConditionExpr::Empty => V3::T,
        ConditionExpr::Atom(a) => {
            let Some(actual) = ctx.get(&a.attribute) else {
                return V3::M;
            };
            let r = match a.operator {
                Operator::In => {
                    let mut hit = Some(false);
                    for v in &a.values {
                        hit = match (hit, same(actual, v)) {
                            (Some(h), Some(e)) => Some(h || e),
                            _ => None,
                        };
                    }
                    hit
                }
                Operator::Equals => a.values.first().and_then(|v| same(actual, v)),
                Operator::NotEquals => a.values.first().and_then(|v| same(actual, v)).map(|b| !b),
                op => a.values.first().and_then(|v| order(actual, v)).map(|c| match op {
                    Operator::GreaterThan => c > 0,
                    Operator::GreaterThanOrEqual => c >= 0,
                    Operator::LessThan => c < 0,
                    _ => c <= 0,
                }),
            };
            match r {
                Some(true) => V3::T,
                Some(false) => V3::F,
                None => V3::E,
            }
        }
        ConditionExpr::And(cs) | ConditionExpr::Or(cs) => {
            let vals: Vec<V3> = cs.iter().map(|c| cond(c, ctx)).collect();
            let (dominant, neutral) = if matches!(expr, ConditionExpr::And(_)) {
                (V3::F, V3::T)
            } else {
                (V3::T, V3::F)
            };
            if vals.contains(&V3::E) {
                V3::E
            } else if vals.contains(&dominant) {
                dominant
            } else if vals.contains(&V3::M) {
                V3::M
            } else {
                neutral
            }
        }
    }
}

fn as_f64(s: &Scalar) -> Option<f64> {
    match s {
        Scalar::Int(i) => Some(*i as f64),
        Scalar::Decimal(d) => Some(*d),
        _ => None,
    }
}

fn same(a: &Scalar, b: &Scalar) -> Option<bool> {
    match (a, b) {
        (Scalar::String(x), Scalar::String(y)) => Some(x == y),
        (Scalar::Bool(x), Scalar::Bool(y)) => Some(x == y),
        _ => order(a, b).map(|c| c == 0),
    }
}

/// Sign of `a - b` for numeric scalars.
fn order(a: &Scalar, b: &Scalar) -> Option<i8> {
    if let (Scalar::Int(x), Scalar::Int(y)) = (a, b) {
        return Some((x > y) as i8 - (x < y) as i8);
    }
    let (x, y) = (as_f64(a)?, as_f64(b)?);
    Some((x > y) as i8 - (x < y) as i8)
}

fn rule_outcome(
    rule: &AccessRule,
    req: &AccessRequest,
    store: &PolicyStore,
    mx: &Matrices,
) -> DecisionValue {
    let known = req.subject_concepts.iter().all(|c| mx.so.has(c))
        && req.object_concepts.iter().all(|c| mx.oo.has(c))
        && mx.ao.has(&req.action);
    if !known {
        return DecisionValue::Indeterminate;
    }

    let subject_ok = match &rule.subject {
        ConceptPattern::Any => !req.subject_concepts.is_empty(),
        ConceptPattern::Concept(s) => req.subject_concepts.iter().any(|c| {
            mx.so.index.keys().any(|r| mx.holds.holds(c, r) && mx.so.holds(r, s))
        }),
    };
    let object_ok = match &rule.object {
        ConceptPattern::Any => !req.object_concepts.is_empty(),
        ConceptPattern::Concept(t) => req.object_concepts.iter().any(|c| mx.oo.holds(c, t)),
    };
    let action_ok = match &rule.action {
        ConceptPattern::Any => true,
        ConceptPattern::Concept(a) => mx.ao.holds(&req.action, a),
    };
    let trusted = |p: &AttributeDescriptor| store.trusted_soas().contains(&p.soa_id);
    let required_ok = rule.required_attributes.iter().all(|r| {
        req.subject_attributes.iter().any(|p| {
            trusted(p)
                && (p.name == r.name || (r.equivalence_enabled && mx.equiv.holds(&r.name, &p.name)))
        })
    });
    let vars_ok = [Side::Subject, Side::Object].into_iter().all(|side| {
        rule.vars(side).iter().all(|v| {
            req.attributes(side).iter().any(|p| mx.ato.holds(&p.name, &v.name))
        })
    });
    if !(subject_ok && object_ok && action_ok && required_ok && vars_ok) {
        return DecisionValue::NotApplicable;
    }

    let purpose = if !mx.purpose.has(&req.purpose) {
        V3::E
    } else {
        match &rule.purpose {
            PurposeRef::Any => V3::T,
            PurposeRef::Id(a) if !mx.purpose.has(a) => V3::E,
            PurposeRef::Id(a) => {
                if mx.purpose.holds(&req.purpose, a) {
                    V3::T
                } else {
                    V3::F
                }
            }
        }
    };
    let condition = cond(&rule.condition, &req.context);
    let parts = [purpose, condition];
    if parts.iter().any(|v| matches!(v, V3::E | V3::M)) {
        DecisionValue::Indeterminate
    } else if parts.contains(&V3::F) {
        DecisionValue::Deny
    } else {
        DecisionValue::Permit
    }
}

/// Same contract as [`super::decide`]: highest priority first, then Deny
/// over Permit over Indeterminate, first such rule in document order.
pub fn oracle_decide(store: &PolicyStore, req: &AccessRequest) -> Decision {
    let mx = Matrices::new(store);
    let outcomes: Vec<(&AccessRule, DecisionValue)> = store
        .rules()
        .iter()
        .map(|r| (r, rule_outcome(r, req, store, &mx)))
        .filter(|(_, v)| *v != DecisionValue::NotApplicable)
        .collect();

    let mut best: Option<(&AccessRule, DecisionValue)> = None;
    for (rule, value) in outcomes {
        let better = match best {
            None => true,
            Some((b, bv)) => {
                rule.priority > b.priority || (rule.priority == b.priority && rank(value) < rank(bv))
            }
        };
        if better {
            best = Some((rule, value));
        }
    }

    let version = store.version();
    match best {
        None => Decision {
            value: DecisionValue::NotApplicable,
            granted_right: None,
            matched_rule: None,
            explanation: vec![TraceEntry::StoreVersion { version }],
            masked: false,
            store_version: version,
        },
        Some((rule, value)) => Decision {
            value,
            granted_right: (value == DecisionValue::Permit).then(|| rule.right.clone()).flatten(),
            matched_rule: Some(rule.name.clone()),
            explanation: vec![TraceEntry::StoreVersion { version }],
            masked: !rule.public && value != DecisionValue::Permit,
            store_version: version,
        },
    }
}

fn rank(v: DecisionValue) -> u8 {
    match v {
        DecisionValue::Deny => 0,
        DecisionValue::Permit => 1,
        _ => 2,
    }
}

/// The parts of a decision the engine and oracle must agree on.
pub fn agrees(a: &Decision, b: &Decision) -> bool {
    a.value == b.value
        && a.matched_rule == b.matched_rule
        && a.granted_right == b.granted_right
        && a.masked == b.masked
}
