//! Seeded random ontologies, policies and requests for differential and
//! property testing.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bundle::Deployment;
use crate::kb::ValueRange;
use crate::ontology::{
    AttributeDescriptor, NodeKind, Ontologies, OntologyDocument, OntologyGraph, OntologyKind,
};
use crate::parser::PolicyDocument;
use crate::pdp::{AccessRequest, PolicyStore, StoreParts};
use crate::policy::{
    AccessRule, Atom, AttributeVariable, ConceptPattern, ConditionExpr, Context, Operator, PurposeRef,
    PurposeTree, RightCatalog, RightCategory,
};
use crate::value::{Scalar, ScalarType};

/// Concept ids that never occur in generated ontologies.
pub const UNKNOWN_ID: &str = "ghost";

pub const TRUSTED_SOAS: [&str; 2] = ["soa0", "soa1"];
const ALL_SOAS: [&str; 3] = ["soa0", "soa1", "soa2"];
const WORDS: [&str; 3] = ["given", "refused", "pending"];

/// A random DAG of 1..=`max_nodes` nodes. Node names are shuffled so that
/// name order says nothing about the hierarchy. Individuals never have
/// children.
pub fn random_dag<R: Rng>(rng: &mut R, kind: OntologyKind, max_nodes: usize) -> OntologyDocument {
    let prefix = match kind {
        OntologyKind::So => "s",
        OntologyKind::Oo => "o",
        OntologyKind::Ao => "a",
        OntologyKind::Ato => "t",
    };
    let n = rng.gen_range(1..=max_nodes);
    let mut names: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
    names.shuffle(rng);
    let kinds: Vec<NodeKind> = (0..n)
        .map(|i| {
            if i > 0 && rng.gen_bool(0.15) {
                NodeKind::Individual
            } else {
                NodeKind::Concept
            }
        })
        .collect();

    let mut doc = OntologyDocument {
        kind: kind.as_str().to_string(),
        nodes: names.iter().cloned().zip(kinds.iter().copied()).collect(),
        ..Default::default()
    };
    for i in 1..n {
        let concepts: Vec<usize> = (0..i).filter(|&j| kinds[j] == NodeKind::Concept).collect();
        let k = rng.gen_range(0..=2.min(concepts.len()));
        for &j in concepts.choose_multiple(rng, k) {
            doc.isa.push((names[i].clone(), names[j].clone()));
        }
    }
    if n > 1 {
        if kind == OntologyKind::So {
            for _ in 0..rng.gen_range(0..=3) {
                let (a, b) = ordered_pair(rng, n);
                doc.inherits.push((names[b].clone(), names[a].clone()));
            }
        }
        if kind == OntologyKind::Ato {
            for _ in 0..rng.gen_range(0..=3) {
                let (a, b) = ordered_pair(rng, n);
                doc.equiv.push((names[a].clone(), names[b].clone()));
            }
        }
    }
    doc
}

fn ordered_pair<R: Rng>(rng: &mut R, n: usize) -> (usize, usize) {
    let a = rng.gen_range(0..n - 1);
    (a, rng.gen_range(a + 1..n))
}

pub fn random_ontologies<R: Rng>(rng: &mut R, max_nodes: usize) -> Ontologies {
    let mut o = Ontologies::empty();
    for kind in OntologyKind::ALL {
        let doc = random_dag(rng, kind, max_nodes);
        o.set(OntologyGraph::load(&doc).expect("generated DAGs are valid"));
    }
    o
}

pub fn random_purposes<R: Rng>(rng: &mut R) -> PurposeTree {
    let n = rng.gen_range(1..=6);
    let entries: Vec<(String, Option<String>)> = (0..n)
        .map(|i| {
            let parent = (i > 0).then(|| format!("p{}", rng.gen_range(0..i)));
            (format!("p{i}"), parent)
        })
        .collect();
    PurposeTree::new(entries).expect("generated trees are valid")
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a String {
    items.choose(rng).expect("non-empty")
}

fn pattern<R: Rng>(rng: &mut R, ids: &[String]) -> ConceptPattern {
    if rng.gen_bool(0.2) {
        ConceptPattern::Any
    } else {
        ConceptPattern::Concept(pick(rng, ids).clone())
    }
}

fn random_kind<R: Rng>(rng: &mut R) -> ScalarType {
    match rng.gen_range(0..20) {
        0..=13 => ScalarType::Int,
        14..=16 => ScalarType::String,
        17..=18 => ScalarType::Bool,
        _ => ScalarType::Decimal,
    }
}

fn random_scalar<R: Rng>(rng: &mut R, kind: ScalarType) -> Scalar {
    match kind {
        ScalarType::Int => Scalar::Int(rng.gen_range(0..7)),
        ScalarType::String => Scalar::String(WORDS.choose(rng).unwrap().to_string()),
        ScalarType::Bool => Scalar::Bool(rng.gen()),
        ScalarType::Decimal => Scalar::Decimal(f64::from(rng.gen_range(0..14u8)) / 2.0),
    }
}

fn any_scalar<R: Rng>(rng: &mut R) -> Scalar {
    let kind = random_kind(rng);
    random_scalar(rng, kind)
}

fn random_atom<R: Rng>(rng: &mut R, attrs: &[String]) -> ConditionExpr {
    let attribute = pick(rng, attrs).clone();
    let operator = *Operator::ALL.choose(rng).unwrap();
    let kind = random_kind(rng);
    let n = if operator == Operator::In { rng.gen_range(1..=3) } else { 1 };
    let values = (0..n).map(|_| random_scalar(rng, kind)).collect();
    ConditionExpr::Atom(Atom { attribute, operator, values })
}

/// A non-empty condition of depth at most `depth`.
pub fn random_condition_node<R: Rng>(rng: &mut R, attrs: &[String], depth: u32) -> ConditionExpr {
    if depth == 0 || rng.gen_bool(0.45) {
        return random_atom(rng, attrs);
    }
    let children = (0..rng.gen_range(1..=3))
        .map(|_| random_condition_node(rng, attrs, depth - 1))
        .collect();
    if rng.gen() {
        ConditionExpr::And(children)
    } else {
        ConditionExpr::Or(children)
    }
}

pub fn random_condition<R: Rng>(rng: &mut R, attrs: &[String], depth: u32) -> ConditionExpr {
    if rng.gen_bool(0.2) {
        ConditionExpr::Empty
    } else {
        random_condition_node(rng, attrs, depth)
    }
}

fn ids(g: &OntologyGraph) -> Vec<String> {
    g.node_ids().map(str::to_string).collect()
}

pub fn random_rule<R: Rng>(
    rng: &mut R,
    name: String,
    o: &Ontologies,
    purposes: &PurposeTree,
    rights: &RightCatalog,
) -> AccessRule {
    let (so, oo, ao, ato) = (ids(&o.so), ids(&o.oo), ids(&o.ao), ids(&o.ato));
    let purpose_ids: Vec<String> = purposes.ids().map(str::to_string).collect();
    let right_ids: Vec<String> = rights.keys().cloned().collect();
    AccessRule {
        name,
        public: rng.gen(),
        priority: rng.gen_range(0..3),
        subject: pattern(rng, &so),
        subject_vars: (0..rng.gen_range(0..=1))
            .map(|_| AttributeVariable::subject(pick(rng, &ato).clone()))
            .collect(),
        object: pattern(rng, &oo),
        object_vars: (0..rng.gen_range(0..=1))
            .map(|_| AttributeVariable::object(pick(rng, &ato).clone()))
            .collect(),
        action: pattern(rng, &ao),
        required_attributes: (0..rng.gen_range(0..=2))
            .map(|_| {
                AttributeDescriptor::new(pick(rng, &ato).clone(), *ALL_SOAS.choose(rng).unwrap())
                    .with_equivalence(rng.gen())
            })
            .collect(),
        purpose: if rng.gen_bool(0.3) {
            PurposeRef::Any
        } else {
            PurposeRef::Id(pick(rng, &purpose_ids).clone())
        },
        condition: random_condition(rng, &ato, 3),
        right: if right_ids.is_empty() || rng.gen_bool(0.3) {
            None
        } else {
            Some(pick(rng, &right_ids).clone())
        },
    }
}

/// A random activated store: four ontologies of at most `max_nodes`
/// concepts and at most `max_rules` rules.
pub fn random_store<R: Rng>(rng: &mut R, max_nodes: usize, max_rules: usize) -> PolicyStore {
    let ontologies = random_ontologies(rng, max_nodes);
    let purposes = random_purposes(rng);
    let ao = ids(&ontologies.ao);
    let rights: RightCatalog = (0..2)
        .map(|i| {
            let id = format!("r{i}");
            let implied: BTreeSet<String> = ao.choose_multiple(rng, 1).cloned().collect();
            (
                id.clone(),
                RightCategory {
                    id,
                    description: String::new(),
                    implied_actions: implied,
                },
            )
        })
        .collect();
    let rules = (0..rng.gen_range(0..=max_rules))
        .map(|i| random_rule(rng, format!("rule{i}"), &ontologies, &purposes, &rights))
        .collect();
    let parts = StoreParts {
        policy: PolicyDocument::new("random", rules),
        ontologies,
        purposes,
        rights,
        trusted_soas: TRUSTED_SOAS.iter().map(|s| s.to_string()).collect(),
    };
    PolicyStore::activate(parts, 1).expect("generated policies validate")
}

fn random_attributes<R: Rng>(rng: &mut R, ato: &[String], max: usize) -> Vec<AttributeDescriptor> {
    (0..rng.gen_range(0..=max))
        .map(|_| {
            let name = if rng.gen_bool(0.05) {
                UNKNOWN_ID.to_string()
            } else {
                pick(rng, ato).clone()
            };
            AttributeDescriptor::new(name, *ALL_SOAS.choose(rng).unwrap())
        })
        .collect()
}

/// A request against a generated store. Occasionally names unknown
/// concepts, purposes or attributes so error paths get exercised.
pub fn random_request<R: Rng>(rng: &mut R, store: &PolicyStore) -> AccessRequest {
    let o = store.ontologies();
    let (so, oo, ao, ato) = (ids(&o.so), ids(&o.oo), ids(&o.ao), ids(&o.ato));
    let purposes: Vec<String> = store.purposes().ids().map(str::to_string).collect();
    let concepts = |rng: &mut R, pool: &[String], min: usize| -> BTreeSet<String> {
        let mut set: BTreeSet<String> =
            (0..rng.gen_range(min..=2)).map(|_| pick(rng, pool).clone()).collect();
        if rng.gen_bool(0.03) {
            set.insert(UNKNOWN_ID.to_string());
        }
        set
    };
    let subject_concepts = concepts(rng, &so, 0);
    let min_objects = usize::from(rng.gen_bool(0.9));
    let object_concepts = concepts(rng, &oo, min_objects);
    let maybe_unknown = |rng: &mut R, pool: &[String]| {
        if rng.gen_bool(0.03) {
            UNKNOWN_ID.to_string()
        } else {
            pick(rng, pool).clone()
        }
    };
    let action = maybe_unknown(rng, &ao);
    let purpose = maybe_unknown(rng, &purposes);
    let mut context = Context::new();
    for a in &ato {
        if rng.gen_bool(0.6) {
            context.insert(a.clone(), any_scalar(rng));
        }
    }
    AccessRequest {
        subject_id: format!("u{}", rng.gen_range(0..100)),
        subject_concepts,
        subject_attributes: random_attributes(rng, &ato, 3),
        object_id: format!("d{}", rng.gen_range(0..100)),
        object_concepts,
        object_attributes: random_attributes(rng, &ato, 2),
        action,
        purpose,
        context,
    }
}

/// A request drawn from a deployed bundle: concepts, actions and purposes
/// uniformly from its ontologies and purpose tree, context values from the
/// registry's declared attribute ranges.
pub fn bundle_request<R: Rng>(rng: &mut R, deployment: &Deployment) -> AccessRequest {
    let store = &deployment.store;
    let o = store.ontologies();
    let (so, oo, ao, ato) = (ids(&o.so), ids(&o.oo), ids(&o.ao), ids(&o.ato));
    let purposes: Vec<String> = store.purposes().ids().map(str::to_string).collect();
    let mut issuers: Vec<String> = store.trusted_soas().iter().cloned().collect();
    issuers.push("unverified".to_string());

    let subject_concepts = (0..rng.gen_range(0..=2)).map(|_| pick(rng, &so).clone()).collect();
    let object_concepts = (0..rng.gen_range(1..=2)).map(|_| pick(rng, &oo).clone()).collect();
    let attrs = |rng: &mut R| -> Vec<AttributeDescriptor> {
        let mut out = Vec::new();
        for a in &ato {
            if rng.gen_bool(0.3) {
                out.push(AttributeDescriptor::new(a.clone(), pick(rng, &issuers).clone()));
            }
        }
        out
    };
    let subject_attributes = attrs(rng);
    let object_attributes = attrs(rng);
    let mut context = Context::new();
    for (attribute, range) in deployment.kb.ranges() {
        if rng.gen_bool(0.8) {
            context.insert(attribute.clone(), draw(rng, range));
        }
    }
    AccessRequest {
        subject_id: format!("random-{}", rng.gen_range(0..1000)),
        subject_concepts,
        subject_attributes,
        object_id: format!("random-{}", rng.gen_range(0..1000)),
        object_concepts,
        object_attributes,
        action: pick(rng, &ao).clone(),
        purpose: pick(rng, &purposes).clone(),
        context,
    }
}

pub fn draw<R: Rng>(rng: &mut R, range: &ValueRange) -> Scalar {
    match range {
        ValueRange::Int { min, max } => Scalar::Int(rng.gen_range(*min..=*max)),
        ValueRange::Decimal { min, max } => Scalar::Decimal(rng.gen_range(*min..=*max)),
        ValueRange::Bool => Scalar::Bool(rng.gen()),
        ValueRange::Values(vs) => vs.choose(rng).expect("ranges are non-empty").clone(),
    }
}
