//! The decision point: target matching with semantic expansion, rule
//! evaluation, priority combining, masking and explanations.

mod oracle;

use std::collections::BTreeSet;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

pub use oracle::{agrees, oracle_decide};

use crate::ontology::{AttributeDescriptor, Ontologies, OntologyError};
use crate::parser::{PolicyDocument, XacmlRequestDoc, XacmlResponseDoc};
use crate::policy::{
    evaluate_logged, purpose_compliant, validate_rights, validate_rule, AccessRule, AtomLog,
    ConceptPattern, Context, PurposeTree, RightCatalog, Side, Truth,
    ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DecisionValue {
    Permit,
    Deny,
    Indeterminate,
    NotApplicable,
}

impl DecisionValue {
    pub const ALL: [DecisionValue; 4] = [
        DecisionValue::Permit,
        DecisionValue::Deny,
        DecisionValue::Indeterminate,
        DecisionValue::NotApplicable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DecisionValue::Permit => "Permit",
            DecisionValue::Deny => "Deny",
            DecisionValue::Indeterminate => "Indeterminate",
            DecisionValue::NotApplicable => "NotApplicable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }

    /// Status message carried on the wire.
    pub fn status(self) -> &'static str {
        match self {
            DecisionValue::Permit => "permit",
            DecisionValue::Deny => MASKED_EXPLANATION,
            DecisionValue::Indeterminate => "indeterminate",
            DecisionValue::NotApplicable => "not applicable",
        }
    }
}

impl fmt::Display for DecisionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The only text a masked decision ever explains itself with.
pub const MASKED_EXPLANATION: &str = "access denied";

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct AccessRequest {
    pub subject_id: String,
    pub subject_concepts: BTreeSet<String>,
    pub subject_attributes: Vec<AttributeDescriptor>,
    pub object_id: String,
    pub object_concepts: BTreeSet<String>,
    /// Stored facts about the object, bound by object-side variables.
    pub object_attributes: Vec<AttributeDescriptor>,
    pub action: String,
    pub purpose: String,
    pub context: Context,
}

impl AccessRequest {
    /// Converts a wire request as is. The context collects environment
    /// values, then object attribute values, then subject attribute values,
    /// each keyed by attribute name; on a clash the later source wins.
    pub fn from_xacml(doc: &XacmlRequestDoc) -> Self {
        let mut context = doc.environment.clone();
        for a in doc.resource_attributes.iter().chain(&doc.subject_attributes) {
            if let Some(v) = &a.value {
                context.insert(a.name.clone(), v.clone());
            }
        }
        AccessRequest {
            subject_id: doc.subject_id.clone(),
            subject_concepts: doc.subject_concepts.iter().cloned().collect(),
            subject_attributes: doc.subject_attributes.clone(),
            object_id: doc.resource_id.clone(),
            object_concepts: doc.resource_concepts.iter().cloned().collect(),
            object_attributes: doc.resource_attributes.clone(),
            action: doc.action_id.clone(),
            purpose: doc.purpose.clone(),
            context,
        }
    }

    pub fn attributes(&self, side: Side) -> &[AttributeDescriptor] {
        match side {
            Side::Subject => &self.subject_attributes,
            Side::Object => &self.object_attributes,
        }
    }
}

/// Everything a store is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreParts {
    pub policy: PolicyDocument,
    pub ontologies: Ontologies,
    pub purposes: PurposeTree,
    pub rights: RightCatalog,
    pub trusted_soas: BTreeSet<String>,
}

/// A validated, immutable policy snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStore {
    parts: StoreParts,
    version: u64,
}

impl PolicyStore {
    /// Validates every rule and right against the ontologies and purpose
    /// tree; all findings are reported together.
    pub fn activate(parts: StoreParts, version: u64) -> Result<Self, ValidationReport> {
        let mut report = validate_rights(&parts.rights, &parts.ontologies);
        let mut names = BTreeSet::new();
        for rule in &parts.policy.rules {
            if !names.insert(rule.name.as_str()) {
                report.push(
                    "DuplicateRuleName",
                    format!("access_Rule[@Name='{}']", rule.name),
                    "rule name used twice",
                );
            }
            report.extend(validate_rule(rule, &parts.ontologies, &parts.purposes, &parts.rights));
        }
        if report.is_empty() {
            Ok(PolicyStore { parts, version })
        } else {
            Err(report)
        }
    }

    pub fn parts(&self) -> &StoreParts {
        &self.parts
    }

    pub fn into_parts(self) -> StoreParts {
        self.parts
    }

    pub fn rules(&self) -> &[AccessRule] {
        &self.parts.policy.rules
    }

    pub fn ontologies(&self) -> &Ontologies {
        &self.parts.ontologies
    }

    pub fn purposes(&self) -> &PurposeTree {
        &self.parts.purposes
    }

    pub fn trusted_soas(&self) -> &BTreeSet<String> {
        &self.parts.trusted_soas
    }

    pub fn version(&self) -> u64 {
        self.version
    }
}

/// One step of a decision's explanation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEntry {
    StoreVersion { version: u64 },
    NoRuleMatched { evaluated: usize },
    Selected { rule: String, priority: u32, outcome: DecisionValue },
    /// Senior-to-junior chain through which the requester holds a role's rights.
    Inheritance { chain: Vec<String> },
    /// is-a chain from the requested concept up to the rule's concept.
    Subsumption { target: &'static str, chain: Vec<String> },
    RequiredAttribute { required: String, satisfied_by: String, issuer: String },
    Variable { side: Side, variable: String, bound_by: String },
    Purpose { requested: String, allowed: String, compliant: bool },
    Condition { atom: String, result: String },
    Error { message: String },
    OtherRule { rule: String, priority: u32, outcome: DecisionValue },
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEntry::StoreVersion { version } => write!(f, "policy store version {version}"),
            TraceEntry::NoRuleMatched { evaluated } => {
                write!(f, "zero rules matched ({evaluated} evaluated)")
            }
            TraceEntry::Selected { rule, priority, outcome } => {
                write!(f, "rule {rule} (priority {priority}) decided {outcome}")
            }
            TraceEntry::Inheritance { chain } => {
                write!(f, "role inheritance: {}", chain.join(" inherits "))
            }
            TraceEntry::Subsumption { target, chain } => {
                write!(f, "{target}: {}", chain.join(" is-a "))
            }
            TraceEntry::RequiredAttribute { required, satisfied_by, issuer } => {
                write!(f, "required attribute {required} satisfied by {satisfied_by} from {issuer}")
            }
            TraceEntry::Variable { side, variable, bound_by } => {
                write!(f, "{} variable {variable} bound by {bound_by}", side.as_str())
            }
            TraceEntry::Purpose { requested, allowed, compliant } => write!(
                f,
                "purpose {requested} {} {allowed}",
                if *compliant { "complies with" } else { "does not comply with" }
            ),
            TraceEntry::Condition { atom, result } => write!(f, "condition {atom}: {result}"),
            TraceEntry::Error { message } => write!(f, "error: {message}"),
            TraceEntry::OtherRule { rule, priority, outcome } => {
                write!(f, "also applicable: rule {rule} (priority {priority}) {outcome}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub value: DecisionValue,
    pub granted_right: Option<String>,
    pub matched_rule: Option<String>,
    pub explanation: Vec<TraceEntry>,
    pub masked: bool,
    pub store_version: u64,
}

impl Serialize for Decision {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("value", &self.value)?;
        map.serialize_entry("granted_right", &self.granted_right)?;
        map.serialize_entry("masked", &self.masked)?;
        map.serialize_entry("store_version", &self.store_version)?;
        if !self.masked {
            map.serialize_entry("matched_rule", &self.matched_rule)?;
            map.serialize_entry("explanation", &self.explanation)?;
        }
        map.end()
    }
}

/// Precedence among rule outcomes at the winning priority level, strongest
/// first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombiningOrder(pub [DecisionValue; 3]);

impl CombiningOrder {
    pub const DENY_OVERRIDES: CombiningOrder = CombiningOrder([
        DecisionValue::Deny,
        DecisionValue::Permit,
        DecisionValue::Indeterminate,
    ]);

    /// Parses a comma-separated ordering such as `Permit,Deny,Indeterminate`.
    pub fn parse(s: &str) -> Option<Self> {
        let vals: Vec<DecisionValue> = s
            .split(',')
            .map(|t| DecisionValue::parse(t.trim()))
            .collect::<Option<_>>()?;
        let order: [DecisionValue; 3] = vals.try_into().ok()?;
        let distinct: BTreeSet<_> = order.iter().collect();
        (distinct.len() == 3 && !order.contains(&DecisionValue::NotApplicable))
            .then_some(CombiningOrder(order))
    }

    fn strongest(&self, present: impl Fn(DecisionValue) -> bool) -> Option<DecisionValue> {
        self.0.into_iter().find(|v| present(*v))
    }
}

impl Default for CombiningOrder {
    fn default() -> Self {
        Self::DENY_OVERRIDES
    }
}

impl fmt::Display for CombiningOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

/// True iff the rule's target covers the request.
pub fn match_target(
    rule: &AccessRule,
    req: &AccessRequest,
    store: &PolicyStore,
) -> Result<bool, OntologyError> {
    Ok(target_trace(rule, req, store)?.is_some())
}

fn check_known(req: &AccessRequest, o: &Ontologies) -> Result<(), OntologyError> {
    for c in &req.subject_concepts {
        o.so.require(c)?;
    }
    for c in &req.object_concepts {
        o.oo.require(c)?;
    }
    o.ao.require(&req.action)?;
    Ok(())
}

/// `None` when the target does not match, else the steps that made it match.
fn target_trace(
    rule: &AccessRule,
    req: &AccessRequest,
    store: &PolicyStore,
) -> Result<Option<Vec<TraceEntry>>, OntologyError> {
    let o = store.ontologies();
    check_known(req, o)?;
    let mut trace = Vec::new();

    // (a) subject, with role inheritance
    match &rule.subject {
        ConceptPattern::Any if req.subject_concepts.is_empty() => return Ok(None),
        ConceptPattern::Any => {}
        ConceptPattern::Concept(s) => {
            let mut found = None;
            'outer: for c in &req.subject_concepts {
                let mut roles = o.so.inherited_rights_roles(c)?;
                roles.remove(c);
                for r in std::iter::once(c.clone()).chain(roles) {
                    if let Some(chain) = o.so.isa_path(s, &r)? {
                        found = Some((c.clone(), r, chain));
                        break 'outer;
                    }
                }
            }
            let Some((c, r, chain)) = found else {
                return Ok(None);
            };
            if c != r {
                trace.push(TraceEntry::Inheritance {
                    chain: o.so.inheritance_path(&c, &r).unwrap_or_else(|| vec![c.clone(), r.clone()]),
                });
            }
            trace.push(TraceEntry::Subsumption { target: "subject", chain });
        }
    }

    // (b) object
    match &rule.object {
        ConceptPattern::Any if req.object_concepts.is_empty() => return Ok(None),
        ConceptPattern::Any => {}
        ConceptPattern::Concept(t) => {
            let mut found = None;
            for c in &req.object_concepts {
                if let Some(chain) = o.oo.isa_path(t, c)? {
                    found = Some(chain);
                    break;
                }
            }
            let Some(chain) = found else {
                return Ok(None);
            };
            trace.push(TraceEntry::Subsumption { target: "object", chain });
        }
    }

    // (c) action
    if let ConceptPattern::Concept(a) = &rule.action {
        match o.ao.isa_path(a, &req.action)? {
            Some(chain) => trace.push(TraceEntry::Subsumption { target: "action", chain }),
            None => return Ok(None),
        }
    }

    // (d) required attributes from trusted issuers, up to equivalence
    for required in &rule.required_attributes {
        let accepted = o.ato.equivalent_attributes(required)?;
        let hit = req.subject_attributes.iter().find(|p| {
            accepted.contains(&p.name) && store.trusted_soas().contains(&p.soa_id)
        });
        let Some(p) = hit else {
            return Ok(None);
        };
        trace.push(TraceEntry::RequiredAttribute {
            required: required.name.clone(),
            satisfied_by: p.name.clone(),
            issuer: p.soa_id.clone(),
        });
    }

    // (e) attribute variables
    for side in [Side::Subject, Side::Object] {
        for var in rule.vars(side) {
            o.ato.require(&var.name)?;
            let hit = req
                .attributes(side)
                .iter()
                .find(|p| o.ato.contains(&p.name) && o.ato.subsumes(&var.name, &p.name).unwrap_or(false));
            let Some(p) = hit else {
                return Ok(None);
            };
            trace.push(TraceEntry::Variable {
                side,
                variable: var.name.clone(),
                bound_by: p.name.clone(),
            });
        }
    }

    Ok(Some(trace))
}

/// A rule's outcome for a request, with the steps that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleEvaluation {
    pub outcome: DecisionValue,
    pub trace: Vec<TraceEntry>,
}

pub fn evaluate_rule(rule: &AccessRule, req: &AccessRequest, store: &PolicyStore) -> DecisionValue {
    evaluate_rule_traced(rule, req, store).outcome
}

pub fn evaluate_rule_traced(
    rule: &AccessRule,
    req: &AccessRequest,
    store: &PolicyStore,
) -> RuleEvaluation {
    let mut trace = match target_trace(rule, req, store) {
        Ok(Some(t)) => t,
        Ok(None) => {
            return RuleEvaluation {
                outcome: DecisionValue::NotApplicable,
                trace: Vec::new(),
            }
        }
        Err(e) => {
            return RuleEvaluation {
                outcome: DecisionValue::Indeterminate,
                trace: vec![TraceEntry::Error { message: e.to_string() }],
            }
        }
    };

    let mut failed = false;
    let mut broken = false;

    match purpose_compliant(&req.purpose, &rule.purpose, store.purposes()) {
        Ok(ok) => {
            failed |= !ok;
            trace.push(TraceEntry::Purpose {
                requested: req.purpose.clone(),
                allowed: rule.purpose.to_string(),
                compliant: ok,
            });
        }
        Err(e) => {
            broken = true;
            trace.push(TraceEntry::Error { message: e.to_string() });
        }
    }

    let mut log = AtomLog::new();
    let truth = evaluate_logged(&rule.condition, &req.context, &mut log);
    for (atom, result) in log {
        let result = match result {
            Ok(t) => t.to_string(),
            Err(e) => e.to_string(),
        };
        trace.push(TraceEntry::Condition {
            atom: atom.to_string(),
            result,
        });
    }
    match truth {
        Ok(Truth::True) => {}
        Ok(Truth::False) => failed = true,
        Ok(Truth::MissingAttribute(_)) | Err(_) => broken = true,
    }

    let outcome = if broken {
        DecisionValue::Indeterminate
    } else if failed {
        DecisionValue::Deny
    } else {
        DecisionValue::Permit
    };
    RuleEvaluation { outcome, trace }
}

pub fn decide(store: &PolicyStore, req: &AccessRequest) -> Decision {
    decide_with(store, req, CombiningOrder::default())
}

/// [`decide`] under an explicit combining order.
pub fn decide_with(store: &PolicyStore, req: &AccessRequest, order: CombiningOrder) -> Decision {
    let rules = store.rules();
    let evaluated: Vec<(usize, RuleEvaluation)> = rules
        .iter()
        .map(|r| evaluate_rule_traced(r, req, store))
        .enumerate()
        .filter(|(_, e)| e.outcome != DecisionValue::NotApplicable)
        .collect();

    let version = TraceEntry::StoreVersion { version: store.version() };
    let Some(top) = evaluated.iter().map(|(i, _)| rules[*i].priority).max() else {
        return Decision {
            value: DecisionValue::NotApplicable,
            granted_right: None,
            matched_rule: None,
            explanation: vec![version, TraceEntry::NoRuleMatched { evaluated: rules.len() }],
            masked: false,
            store_version: store.version(),
        };
    };
    let level: Vec<&(usize, RuleEvaluation)> =
        evaluated.iter().filter(|(i, _)| rules[*i].priority == top).collect();
    let value = order
        .strongest(|v| level.iter().any(|(_, e)| e.outcome == v))
        .expect("every applicable outcome is ranked");
    let (selected, evaluation) = level
        .iter()
        .find(|(_, e)| e.outcome == value)
        .map(|(i, e)| (&rules[*i], e))
        .expect("winning value comes from some rule");

    let mut explanation = vec![
        version,
        TraceEntry::Selected {
            rule: selected.name.clone(),
            priority: selected.priority,
            outcome: value,
        },
    ];
    explanation.extend(evaluation.trace.iter().cloned());
    for (i, e) in &evaluated {
        let r = &rules[*i];
        if r.name != selected.name && r.public {
            explanation.push(TraceEntry::OtherRule {
                rule: r.name.clone(),
                priority: r.priority,
                outcome: e.outcome,
            });
        }
    }

    let masked = !selected.public && value != DecisionValue::Permit;
    Decision {
        value,
        granted_right: if value == DecisionValue::Permit { selected.right.clone() } else { None },
        matched_rule: Some(selected.name.clone()),
        explanation,
        masked,
        store_version: store.version(),
    }
}

/// Human-readable account of a decision. Masked decisions read exactly
/// [`MASKED_EXPLANATION`].
pub fn explain(d: &Decision) -> String {
    if d.masked {
        return MASKED_EXPLANATION.to_string();
    }
    let mut out = String::from(d.value.as_str());
    for entry in &d.explanation {
        out.push_str("\n  ");
        out.push_str(&entry.to_string());
    }
    if let Some(r) = &d.granted_right {
        out.push_str(&format!("\n  granted right {r}"));
    }
    out
}

/// Wire form of a decision. The trace names the deciding rule unless masked.
pub fn to_response(d: &Decision) -> XacmlResponseDoc {
    XacmlResponseDoc {
        decision: d.value,
        status: d.value.status().to_string(),
        right: d.granted_right.clone(),
        trace: if d.masked { None } else { d.matched_rule.clone() },
    }
}
