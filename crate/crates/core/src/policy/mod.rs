//! Rule and policy object model: the six-part access rule (subject, object,
//! action, purpose, condition, right) together with the attribute
//! requirements an SPL rule lists, plus referential validation.

mod condition;
mod purpose;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

pub use condition::{
    evaluate_condition, evaluate_logged, Atom, AtomLog, ConditionExpr, Context, Operator, Truth,
    TypeMismatch,
};
pub use purpose::{purpose_compliant, PurposeError, PurposeRef, PurposeTree};

use crate::ontology::{AttributeDescriptor, Ontologies, OntologyKind};

/// A rule's target concept. `Any` stands for the top of the ontology: it
/// matches every registered concept and is what an omitted target element
/// means.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ConceptPattern {
    Any,
    Concept(String),
}

impl ConceptPattern {
    pub fn concept(id: impl Into<String>) -> Self {
        ConceptPattern::Concept(id.into())
    }
}

impl fmt::Display for ConceptPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConceptPattern::Any => f.write_str("(any)"),
            ConceptPattern::Concept(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Subject,
    Object,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Subject => "subject",
            Side::Object => "object",
        }
    }
}

/// An attribute-ontology variable a rule's target must have bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AttributeVariable {
    pub name: String,
    pub binds: Side,
}

impl AttributeVariable {
    pub fn subject(name: impl Into<String>) -> Self {
        AttributeVariable {
            name: name.into(),
            binds: Side::Subject,
        }
    }

    pub fn object(name: impl Into<String>) -> Self {
        AttributeVariable {
            name: name.into(),
            binds: Side::Object,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessRule {
    pub name: String,
    pub public: bool,
    /// Higher wins.
    pub priority: u32,
    pub subject: ConceptPattern,
    pub subject_vars: Vec<AttributeVariable>,
    pub object: ConceptPattern,
    pub object_vars: Vec<AttributeVariable>,
    pub action: ConceptPattern,
    pub required_attributes: Vec<AttributeDescriptor>,
    pub purpose: PurposeRef,
    pub condition: ConditionExpr,
    pub right: Option<String>,
}

impl AccessRule {
    /// A public, priority-0 rule that matches anything and applies always.
    pub fn new(name: impl Into<String>) -> Self {
        AccessRule {
            name: name.into(),
            public: true,
            priority: 0,
            subject: ConceptPattern::Any,
            subject_vars: Vec::new(),
            object: ConceptPattern::Any,
            object_vars: Vec::new(),
            action: ConceptPattern::Any,
            required_attributes: Vec::new(),
            purpose: PurposeRef::Any,
            condition: ConditionExpr::Empty,
            right: None,
        }
    }

    pub fn vars(&self, side: Side) -> &[AttributeVariable] {
        match side {
            Side::Subject => &self.subject_vars,
            Side::Object => &self.object_vars,
        }
    }

    /// Structural checks that need no ontology.
    pub fn check_shape(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("rule name is empty".into());
        }
        for (side, vars) in [(Side::Subject, &self.subject_vars), (Side::Object, &self.object_vars)] {
            if let Some(v) = vars.iter().find(|v| v.binds != side) {
                return Err(format!("variable {} listed under {} binds {}", v.name, side.as_str(), v.binds.as_str()));
            }
        }
        self.condition.check_shape()
    }
}

/// A privilege category a granted rule hands back with its Permit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RightCategory {
    pub id: String,
    pub description: String,
    /// AO concepts the right additionally licenses.
    pub implied_actions: BTreeSet<String>,
}

pub type RightCatalog = BTreeMap<String, RightCategory>;

/// One problem found while validating a bundle, rule or catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub code: &'static str,
    /// XML-style path of the offending element or attribute.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn push(&mut self, code: &'static str, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            code,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.findings.extend(other.findings);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

/// Checks that every concept, attribute, purpose and right a rule names
/// resolves. The report is empty iff the rule is fully resolvable.
pub fn validate_rule(
    rule: &AccessRule,
    ontologies: &Ontologies,
    purposes: &PurposeTree,
    rights: &RightCatalog,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let base = format!("access_Rule[@Name='{}']", rule.name);

    if let Err(msg) = rule.check_shape() {
        report.push("InvalidRule", base.clone(), msg);
    }

    let targets = [
        ("Subject", OntologyKind::So, &rule.subject),
        ("Object", OntologyKind::Oo, &rule.object),
        ("Action", OntologyKind::Ao, &rule.action),
    ];
    for (element, kind, pattern) in targets {
        if let ConceptPattern::Concept(id) = pattern {
            if !ontologies.get(kind).contains(id) {
                report.push(
                    "DanglingReference",
                    format!("{base}/Target/{element}/@name"),
                    format!("{id:?} is not declared in {kind}"),
                );
            }
        }
    }

    let ato = &ontologies.ato;
    for var in rule.subject_vars.iter().chain(&rule.object_vars) {
        if !ato.contains(&var.name) {
            report.push(
                "DanglingReference",
                format!("{base}/Target/AttributeVariable[@name='{}']", var.name),
                format!("{:?} is not declared in AtO", var.name),
            );
        }
    }
    for attr in &rule.required_attributes {
        if !ato.contains(&attr.name) {
            report.push(
                "DanglingReference",
                format!(
                    "{base}/spl:attribute_Set/spl:attribute[@attributeID='{}']/spl:attribute_Name",
                    attr.attribute_id
                ),
                format!("{:?} is not declared in AtO", attr.name),
            );
        }
    }
    for atom in rule.condition.atoms() {
        if !ato.contains(&atom.attribute) {
            report.push(
                "DanglingReference",
                format!("{base}/Condition[@attribute='{}']", atom.attribute),
                format!("{:?} is not declared in AtO", atom.attribute),
            );
        }
    }

    if let PurposeRef::Id(p) = &rule.purpose {
        if !purposes.contains(p) {
            report.push(
                "UnknownPurpose",
                format!("{base}/Purpose/@type"),
                format!("{p:?} is not in the purpose tree"),
            );
        }
    }
    if let Some(right) = &rule.right {
        if !rights.contains_key(right) {
            report.push(
                "UnknownRight",
                format!("{base}/Right/@type"),
                format!("{right:?} is not a declared right category"),
            );
        }
    }
    report
}

/// Checks that every implied action of every right resolves in AO.
pub fn validate_rights(rights: &RightCatalog, ontologies: &Ontologies) -> ValidationReport {
    let mut report = ValidationReport::default();
    for right in rights.values() {
        for action in &right.implied_actions {
            if !ontologies.ao.contains(action) {
                report.push(
                    "DanglingReference",
                    format!("rights/right[@id='{}']/implies[@action='{action}']", right.id),
                    format!("{action:?} is not declared in AO"),
                );
            }
        }
    }
    report
}
