//! SPL policy documents and standalone `<rule>` documents.
//!
//! An `spl:access_Rule` and a `<rule>` share one body grammar: an optional
//! `spl:attribute_Set`, then `Target`, `Right`, `Purpose` and `Condition`,
//! each optional.

use std::collections::BTreeSet;

use super::{
    expect_root, invalid, parse_bool, parse_u32, required, scalar, scalar_type, structure,
    unknown_child, ParseError,
};
use crate::ontology::{equivalence_flag, AttributeDescriptor, OntologyKind};
use crate::policy::{
    AccessRule, Atom, AttributeVariable, ConceptPattern, ConditionExpr, Operator, PurposeRef, Side,
};
use crate::value::{Scalar, ScalarType};
use crate::xml::{self, Element};

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDocument {
    pub source_name: String,
    pub format_version: String,
    pub rules: Vec<AccessRule>,
}

impl PolicyDocument {
    pub fn new(source_name: impl Into<String>, rules: Vec<AccessRule>) -> Self {
        PolicyDocument {
            source_name: source_name.into(),
            format_version: FORMAT_VERSION.to_string(),
            rules,
        }
    }

    pub fn empty() -> Self {
        Self::new("", Vec::new())
    }
}

pub fn parse_spl_policy(text: &str) -> Result<PolicyDocument, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "spl:policy")?;
    let mut doc = PolicyDocument {
        source_name: root.attr("name").unwrap_or_default().to_string(),
        format_version: root.attr("version").unwrap_or(FORMAT_VERSION).to_string(),
        rules: Vec::new(),
    };
    let mut names = BTreeSet::new();
    let mut seen_rules_element = false;
    for section in &root.children {
        if section.name != "spl:access_Rules" {
            return Err(unknown_child(&root, section));
        }
        if seen_rules_element {
            return Err(structure(section, "more than one spl:access_Rules element"));
        }
        seen_rules_element = true;
        for rule_el in &section.children {
            if rule_el.name != "spl:access_Rule" {
                return Err(unknown_child(section, rule_el));
            }
            let rule = parse_rule_element(rule_el, "Name")?;
            if !names.insert(rule.name.clone()) {
                return Err(ParseError::DuplicateRuleName {
                    name: rule.name,
                    position: rule_el.position,
                });
            }
            doc.rules.push(rule);
        }
    }
    Ok(doc)
}

/// Parses a standalone `<rule>` document. An unnamed rule is called `rule`.
pub fn parse_rule(text: &str) -> Result<AccessRule, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "rule")?;
    parse_rule_element(&root, "Name")
}

fn parse_rule_element(el: &Element, name_attr: &'static str) -> Result<AccessRule, ParseError> {
    let name = match el.attr(name_attr) {
        Some(n) if n.is_empty() => return Err(invalid(el, name_attr, n, "rule name is empty")),
        Some(n) => n.to_string(),
        None if el.name == "rule" => "rule".to_string(),
        None => return Err(required(el, name_attr).unwrap_err()),
    };
    let mut rule = AccessRule::new(name);
    rule.public = parse_bool(el, "Public", true)?;
    rule.priority = parse_u32(el, "Priority")?;

    let mut seen = BTreeSet::new();
    for child in &el.children {
        if !seen.insert(child.name.as_str()) {
            return Err(structure(child, format!("<{}> given more than once", child.name)));
        }
        match child.name.as_str() {
            "spl:attribute_Set" => {
                for attr in &child.children {
                    if attr.name != "spl:attribute" {
                        return Err(unknown_child(child, attr));
                    }
                    rule.required_attributes.push(parse_required_attribute(attr)?);
                }
            }
            "Target" => parse_target(child, &mut rule)?,
            "Right" => rule.right = Some(required(child, "type")?.to_string()),
            "Purpose" => rule.purpose = PurposeRef::parse(required(child, "type")?),
            "Condition" => rule.condition = parse_condition(child)?,
            _ => return Err(unknown_child(el, child)),
        }
    }
    rule.check_shape().map_err(|m| structure(el, m))?;
    Ok(rule)
}

fn parse_required_attribute(el: &Element) -> Result<AttributeDescriptor, ParseError> {
    let mut name = None;
    let mut soa = None;
    for child in &el.children {
        match child.name.as_str() {
            "spl:attribute_Name" => name = Some(child.text.clone()),
            "spl:SOA_ID" => soa = Some(child.text.clone()),
            _ => return Err(unknown_child(el, child)),
        }
    }
    let name = name.filter(|n| !n.is_empty()).ok_or_else(|| {
        structure(el, "spl:attribute needs a non-empty spl:attribute_Name")
    })?;
    Ok(AttributeDescriptor {
        attribute_id: el.attr("attributeID").unwrap_or(&name).to_string(),
        name,
        soa_id: soa.unwrap_or_default(),
        equivalence_enabled: equivalence_flag(el.attr("e")),
        value: None,
    })
}

fn ontology_ref(el: &Element, expected: OntologyKind) -> Result<(), ParseError> {
    let Some(raw) = el.attr("ontologyRef") else {
        return Ok(());
    };
    let found = OntologyKind::parse(raw).ok_or_else(|| ParseError::UnknownOntologyRef {
        value: raw.to_string(),
        position: el.position,
    })?;
    if found != expected {
        return Err(ParseError::MismatchedOntologyRef {
            element: el.name.clone(),
            expected,
            found,
            position: el.position,
        });
    }
    Ok(())
}

fn parse_target(el: &Element, rule: &mut AccessRule) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for child in &el.children {
        let slot = match child.name.as_str() {
            "Subject" => Some((OntologyKind::So, &mut rule.subject)),
            "Object" => Some((OntologyKind::Oo, &mut rule.object)),
            "Action" => Some((OntologyKind::Ao, &mut rule.action)),
            "AttributeVariable" => None,
            _ => return Err(unknown_child(el, child)),
        };
        match slot {
            Some((kind, pattern)) => {
                if !seen.insert(child.name.as_str()) {
                    return Err(structure(child, format!("<{}> given more than once", child.name)));
                }
                ontology_ref(child, kind)?;
                *pattern = ConceptPattern::concept(required(child, "name")?);
            }
            None => {
                ontology_ref(child, OntologyKind::Ato)?;
                let name = required(child, "name")?.to_string();
                match required(child, "type")? {
                    "subject" => rule.subject_vars.push(AttributeVariable::subject(name)),
                    "object" => rule.object_vars.push(AttributeVariable::object(name)),
                    other => return Err(invalid(child, "type", other, "expected subject or object")),
                }
            }
        }
    }
    Ok(())
}

fn parse_condition(el: &Element) -> Result<ConditionExpr, ParseError> {
    let kind = required(el, "type")?;
    match kind {
        "And" | "Or" => {
            let mut children = Vec::new();
            for child in &el.children {
                if child.name != "Condition" {
                    return Err(unknown_child(el, child));
                }
                children.push(parse_condition(child)?);
            }
            if children.is_empty() {
                return Err(structure(el, format!("{kind} needs at least one Condition")));
            }
            Ok(if kind == "And" {
                ConditionExpr::And(children)
            } else {
                ConditionExpr::Or(children)
            })
        }
        _ => {
            let operator = Operator::parse(kind).ok_or_else(|| ParseError::UnknownConditionType {
                value: kind.to_string(),
                position: el.position,
            })?;
            let attribute = required(el, "attribute")?.to_string();
            let value_type = scalar_type(el, "valueType")?;
            let values = if operator == Operator::In {
                let mut values = Vec::new();
                for child in &el.children {
                    if child.name != "Value" {
                        return Err(unknown_child(el, child));
                    }
                    values.push(scalar(child, value_type, required(child, "reference")?)?);
                }
                if values.is_empty() {
                    return Err(structure(el, "In needs at least one Value"));
                }
                values
            } else {
                if let Some(child) = el.children.first() {
                    return Err(unknown_child(el, child));
                }
                vec![scalar(el, value_type, required(el, "reference")?)?]
            };
            Ok(ConditionExpr::Atom(Atom {
                attribute,
                operator,
                values,
            }))
        }
    }
}

/// Canonical form of a policy: fixed element order, sorted attributes,
/// two-space indentation. Equal documents produce identical bytes.
pub fn serialize_policy(doc: &PolicyDocument) -> String {
    let mut root = Element::new("spl:policy").with_attr("version", &doc.format_version);
    if !doc.source_name.is_empty() {
        root = root.with_attr("name", &doc.source_name);
    }
    let mut rules = Element::new("spl:access_Rules");
    for rule in &doc.rules {
        rules.push(rule_element("spl:access_Rule", rule));
    }
    xml::write_canonical(&root.with_child(rules))
}

/// Canonical form of a standalone rule.
pub fn serialize_rule(rule: &AccessRule) -> String {
    xml::write_canonical(&rule_element("rule", rule))
}

fn rule_element(tag: &str, rule: &AccessRule) -> Element {
    let mut el = Element::new(tag)
        .with_attr("Name", &rule.name)
        .with_attr("Public", rule.public.to_string())
        .with_attr("Priority", rule.priority.to_string());

    if !rule.required_attributes.is_empty() {
        let mut set = Element::new("spl:attribute_Set");
        for attr in &rule.required_attributes {
            set.push(
                Element::new("spl:attribute")
                    .with_attr("attributeID", &attr.attribute_id)
                    .with_attr("e", if attr.equivalence_enabled { "Enabled" } else { "Disabled" })
                    .with_child(Element::new("spl:attribute_Name").with_text(&attr.name))
                    .with_child(Element::new("spl:SOA_ID").with_text(&attr.soa_id)),
            );
        }
        el.push(set);
    }

    let mut target = Element::new("Target");
    let concept = |tag: &str, kind: OntologyKind, pattern: &ConceptPattern| match pattern {
        ConceptPattern::Any => None,
        ConceptPattern::Concept(id) => Some(
            Element::new(tag)
                .with_attr("name", id)
                .with_attr("ontologyRef", kind.as_str()),
        ),
    };
    let var = |v: &AttributeVariable| {
        Element::new("AttributeVariable")
            .with_attr("name", &v.name)
            .with_attr("type", v.binds.as_str())
            .with_attr("ontologyRef", OntologyKind::Ato.as_str())
    };
    target.children.extend(concept("Subject", OntologyKind::So, &rule.subject));
    target.children.extend(rule.vars(Side::Subject).iter().map(var));
    target.children.extend(concept("Object", OntologyKind::Oo, &rule.object));
    target.children.extend(rule.vars(Side::Object).iter().map(var));
    target.children.extend(concept("Action", OntologyKind::Ao, &rule.action));
    if !target.children.is_empty() {
        el.push(target);
    }

    if let Some(right) = &rule.right {
        el.push(Element::new("Right").with_attr("type", right));
    }
    if let PurposeRef::Id(p) = &rule.purpose {
        el.push(Element::new("Purpose").with_attr("type", p));
    }
    if rule.condition != ConditionExpr::Empty {
        el.push(condition_element(&rule.condition));
    }
    el
}

fn condition_element(expr: &ConditionExpr) -> Element {
    match expr {
        ConditionExpr::Empty => Element::new("Condition"),
        ConditionExpr::And(cs) | ConditionExpr::Or(cs) => {
            let kind = if matches!(expr, ConditionExpr::And(_)) { "And" } else { "Or" };
            let mut el = Element::new("Condition").with_attr("type", kind);
            el.children.extend(cs.iter().map(condition_element));
            el
        }
        ConditionExpr::Atom(atom) => {
            let mut el = Element::new("Condition")
                .with_attr("type", atom.operator.as_str())
                .with_attr("attribute", &atom.attribute);
            let kind = atom.values.first().map_or(ScalarType::String, Scalar::kind);
            if kind != ScalarType::String {
                el = el.with_attr("valueType", kind.as_str());
            }
            if atom.operator == Operator::In {
                for v in &atom.values {
                    el.push(Element::new("Value").with_attr("reference", v.lexical()));
                }
            } else if let Some(v) = atom.values.first() {
                el = el.with_attr("reference", v.lexical());
            }
            el
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_policy() {
        let doc = parse_spl_policy("<spl:policy><spl:access_Rules/></spl:policy>").unwrap();
        assert!(doc.rules.is_empty());
        assert_eq!(
            serialize_policy(&doc),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <spl:policy version=\"1.0\">\n  <spl:access_Rules/>\n</spl:policy>\n"
        );
    }

    #[test]
    fn duplicate_rule_names_rejected() {
        let text = r#"<spl:policy><spl:access_Rules>
            <spl:access_Rule Name="a"/>
            <spl:access_Rule Name="a"/>
        </spl:access_Rules></spl:policy>"#;
        match parse_spl_policy(text) {
            Err(ParseError::DuplicateRuleName { name, position }) => {
                assert_eq!(name, "a");
                assert_eq!(position.line, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_element_rejected() {
        let err = parse_rule("<rule><Obligation/></rule>").unwrap_err();
        assert_eq!(err.code(), "UnknownElement");
        let err = parse_rule("<rule><Target><Whom name='x'/></Target></rule>").unwrap_err();
        assert_eq!(err.code(), "UnknownElement");
    }

    #[test]
    fn ontology_ref_checks() {
        let err = parse_rule(r#"<rule><Target><Subject name="a" ontologyRef="XX"/></Target></rule>"#)
            .unwrap_err();
        assert!(matches!(err, ParseError::UnknownOntologyRef { ref value, .. } if value == "XX"));
        let err = parse_rule(r#"<rule><Target><Subject name="a" ontologyRef="OO"/></Target></rule>"#)
            .unwrap_err();
        assert_eq!(err.code(), "MismatchedOntologyRef");
    }

    #[test]
    fn unknown_condition_type() {
        let err = parse_rule(r#"<rule><Condition type="Roughly" attribute="a" reference="1"/></rule>"#)
            .unwrap_err();
        assert_eq!(err.code(), "UnknownConditionType");
    }

    #[test]
    fn defaults_for_absent_elements() {
        let rule = parse_rule("<rule/>").unwrap();
        assert_eq!(rule, AccessRule::new("rule"));
        let doc = parse_spl_policy(
            r#"<spl:policy><spl:access_Rules><spl:access_Rule Name="r"/></spl:access_Rules></spl:policy>"#,
        )
        .unwrap();
        let r = &doc.rules[0];
        assert_eq!(r.subject, ConceptPattern::Any);
        assert_eq!(r.purpose, PurposeRef::Any);
        assert_eq!(r.condition, ConditionExpr::Empty);
        assert!(r.public);
    }

    #[test]
    fn typed_and_nested_conditions_round_trip() {
        let text = r#"<rule Name="x">
          <Condition type="Or">
            <Condition type="GreaterThan" attribute="age" reference="50" valueType="int"/>
            <Condition type="And">
              <Condition type="In" attribute="ward" ><Value reference="icu"/><Value reference="er"/></Condition>
              <Condition type="LessThanOrEqual" attribute="dose" reference="2.5" valueType="decimal"/>
            </Condition>
          </Condition>
        </rule>"#;
        let rule = parse_rule(text).unwrap();
        assert_eq!(rule.condition.atoms().len(), 3);
        let again = parse_rule(&serialize_rule(&rule)).unwrap();
        assert_eq!(again, rule);
    }

    #[test]
    fn bad_values_carry_locations() {
        let err = parse_rule(r#"<rule>
<Condition type="GreaterThan" attribute="age" reference="old" valueType="int"/></rule>"#)
            .unwrap_err();
        assert_eq!(err.code(), "InvalidValue");
        assert_eq!(err.position().line, 2);
        assert_eq!(parse_rule(r#"<rule Public="maybe"/>"#).unwrap_err().code(), "InvalidValue");
        assert_eq!(parse_rule(r#"<rule Priority="-1"/>"#).unwrap_err().code(), "InvalidValue");
        assert_eq!(
            parse_rule(r#"<rule><Condition type="And"/></rule>"#).unwrap_err().code(),
            "InvalidStructure"
        );
    }
}
