//! The XACML-style request/response subset.
//!
//! ```xml
//! <Request>
//!   <Subject SubjectId="joan">
//!     <Concept id="expert"/>
//!     <Attribute AttributeId="doctor" Issuer="hospital_ADMIN"/>
//!     <Attribute AttributeId="years_of_service" Issuer="hospital_ADMIN" DataType="int" Value="5"/>
//!   </Subject>
//!   <Resource ResourceId="jen_record"/>
//!   <Action ActionId="read"/>
//!   <Environment Purpose="treat"/>
//! </Request>
//! ```
//!
//! All four categories are mandatory. An `Attribute`'s `Name` (its AtO
//! concept) defaults to its `AttributeId`.

use std::collections::BTreeMap;

use super::{expect_root, invalid, required, scalar, scalar_type, unknown_child, ParseError};
use crate::ontology::AttributeDescriptor;
use crate::pdp::DecisionValue;
use crate::value::{Scalar, ScalarType};
use crate::xml::{self, Element};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct XacmlRequestDoc {
    pub subject_id: String,
    /// SO concepts (roles) the subject declares.
    pub subject_concepts: Vec<String>,
    pub subject_attributes: Vec<AttributeDescriptor>,
    pub resource_id: String,
    pub resource_concepts: Vec<String>,
    pub resource_attributes: Vec<AttributeDescriptor>,
    pub action_id: String,
    pub purpose: String,
    pub environment: BTreeMap<String, Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XacmlResponseDoc {
    pub decision: DecisionValue,
    pub status: String,
    pub right: Option<String>,
    /// Name of the deciding rule; absent when masked or when no rule applied.
    pub trace: Option<String>,
}

const CATEGORIES: [&str; 4] = ["Subject", "Resource", "Action", "Environment"];

pub fn parse_xacml_request(text: &str) -> Result<XacmlRequestDoc, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "Request")?;
    for child in &root.children {
        if !CATEGORIES.contains(&child.name.as_str()) {
            return Err(unknown_child(&root, child));
        }
    }
    let category = |name: &'static str| -> Result<&Element, ParseError> {
        let mut found = root.children_named(name);
        let first = found.next().ok_or(ParseError::MissingCategory {
            category: name,
            position: root.position,
        })?;
        if let Some(dup) = found.next() {
            return Err(super::structure(dup, format!("{name} category given twice")));
        }
        Ok(first)
    };

    let subject = category("Subject")?;
    let resource = category("Resource")?;
    let action = category("Action")?;
    let environment = category("Environment")?;

    let (subject_concepts, subject_attributes) = entity_body(subject)?;
    let (resource_concepts, resource_attributes) = entity_body(resource)?;
    if let Some(child) = action.children.first() {
        return Err(unknown_child(action, child));
    }

    let mut env = BTreeMap::new();
    for child in &environment.children {
        if child.name != "Attribute" {
            return Err(unknown_child(environment, child));
        }
        let attr = wire_attribute(child)?;
        let value = attr
            .value
            .ok_or_else(|| ParseError::MissingAttribute {
                element: "Attribute".into(),
                attribute: "Value",
                position: child.position,
            })?;
        if env.insert(attr.attribute_id.clone(), value).is_some() {
            return Err(invalid(child, "AttributeId", &attr.attribute_id, "environment attribute repeated"));
        }
    }

    Ok(XacmlRequestDoc {
        subject_id: required(subject, "SubjectId")?.to_string(),
        subject_concepts,
        subject_attributes,
        resource_id: required(resource, "ResourceId")?.to_string(),
        resource_concepts,
        resource_attributes,
        action_id: required(action, "ActionId")?.to_string(),
        purpose: required(environment, "Purpose")?.to_string(),
        environment: env,
    })
}

fn entity_body(el: &Element) -> Result<(Vec<String>, Vec<AttributeDescriptor>), ParseError> {
    let mut concepts = Vec::new();
    let mut attributes = Vec::new();
    for child in &el.children {
        match child.name.as_str() {
            "Concept" => concepts.push(required(child, "id")?.to_string()),
            "Attribute" => attributes.push(wire_attribute(child)?),
            _ => return Err(unknown_child(el, child)),
        }
    }
    Ok((concepts, attributes))
}

fn wire_attribute(el: &Element) -> Result<AttributeDescriptor, ParseError> {
    if let Some(child) = el.children.first() {
        return Err(unknown_child(el, child));
    }
    let id = required(el, "AttributeId")?.to_string();
    let kind = scalar_type(el, "DataType")?;
    let value = el.attr("Value").map(|v| scalar(el, kind, v)).transpose()?;
    Ok(AttributeDescriptor {
        name: el.attr("Name").unwrap_or(&id).to_string(),
        attribute_id: id,
        soa_id: el.attr("Issuer").unwrap_or_default().to_string(),
        equivalence_enabled: false,
        value,
    })
}

fn attribute_element(attr: &AttributeDescriptor) -> Element {
    let mut el = Element::new("Attribute").with_attr("AttributeId", &attr.attribute_id);
    if attr.name != attr.attribute_id {
        el = el.with_attr("Name", &attr.name);
    }
    if !attr.soa_id.is_empty() {
        el = el.with_attr("Issuer", &attr.soa_id);
    }
    if let Some(v) = &attr.value {
        if v.kind() != ScalarType::String {
            el = el.with_attr("DataType", v.kind().as_str());
        }
        el = el.with_attr("Value", v.lexical());
    }
    el
}

pub fn serialize_xacml_request(req: &XacmlRequestDoc) -> String {
    let entity = |tag: &str, id_attr: &str, id: &str, concepts: &[String], attrs: &[AttributeDescriptor]| {
        let mut el = Element::new(tag).with_attr(id_attr, id);
        for c in concepts {
            el.push(Element::new("Concept").with_attr("id", c));
        }
        el.children.extend(attrs.iter().map(attribute_element));
        el
    };
    let mut env = Element::new("Environment").with_attr("Purpose", &req.purpose);
    for (id, value) in &req.environment {
        env.push(attribute_element(&AttributeDescriptor {
            attribute_id: id.clone(),
            name: id.clone(),
            soa_id: String::new(),
            equivalence_enabled: false,
            value: Some(value.clone()),
        }));
    }
    let root = Element::new("Request")
        .with_child(entity(
            "Subject",
            "SubjectId",
            &req.subject_id,
            &req.subject_concepts,
            &req.subject_attributes,
        ))
        .with_child(entity(
            "Resource",
            "ResourceId",
            &req.resource_id,
            &req.resource_concepts,
            &req.resource_attributes,
        ))
        .with_child(Element::new("Action").with_attr("ActionId", &req.action_id))
        .with_child(env);
    xml::write_canonical(&root)
}

pub fn serialize_xacml_response(resp: &XacmlResponseDoc) -> String {
    let mut result = Element::new("Result")
        .with_child(Element::new("Decision").with_text(resp.decision.as_str()))
        .with_child(Element::new("Status").with_text(&resp.status));
    if let Some(right) = &resp.right {
        result.push(Element::new("Right").with_text(right));
    }
    if let Some(rule) = &resp.trace {
        result.push(Element::new("Trace").with_attr("Rule", rule));
    }
    xml::write_canonical(&Element::new("Response").with_child(result))
}

pub fn parse_xacml_response(text: &str) -> Result<XacmlResponseDoc, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "Response")?;
    let result = root.child("Result").ok_or(ParseError::MissingCategory {
        category: "Result",
        position: root.position,
    })?;
    let decision_el = result.child("Decision").ok_or(ParseError::MissingCategory {
        category: "Decision",
        position: result.position,
    })?;
    let decision = DecisionValue::parse(&decision_el.text)
        .ok_or_else(|| invalid(decision_el, "Decision", &decision_el.text, "not a decision value"))?;
    let mut resp = XacmlResponseDoc {
        decision,
        status: String::new(),
        right: None,
        trace: None,
    };
    for child in &result.children {
        match child.name.as_str() {
            "Decision" => {}
            "Status" => resp.status = child.text.clone(),
            "Right" => resp.right = Some(child.text.clone()),
            "Trace" => resp.trace = Some(required(child, "Rule")?.to_string()),
            _ => return Err(unknown_child(result, child)),
        }
    }
    Ok(resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    const JOAN: &str = r#"<Request>
  <Subject SubjectId="joan">
    <Attribute AttributeId="doctor" Issuer="hospital_ADMIN"/>
    <Attribute AttributeId="years_of_service" Issuer="hospital_ADMIN" DataType="int" Value="5"/>
  </Subject>
  <Resource ResourceId="jen_record"/>
  <Action ActionId="read"/>
  <Environment Purpose="treat"/>
</Request>"#;

    #[test]
    fn request_fields() {
        let req = parse_xacml_request(JOAN).unwrap();
        assert_eq!(req.subject_id, "joan");
        assert_eq!(req.subject_attributes.len(), 2);
        assert_eq!(req.subject_attributes[0].soa_id, "hospital_ADMIN");
        assert_eq!(req.subject_attributes[1].value, Some(Scalar::Int(5)));
        assert_eq!(req.resource_id, "jen_record");
        assert_eq!(req.action_id, "read");
        assert_eq!(req.purpose, "treat");
        assert_eq!(parse_xacml_request(&serialize_xacml_request(&req)).unwrap(), req);
    }

    #[test]
    fn missing_action_category() {
        let text = JOAN.replace(r#"<Action ActionId="read"/>"#, "");
        match parse_xacml_request(&text) {
            Err(ParseError::MissingCategory { category, .. }) => assert_eq!(category, "Action"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_request_has_location() {
        let err = parse_xacml_request("<Request>\n  <Subject SubjectId='a'>\n</Request>").unwrap_err();
        assert_eq!(err.code(), "MalformedXml");
        assert!(err.position().line >= 2);
    }

    #[test]
    fn not_applicable_response() {
        let text = serialize_xacml_response(&XacmlResponseDoc {
            decision: DecisionValue::NotApplicable,
            status: "not applicable".into(),
            right: None,
            trace: None,
        });
        assert_eq!(text.matches("NotApplicable").count(), 1);
        assert!(!text.contains("Trace"));
        assert_eq!(parse_xacml_response(&text).unwrap().decision, DecisionValue::NotApplicable);
    }
}
