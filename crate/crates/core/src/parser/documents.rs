//! Ontology documents, purpose trees, right catalogs and registries.

use std::collections::BTreeSet;

use super::{
    expect_root, invalid, required, scalar, scalar_type, structure, unknown_child, DocumentError,
    ParseError,
};
use crate::kb::{AttributeRange, ObjectEntry, RegistryDocument, SubjectEntry, ValueRange};
use crate::ontology::{AttributeDescriptor, NodeKind, OntologyDocument, OntologyGraph};
use crate::policy::{PurposeTree, RightCatalog, RightCategory};
use crate::value::ScalarType;
use crate::xml::{self, Element};

/// Reads `<ontology kind="...">` into its raw declarations.
pub fn parse_ontology_document(text: &str) -> Result<OntologyDocument, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "ontology")?;
    let mut doc = OntologyDocument {
        kind: required(&root, "kind")?.to_string(),
        ..Default::default()
    };
    for child in &root.children {
        let attr = |name| required(child, name).map(str::to_string);
        match child.name.as_str() {
            "concept" => doc.nodes.push((attr("id")?, NodeKind::Concept)),
            "individual" => doc.nodes.push((attr("id")?, NodeKind::Individual)),
            "isa" => doc.isa.push((attr("child")?, attr("parent")?)),
            "inherits" => doc.inherits.push((attr("junior")?, attr("senior")?)),
            "equiv" => doc.equiv.push((attr("a")?, attr("b")?)),
            "arc" => doc.arcs.push((attr("from")?, attr("label")?, attr("to")?)),
            _ => return Err(unknown_child(&root, child)),
        }
    }
    Ok(doc)
}

/// Parses and validates an ontology document.
pub fn load_ontology(text: &str) -> Result<OntologyGraph, DocumentError> {
    Ok(OntologyGraph::load(&parse_ontology_document(text)?)?)
}

/// `<purposes><purpose id=".." parent=".."/>..</purposes>`
pub fn parse_purpose_tree(text: &str) -> Result<PurposeTree, DocumentError> {
    let root = xml::parse(text).map_err(ParseError::from)?;
    expect_root(&root, "purposes")?;
    let mut entries = Vec::new();
    for child in &root.children {
        if child.name != "purpose" {
            return Err(unknown_child(&root, child).into());
        }
        entries.push((
            required(child, "id")?.to_string(),
            child.attr("parent").map(str::to_string),
        ));
    }
    Ok(PurposeTree::new(entries)?)
}

pub fn serialize_purpose_tree(tree: &PurposeTree) -> String {
    let mut root = Element::new("purposes");
    for id in tree.ids() {
        let mut el = Element::new("purpose").with_attr("id", id);
        if let Some(p) = tree.parent_of(id) {
            el = el.with_attr("parent", p);
        }
        root.push(el);
    }
    xml::write_canonical(&root)
}

/// `<rights><right id=".." description=".."><implies action=".."/></right></rights>`
pub fn parse_rights(text: &str) -> Result<RightCatalog, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "rights")?;
    let mut catalog = RightCatalog::new();
    for child in &root.children {
        if child.name != "right" {
            return Err(unknown_child(&root, child));
        }
        let id = required(child, "id")?.to_string();
        let mut implied_actions = BTreeSet::new();
        for implied in &child.children {
            if implied.name != "implies" {
                return Err(unknown_child(child, implied));
            }
            implied_actions.insert(required(implied, "action")?.to_string());
        }
        let right = RightCategory {
            id: id.clone(),
            description: child.attr("description").unwrap_or_default().to_string(),
            implied_actions,
        };
        if catalog.insert(id.clone(), right).is_some() {
            return Err(structure(child, format!("right {id:?} declared twice")));
        }
    }
    Ok(catalog)
}

/// Knowledge-base registry: subjects, objects and per-attribute value
/// ranges.
pub fn parse_registry(text: &str) -> Result<RegistryDocument, ParseError> {
    let root = xml::parse(text)?;
    expect_root(&root, "registry")?;
    let mut doc = RegistryDocument::default();
    for child in &root.children {
        match child.name.as_str() {
            "subject" => {
                let (concepts, attributes) = entry_body(child)?;
                doc.subjects.push(SubjectEntry {
                    id: required(child, "id")?.to_string(),
                    concepts,
                    attributes,
                });
            }
            "object" => {
                let (concepts, attributes) = entry_body(child)?;
                doc.objects.push(ObjectEntry {
                    id: required(child, "id")?.to_string(),
                    path: child.attr("path").map(str::to_string),
                    concepts,
                    attributes,
                });
            }
            "range" => doc.ranges.push(parse_range(child)?),
            _ => return Err(unknown_child(&root, child)),
        }
    }
    Ok(doc)
}

fn entry_body(el: &Element) -> Result<(Vec<String>, Vec<AttributeDescriptor>), ParseError> {
    let mut concepts = Vec::new();
    let mut attributes = Vec::new();
    for child in &el.children {
        match child.name.as_str() {
            "concept" => concepts.push(required(child, "id")?.to_string()),
            "attribute" => attributes.push(registry_attribute(child)?),
            _ => return Err(unknown_child(el, child)),
        }
    }
    Ok((concepts, attributes))
}

fn registry_attribute(el: &Element) -> Result<AttributeDescriptor, ParseError> {
    let name = required(el, "name")?.to_string();
    let kind = scalar_type(el, "valueType")?;
    let value = el.attr("value").map(|v| scalar(el, kind, v)).transpose()?;
    Ok(AttributeDescriptor {
        attribute_id: el.attr("id").unwrap_or(&name).to_string(),
        name,
        soa_id: el.attr("soa").unwrap_or_default().to_string(),
        equivalence_enabled: false,
        value,
    })
}

fn parse_range(el: &Element) -> Result<AttributeRange, ParseError> {
    let attribute = required(el, "attribute")?.to_string();
    let kind = scalar_type(el, "valueType")?;
    let range = match kind {
        ScalarType::Int => {
            let bound = |name| -> Result<i64, ParseError> {
                let raw = required(el, name)?;
                raw.parse().map_err(|_| invalid(el, name, raw, "expected an integer"))
            };
            let (min, max) = (bound("min")?, bound("max")?);
            if min > max {
                return Err(structure(el, "min exceeds max"));
            }
            ValueRange::Int { min, max }
        }
        ScalarType::Decimal => {
            let bound = |name| -> Result<f64, ParseError> {
                let raw = required(el, name)?;
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid(el, name, raw, "expected a finite decimal"))
            };
            let (min, max) = (bound("min")?, bound("max")?);
            if min > max {
                return Err(structure(el, "min exceeds max"));
            }
            ValueRange::Decimal { min, max }
        }
        ScalarType::Bool => ValueRange::Bool,
        ScalarType::String => {
            let mut values = Vec::new();
            for child in &el.children {
                if child.name != "value" {
                    return Err(unknown_child(el, child));
                }
                values.push(scalar(child, kind, &child.text)?);
            }
            if values.is_empty() {
                return Err(structure(el, "string range needs at least one <value>"));
            }
            ValueRange::Values(values)
        }
    };
    Ok(AttributeRange { attribute, range })
}
