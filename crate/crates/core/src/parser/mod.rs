//! XML formats: SPL policies and rules, ontology documents, purpose trees,
//! right catalogs, knowledge-base registries, and the XACML-style
//! request/response subset exchanged between enforcement and decision points.

mod documents;
mod spl;
mod xacml;

pub use documents::{
    load_ontology, parse_ontology_document, parse_purpose_tree, parse_registry, parse_rights,
    serialize_purpose_tree,
};
pub use spl::{parse_rule, parse_spl_policy, serialize_policy, serialize_rule, PolicyDocument};
pub use xacml::{
    parse_xacml_request, parse_xacml_response, serialize_xacml_request, serialize_xacml_response,
    XacmlRequestDoc, XacmlResponseDoc,
};

use crate::ontology::{OntologyError, OntologyKind};
use crate::policy::PurposeError;
use crate::value::{Scalar, ScalarType};
use crate::xml::{Element, MalformedXml, Position};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    MalformedXml(#[from] MalformedXml),
    #[error("unexpected root <{found}> at {position}, expected <{expected}>")]
    UnexpectedRoot {
        expected: &'static str,
        found: String,
        position: Position,
    },
    #[error("unknown element <{element}> inside <{parent}> at {position}")]
    UnknownElement {
        element: String,
        parent: String,
        position: Position,
    },
    #[error("duplicate rule name {name:?} at {position}")]
    DuplicateRuleName { name: String, position: Position },
    #[error("unknown ontologyRef {value:?} at {position}")]
    UnknownOntologyRef { value: String, position: Position },
    #[error("<{element}> at {position} must reference {expected}, found {found}")]
    MismatchedOntologyRef {
        element: String,
        expected: OntologyKind,
        found: OntologyKind,
        position: Position,
    },
    #[error("unknown condition type {value:?} at {position}")]
    UnknownConditionType { value: String, position: Position },
    #[error("request is missing the {category} category")]
    MissingCategory {
        category: &'static str,
        position: Position,
    },
    #[error("<{element}> at {position} is missing attribute {attribute:?}")]
    MissingAttribute {
        element: String,
        attribute: &'static str,
        position: Position,
    },
    #[error("invalid {what} {value:?} at {position}: {message}")]
    InvalidValue {
        what: String,
        value: String,
        message: String,
        position: Position,
    },
    #[error("invalid structure at {position}: {message}")]
    InvalidStructure { message: String, position: Position },
}

impl ParseError {
    pub fn position(&self) -> Position {
        match self {
            ParseError::MalformedXml(e) => e.position,
            ParseError::UnexpectedRoot { position, .. }
            | ParseError::UnknownElement { position, .. }
            | ParseError::DuplicateRuleName { position, .. }
            | ParseError::UnknownOntologyRef { position, .. }
            | ParseError::MismatchedOntologyRef { position, .. }
            | ParseError::UnknownConditionType { position, .. }
            | ParseError::MissingCategory { position, .. }
            | ParseError::MissingAttribute { position, .. }
            | ParseError::InvalidValue { position, .. }
            | ParseError::InvalidStructure { position, .. } => *position,
        }
    }

    /// Stable name of the error kind, as shown in reports.
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::MalformedXml(_) => "MalformedXml",
            ParseError::UnexpectedRoot { .. } => "UnexpectedRoot",
            ParseError::UnknownElement { .. } => "UnknownElement",
            ParseError::DuplicateRuleName { .. } => "DuplicateRuleName",
            ParseError::UnknownOntologyRef { .. } => "UnknownOntologyRef",
            ParseError::MismatchedOntologyRef { .. } => "MismatchedOntologyRef",
            ParseError::UnknownConditionType { .. } => "UnknownConditionType",
            ParseError::MissingCategory { .. } => "MissingCategory",
            ParseError::MissingAttribute { .. } => "MissingAttribute",
            ParseError::InvalidValue { .. } => "InvalidValue",
            ParseError::InvalidStructure { .. } => "InvalidStructure",
        }
    }
}

/// Failure to turn a document into a validated in-memory value.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DocumentError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Purpose(#[from] PurposeError),
}

impl DocumentError {
    pub fn code(&self) -> &'static str {
        match self {
            DocumentError::Parse(e) => e.code(),
            DocumentError::Ontology(e) => match e {
                OntologyError::CycleDetected { .. } => "CycleDetected",
                OntologyError::DuplicateId(_) => "DuplicateId",
                OntologyError::DanglingReference { .. } => "DanglingReference",
                OntologyError::WrongOntologyTag(_) => "WrongOntologyTag",
                OntologyError::IndividualIsaIndividual { .. } => "IndividualIsaIndividual",
                OntologyError::UnknownConcept(_) => "UnknownConcept",
            },
            DocumentError::Purpose(e) => match e {
                PurposeError::UnknownPurpose(_) => "UnknownPurpose",
                _ => "InvalidPurposeTree",
            },
        }
    }
}

// -- element helpers shared by the format modules --

fn expect_root(root: &Element, name: &'static str) -> Result<(), ParseError> {
    if root.name == name {
        Ok(())
    } else {
        Err(ParseError::UnexpectedRoot {
            expected: name,
            found: root.name.clone(),
            position: root.position,
        })
    }
}

fn required<'a>(e: &'a Element, attribute: &'static str) -> Result<&'a str, ParseError> {
    e.attr(attribute).ok_or_else(|| ParseError::MissingAttribute {
        element: e.name.clone(),
        attribute,
        position: e.position,
    })
}

fn unknown_child(parent: &Element, child: &Element) -> ParseError {
    ParseError::UnknownElement {
        element: child.name.clone(),
        parent: parent.name.clone(),
        position: child.position,
    }
}

fn invalid(e: &Element, what: impl Into<String>, value: &str, message: impl Into<String>) -> ParseError {
    ParseError::InvalidValue {
        what: what.into(),
        value: value.to_string(),
        message: message.into(),
        position: e.position,
    }
}

fn structure(e: &Element, message: impl Into<String>) -> ParseError {
    ParseError::InvalidStructure {
        message: message.into(),
        position: e.position,
    }
}

fn scalar_type(e: &Element, attribute: &'static str) -> Result<ScalarType, ParseError> {
    match e.attr(attribute) {
        None => Ok(ScalarType::String),
        Some(raw) => ScalarType::parse(raw)
            .ok_or_else(|| invalid(e, attribute, raw, "expected string, int, bool or decimal")),
    }
}

fn scalar(e: &Element, kind: ScalarType, raw: &str) -> Result<Scalar, ParseError> {
    Scalar::parse_as(kind, raw).map_err(|err| invalid(e, "value", raw, err.to_string()))
}

fn parse_bool(e: &Element, attribute: &'static str, default: bool) -> Result<bool, ParseError> {
    match e.attr(attribute) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => Err(invalid(e, attribute, other, "expected true or false")),
    }
}

fn parse_u32(e: &Element, attribute: &'static str) -> Result<u32, ParseError> {
    match e.attr(attribute) {
        None => Ok(0),
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| invalid(e, attribute, raw, "expected a non-negative integer")),
    }
}
