//! Semantic access control: ontology-grounded policies evaluated by a
//! four-valued decision point.
//!
//! Requests are matched against rules through is-a subsumption, role
//! inheritance and attribute equivalence over four ontologies (subjects,
//! objects, actions, attributes), then checked for purpose compliance and
//! conditions, and combined by priority.

pub mod bundle;
pub mod diff;
pub mod gen;
pub mod invariants;
pub mod kb;
pub mod ontology;
pub mod parser;
pub mod pdp;
pub mod policy;
pub mod value;
pub mod xml;

pub use bundle::{Bundle, BundleError, Deployment, FlatConfig, LoadedBundle};
pub use kb::KnowledgeBase;
pub use ontology::{AttributeDescriptor, Ontologies, OntologyGraph, OntologyKind};
pub use pdp::{
    decide, decide_with, explain, oracle_decide, to_response, AccessRequest, CombiningOrder,
    Decision, DecisionValue, PolicyStore, StoreParts,
};
pub use policy::{AccessRule, PurposeTree, ValidationReport};
pub use value::Scalar;
