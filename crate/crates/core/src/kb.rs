//! The semantic knowledge base consulted by the enforcement point: which
//! concepts and stored attributes belong to each subject and object.

use std::collections::{BTreeMap, BTreeSet};

use crate::ontology::{AttributeDescriptor, Ontologies};
use crate::parser::XacmlRequestDoc;
use crate::pdp::AccessRequest;
use crate::policy::ValidationReport;
use crate::value::Scalar;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectEntry {
    pub id: String,
    pub concepts: Vec<String>,
    pub attributes: Vec<AttributeDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectEntry {
    pub id: String,
    /// Resource path the gateway maps onto this object, e.g. `/records/jen`.
    pub path: Option<String>,
    pub concepts: Vec<String>,
    pub attributes: Vec<AttributeDescriptor>,
}

/// Values an attribute may take; used to draw random context values.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueRange {
    Int { min: i64, max: i64 },
    Decimal { min: f64, max: f64 },
    Bool,
    Values(Vec<Scalar>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRange {
    pub attribute: String,
    pub range: ValueRange,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegistryDocument {
    pub subjects: Vec<SubjectEntry>,
    pub objects: Vec<ObjectEntry>,
    pub ranges: Vec<AttributeRange>,
}

/// A request after knowledge-base lookup, with notes on anything the
/// lookup discarded or overrode.
#[derive(Debug, Clone, PartialEq)]
pub struct Enriched {
    pub request: AccessRequest,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeBase {
    subjects: BTreeMap<String, SubjectEntry>,
    objects: BTreeMap<String, ObjectEntry>,
    paths: BTreeMap<String, String>,
    ranges: BTreeMap<String, ValueRange>,
}

impl KnowledgeBase {
    /// Builds the registry, checking every concept and attribute against the
    /// ontologies. All problems are reported together.
    pub fn new(doc: RegistryDocument, ontologies: &Ontologies) -> Result<Self, ValidationReport> {
        let mut report = ValidationReport::default();
        let mut kb = KnowledgeBase::default();

        let check_attrs = |report: &mut ValidationReport, base: &str, attrs: &[AttributeDescriptor]| {
            for a in attrs {
                if !ontologies.ato.contains(&a.name) {
                    report.push(
                        "DanglingReference",
                        format!("{base}/attribute[@name='{}']", a.name),
                        format!("{:?} is not declared in AtO", a.name),
                    );
                }
            }
        };

        for s in doc.subjects {
            let base = format!("registry/subject[@id='{}']", s.id);
            for c in &s.concepts {
                if !ontologies.so.contains(c) {
                    report.push(
                        "DanglingReference",
                        format!("{base}/concept[@id='{c}']"),
                        format!("{c:?} is not declared in SO"),
                    );
                }
            }
            check_attrs(&mut report, &base, &s.attributes);
            if kb.subjects.contains_key(&s.id) {
                report.push("DuplicateId", base, "subject registered twice");
                continue;
            }
            kb.subjects.insert(s.id.clone(), s);
        }
        for o in doc.objects {
            let base = format!("registry/object[@id='{}']", o.id);
            for c in &o.concepts {
                if !ontologies.oo.contains(c) {
                    report.push(
                        "DanglingReference",
                        format!("{base}/concept[@id='{c}']"),
                        format!("{c:?} is not declared in OO"),
                    );
                }
            }
            check_attrs(&mut report, &base, &o.attributes);
            if let Some(path) = &o.path {
                if kb.paths.insert(path.clone(), o.id.clone()).is_some() {
                    report.push("DuplicateId", base.clone(), format!("path {path} mapped twice"));
                }
            }
            if kb.objects.contains_key(&o.id) {
                report.push("DuplicateId", base, "object registered twice");
                continue;
            }
            kb.objects.insert(o.id.clone(), o);
        }
        for r in doc.ranges {
            if !ontologies.ato.contains(&r.attribute) {
                report.push(
                    "DanglingReference",
                    format!("registry/range[@attribute='{}']", r.attribute),
                    format!("{:?} is not declared in AtO", r.attribute),
                );
            }
            kb.ranges.insert(r.attribute, r.range);
        }

        if report.is_empty() {
            Ok(kb)
        } else {
            Err(report)
        }
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectEntry> {
        self.subjects.get(id)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectEntry> {
        self.objects.get(id)
    }

    pub fn object_for_path(&self, path: &str) -> Option<&ObjectEntry> {
        self.paths.get(path).and_then(|id| self.objects.get(id))
    }

    pub fn ranges(&self) -> &BTreeMap<String, ValueRange> {
        &self.ranges
    }

    /// Merges registry facts into a wire request and converts it.
    ///
    /// The registry is authoritative. A registered subject's concepts are
    /// its registered ones, narrowed to the declared ones when the request
    /// declares any; an unregistered subject (or object) has none. Asserted
    /// attributes are kept only when their issuer is trusted and the
    /// registry holds no attribute of the same name.
    pub fn enrich(&self, doc: &XacmlRequestDoc, trusted_soas: &BTreeSet<String>) -> Enriched {
        let mut notes = Vec::new();
        let mut wire = doc.clone();

        let subject = self.subjects.get(&doc.subject_id);
        wire.subject_concepts = narrow(
            subject.map(|s| s.concepts.as_slice()),
            &doc.subject_concepts,
        );
        wire.subject_attributes = merge_attributes(
            "subject",
            subject.map(|s| s.attributes.as_slice()).unwrap_or_default(),
            &doc.subject_attributes,
            trusted_soas,
            &mut notes,
        );

        let object = self.objects.get(&doc.resource_id);
        wire.resource_concepts = narrow(
            object.map(|o| o.concepts.as_slice()),
            &doc.resource_concepts,
        );
        wire.resource_attributes = merge_attributes(
            "object",
            object.map(|o| o.attributes.as_slice()).unwrap_or_default(),
            &doc.resource_attributes,
            trusted_soas,
            &mut notes,
        );

        Enriched {
            request: AccessRequest::from_xacml(&wire),
            notes,
        }
    }
}

fn narrow(registered: Option<&[String]>, declared: &[String]) -> Vec<String> {
    match registered {
        None => Vec::new(),
        Some(reg) if declared.is_empty() => reg.to_vec(),
        Some(reg) => reg.iter().filter(|c| declared.contains(c)).cloned().collect(),
    }
}

fn merge_attributes(
    side: &str,
    stored: &[AttributeDescriptor],
    asserted: &[AttributeDescriptor],
    trusted_soas: &BTreeSet<String>,
    notes: &mut Vec<String>,
) -> Vec<AttributeDescriptor> {
    let mut out: Vec<AttributeDescriptor> = stored.to_vec();
    for a in asserted {
        if !trusted_soas.contains(&a.soa_id) {
            notes.push(format!(
                "dropped {side} attribute {} from untrusted issuer {:?}",
                a.name, a.soa_id
            ));
            continue;
        }
        match stored.iter().find(|s| s.name == a.name) {
            Some(s) => {
                if s.value != a.value || s.soa_id != a.soa_id {
                    notes.push(format!(
                        "{side} attribute {} conflicts with the registry; registry value kept",
                        a.name
                    ));
                }
            }
            None => out.push(a.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{NodeKind, OntologyDocument, OntologyGraph};

    fn graph(kind: &str, ids: &[&str]) -> OntologyGraph {
        OntologyGraph::load(&OntologyDocument {
            kind: kind.into(),
            nodes: ids.iter().map(|i| (i.to_string(), NodeKind::Concept)).collect(),
            ..Default::default()
        })
        .unwrap()
    }

    fn ontologies() -> Ontologies {
        Ontologies {
            so: graph("SO", &["doctor", "expert"]),
            oo: graph("OO", &["record"]),
            ao: graph("AO", &["read"]),
            ato: graph("AtO", &["doctor", "years_of_service"]),
        }
    }

    fn kb() -> KnowledgeBase {
        KnowledgeBase::new(
            RegistryDocument {
                subjects: vec![SubjectEntry {
                    id: "joan".into(),
                    concepts: vec!["doctor".into(), "expert".into()],
                    attributes: vec![AttributeDescriptor::new("doctor", "hospital_ADMIN")],
                }],
                objects: vec![ObjectEntry {
                    id: "jen_record".into(),
                    path: Some("/records/jen".into()),
                    concepts: vec!["record".into()],
                    attributes: vec![],
                }],
                ranges: vec![],
            },
            &ontologies(),
        )
        .unwrap()
    }

    fn trusted() -> BTreeSet<String> {
        BTreeSet::from(["hospital_ADMIN".to_string()])
    }

    fn wire(subject: &str) -> XacmlRequestDoc {
        XacmlRequestDoc {
            subject_id: subject.into(),
            resource_id: "jen_record".into(),
            action_id: "read".into(),
            purpose: "treat".into(),
            ..Default::default()
        }
    }

    #[test]
    fn registered_subject_gets_registry_concepts() {
        let e = kb().enrich(&wire("joan"), &trusted());
        assert_eq!(e.request.subject_concepts.len(), 2);
        assert_eq!(e.request.object_concepts.len(), 1);
        assert_eq!(e.request.subject_attributes.len(), 1);
    }

    #[test]
    fn declared_roles_narrow_registered_ones() {
        let mut w = wire("joan");
        w.subject_concepts = vec!["doctor".into(), "admin".into()];
        let e = kb().enrich(&w, &trusted());
        assert_eq!(e.request.subject_concepts, BTreeSet::from(["doctor".to_string()]));
    }

    #[test]
    fn unregistered_subject_has_no_concepts() {
        let mut w = wire("mallory");
        w.subject_concepts = vec!["doctor".into()];
        assert!(kb().enrich(&w, &trusted()).request.subject_concepts.is_empty());
    }

    #[test]
    fn asserted_attributes_need_trusted_issuer() {
        let mut w = wire("joan");
        w.subject_attributes = vec![
            AttributeDescriptor::new("years_of_service", "hospital_ADMIN").with_value(5),
            AttributeDescriptor::new("years_of_service", "self").with_value(9),
        ];
        let e = kb().enrich(&w, &trusted());
        assert_eq!(e.request.context.get("years_of_service"), Some(&Scalar::Int(5)));
        assert_eq!(e.notes.len(), 1);
    }

    #[test]
    fn registry_wins_conflicts() {
        let mut w = wire("joan");
        w.subject_attributes = vec![AttributeDescriptor::new("doctor", "hospital_ADMIN").with_value(true)];
        let e = kb().enrich(&w, &trusted());
        assert_eq!(e.request.subject_attributes.len(), 1);
        assert_eq!(e.request.subject_attributes[0].value, None);
        assert!(e.notes[0].contains("registry value kept"));
    }

    #[test]
    fn dangling_registry_entries_reported_together() {
        let err = KnowledgeBase::new(
            RegistryDocument {
                subjects: vec![SubjectEntry {
                    id: "x".into(),
                    concepts: vec!["pilot".into()],
                    attributes: vec![AttributeDescriptor::new("badge", "")],
                }],
                objects: vec![],
                ranges: vec![],
            },
            &ontologies(),
        )
        .unwrap_err();
        assert_eq!(err.findings.len(), 2);
    }
}
