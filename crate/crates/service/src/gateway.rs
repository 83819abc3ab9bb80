use std::sync::{Arc, RwLock};

use sacpdp_core::ontology::OntologyKind;
use sacpdp_core::parser::{load_ontology, parse_purpose_tree, parse_registry, parse_rights, parse_spl_policy, DocumentError};
use sacpdp_core::policy::ValidationReport;
use sacpdp_core::Deployment;

use crate::audit::AuditLog;

/// Which part of the active deployment an admin load replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdminKind {
    Policy,
    Ontology(OntologyKind),
    Purposes,
    Registry,
    Rights,
}

impl AdminKind {
    /// Parses the path below `/admin/`.
    pub fn from_path(path: &str) -> Option<Self> {
        match path.trim_matches('/').split('/').collect::<Vec<_>>().as_slice() {
            ["policy"] => Some(AdminKind::Policy),
            ["purposes"] => Some(AdminKind::Purposes),
            ["registry"] => Some(AdminKind::Registry),
            ["rights"] => Some(AdminKind::Rights),
            ["ontology", tag] => OntologyKind::parse(tag).map(AdminKind::Ontology),
            _ => None,
        }
    }

    fn label(self) -> String {
        match self {
            AdminKind::Policy => "policy".into(),
            AdminKind::Ontology(k) => format!("ontology/{k}"),
            AdminKind::Purposes => "purposes".into(),
            AdminKind::Registry => "registry".into(),
            AdminKind::Rights => "rights".into(),
        }
    }
}

/// Shared service state. Decisions read an `Arc` snapshot; admin loads
/// build a complete replacement and swap it in.
#[derive(Debug)]
pub struct Gateway {
    current: RwLock<Arc<Deployment>>,
    admin: tokio::sync::Mutex<()>,
    pub audit: AuditLog,
    pub upstream: String,
    pub client: reqwest::Client,
}

impl Gateway {
    pub fn new(deployment: Deployment, audit: AuditLog, upstream: impl Into<String>) -> Self {
        Gateway {
            current: RwLock::new(Arc::new(deployment)),
            admin: tokio::sync::Mutex::new(()),
            audit,
            upstream: upstream.into(),
            client: reqwest::Client::new(),
        }
    }

    pub fn snapshot(&self) -> Arc<Deployment> {
        self.current.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Parses and validates `text` as a replacement for `kind`, then
    /// activates it under the next version. On failure nothing changes.
    pub async fn admin_load(&self, kind: AdminKind, text: &str) -> Result<u64, ValidationReport> {
        let _guard = self.admin.lock().await;
        let active = self.snapshot();
        let mut parts = active.store.parts().clone();
        let mut registry = active.registry.clone();
        let fail = |e: DocumentError| {
            let mut report = ValidationReport::default();
            report.push(e.code(), kind.label(), e.to_string());
            report
        };
        match kind {
            AdminKind::Policy => parts.policy = parse_spl_policy(text).map_err(|e| fail(e.into()))?,
            AdminKind::Ontology(expected) => {
                let graph = load_ontology(text).map_err(fail)?;
                if graph.kind() != expected {
                    let mut report = ValidationReport::default();
                    report.push(
                        "WrongOntologyTag",
                        kind.label(),
                        format!("expected a {expected} document, found {}", graph.kind()),
                    );
                    return Err(report);
                }
                parts.ontologies.set(graph);
            }
            AdminKind::Purposes => parts.purposes = parse_purpose_tree(text).map_err(fail)?,
            AdminKind::Registry => registry = parse_registry(text).map_err(|e| fail(e.into()))?,
            AdminKind::Rights => parts.rights = parse_rights(text).map_err(|e| fail(e.into()))?,
        }
        let next = Deployment::activate(parts, registry, active.version() + 1)?;
        let version = next.version();
        *self.current.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(next);
        tracing::info!("activated {} as policy store version {version}", kind.label());
        Ok(version)
    }
}
