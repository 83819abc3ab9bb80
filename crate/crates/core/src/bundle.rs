//! Policy bundles: a flat `key = value` manifest naming the ontology,
//! purpose, policy, rights and registry files that make up a deployment.
//!
//! ```text
//! so = ehealth_so.xml
//! oo = ehealth_oo.xml
//! ao = ehealth_ao.xml
//! ato = ehealth_ato.xml
//! purposes = purposes.xml
//! policy = policy.xml
//! registry = registry.xml
//! rights = rights.xml          # optional
//! requests = requests          # optional directory of canned requests
//! trusted_soas = hospital_ADMIN, clinic_ADMIN
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use crate::kb::{KnowledgeBase, RegistryDocument};
use crate::ontology::{Ontologies, OntologyKind};
use crate::parser::{
    load_ontology, parse_purpose_tree, parse_registry, parse_rights, parse_spl_policy,
    parse_xacml_request, DocumentError, XacmlRequestDoc,
};
use crate::pdp::{PolicyStore, StoreParts};
use crate::policy::{RightCatalog, ValidationReport};

pub const MANIFEST_NAME: &str = "bundle.conf";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("bundle failed validation:\n{0}")]
    Invalid(ValidationReport),
}

/// A parsed `key = value` file. `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatConfig {
    pub path: PathBuf,
    entries: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn read(path: &Path) -> Result<Self, BundleError> {
        let text = fs::read_to_string(path).map_err(|source| BundleError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, BundleError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| BundleError::Config {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found {line:?}")))?;
            let key = k.trim().to_string();
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(err(format!("key `{key}` given twice")));
            }
        }
        Ok(FlatConfig {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, BundleError> {
        self.get(key).ok_or_else(|| BundleError::MissingKey(key.to_string()))
    }

    /// A path value, resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let base = self.path.parent().unwrap_or(Path::new("."));
        self.get(key).map(|v| base.join(v))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, BundleError> {
        self.require(key)?;
        Ok(self.path(key).expect("key present"))
    }

    /// Comma-separated list; empty items are dropped.
    pub fn list(&self, key: &str) -> BTreeSet<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// File locations of a deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub so: PathBuf,
    pub oo: PathBuf,
    pub ao: PathBuf,
    pub ato: PathBuf,
    pub purposes: PathBuf,
    pub policy: PathBuf,
    pub registry: PathBuf,
    pub rights: Option<PathBuf>,
    pub requests: Option<PathBuf>,
    pub trusted_soas: BTreeSet<String>,
}

impl Bundle {
    /// Opens a manifest file, or a directory holding `bundle.conf`.
    pub fn open(path: &Path) -> Result<Self, BundleError> {
        let manifest = if path.is_dir() {
            path.join(MANIFEST_NAME)
        } else {
            path.to_path_buf()
        };
        Self::from_config(&FlatConfig::read(&manifest)?)
    }

    pub fn from_config(cfg: &FlatConfig) -> Result<Self, BundleError> {
        Ok(Bundle {
            so: cfg.require_path("so")?,
            oo: cfg.require_path("oo")?,
            ao: cfg.require_path("ao")?,
            ato: cfg.require_path("ato")?,
            purposes: cfg.require_path("purposes")?,
            policy: cfg.require_path("policy")?,
            registry: cfg.require_path("registry")?,
            rights: cfg.path("rights"),
            requests: cfg.path("requests"),
            trusted_soas: cfg.list("trusted_soas"),
        })
    }

    /// Reads and validates every file. I/O failures stop at the first
    /// unreadable file; everything else is collected into one report.
    pub fn load(&self) -> Result<LoadedBundle, BundleError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| BundleError::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let sources = [
            (OntologyKind::So, read(&self.so)?),
            (OntologyKind::Oo, read(&self.oo)?),
            (OntologyKind::Ao, read(&self.ao)?),
            (OntologyKind::Ato, read(&self.ato)?),
        ];
        let purposes_text = read(&self.purposes)?;
        let policy_text = read(&self.policy)?;
        let registry_text = read(&self.registry)?;
        let rights_text = self.rights.as_deref().map(read).transpose()?;
        let mut canned_texts = Vec::new();
        if let Some(dir) = &self.requests {
            let mut entries: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|source| BundleError::Io {
                    path: dir.clone(),
                    source,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "xml"))
                .collect();
            entries.sort();
            for p in entries {
                let text = read(&p)?;
                canned_texts.push((p, text));
            }
        }

        let mut report = ValidationReport::default();
        let file = |p: &Path| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let note = |report: &mut ValidationReport, p: &Path, e: &DocumentError| {
            report.push(e.code(), file(p), e.to_string());
        };

        let mut ontologies = Ontologies::empty();
        let mut ontologies_ok = true;
        for ((kind, text), path) in sources.iter().zip([&self.so, &self.oo, &self.ao, &self.ato]) {
            match load_ontology(text) {
                Ok(g) if g.kind() == *kind => ontologies.set(g),
                Ok(g) => {
                    ontologies_ok = false;
                    report.push(
                        "WrongOntologyTag",
                        file(path),
                        format!("expected a {kind} document, found {}", g.kind()),
                    );
                }
                Err(e) => {
                    ontologies_ok = false;
                    note(&mut report, path, &e);
                }
            }
        }
        let purposes = parse_purpose_tree(&purposes_text)
            .map_err(|e| note(&mut report, &self.purposes, &e))
            .ok();
        let policy = parse_spl_policy(&policy_text)
            .map_err(|e| note(&mut report, &self.policy, &e.into()))
            .ok();
        let registry = parse_registry(&registry_text)
            .map_err(|e| note(&mut report, &self.registry, &e.into()))
            .ok();
        let rights = match (&rights_text, &self.rights) {
            (Some(text), Some(path)) => parse_rights(text)
                .map_err(|e| note(&mut report, path, &e.into()))
                .ok(),
            _ => Some(RightCatalog::new()),
        };
        let mut canned = Vec::new();
        for (p, text) in &canned_texts {
            match parse_xacml_request(text) {
                Ok(doc) => canned.push((file(p).trim_end_matches(".xml").to_string(), doc)),
                Err(e) => note(&mut report, p, &e.into()),
            }
        }

        let (Some(purposes), Some(policy), Some(registry), Some(rights), true) =
            (purposes, policy, registry, rights, ontologies_ok)
        else {
            return Err(BundleError::Invalid(report));
        };
        let parts = StoreParts {
            policy,
            ontologies,
            purposes,
            rights,
            trusted_soas: self.trusted_soas.clone(),
        };
        match Deployment::activate(parts, registry, 1) {
            Ok(deployment) if report.is_empty() => Ok(LoadedBundle { deployment, canned }),
            Ok(_) => Err(BundleError::Invalid(report)),
            Err(more) => {
                report.extend(more);
                Err(BundleError::Invalid(report))
            }
        }
    }
}

/// A validated policy store together with its knowledge base.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub store: PolicyStore,
    pub kb: KnowledgeBase,
    pub registry: RegistryDocument,
}

impl Deployment {
    pub fn activate(
        parts: StoreParts,
        registry: RegistryDocument,
        version: u64,
    ) -> Result<Self, ValidationReport> {
        let kb = KnowledgeBase::new(registry.clone(), &parts.ontologies);
        let store = PolicyStore::activate(parts, version);
        match (store, kb) {
            (Ok(store), Ok(kb)) => Ok(Deployment { store, kb, registry }),
            (store, kb) => {
                let mut report = ValidationReport::default();
                if let Err(r) = store {
                    report.extend(r);
                }
                if let Err(r) = kb {
                    report.extend(r);
                }
                Err(report)
            }
        }
    }

    pub fn version(&self) -> u64 {
        self.store.version()
    }
}

#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub deployment: Deployment,
    /// Canned requests from the bundle's request directory, by file stem.
    pub canned: Vec<(String, XacmlRequestDoc)>,
}
