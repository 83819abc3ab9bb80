use std::fs;
use std::path::{Path, PathBuf};

use sacpdp_core::parser::{
    parse_xacml_request, serialize_xacml_response, XacmlRequestDoc,
};
use sacpdp_core::pdp::agrees;
use sacpdp_core::{
    decide, explain, oracle_decide, to_response, AccessRequest, Bundle, BundleError, DecisionValue,
    Deployment,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load() -> (Deployment, Vec<(String, XacmlRequestDoc)>) {
    let loaded = Bundle::open(&fixtures().join("ehealth")).unwrap().load().unwrap();
    (loaded.deployment, loaded.canned)
}

fn enrich(dep: &Deployment, doc: &XacmlRequestDoc) -> AccessRequest {
    dep.kb.enrich(doc, dep.store.trusted_soas()).request
}

#[test]
fn bundle_loads_with_canned_requests() {
    let (dep, canned) = load();
    assert_eq!(dep.store.rules().len(), 4);
    assert_eq!(dep.version(), 1);
    assert_eq!(canned.len(), 8);
}

#[test]
fn canned_requests_decide_as_expected() {
    use DecisionValue::*;
    let expected = [
        ("01_joan_five_years", Permit, Some("Consult_read"), false),
        ("02_joan_two_years", Deny, Some("Consult_read"), true),
        ("03_joan_years_unknown", Indeterminate, Some("Consult_read"), true),
        ("04_unregistered_subject", NotApplicable, None, false),
        ("05_email_consent_given", Permit, Some("Consent_email"), false),
        ("06_email_consent_refused", Deny, Some("Consent_email"), false),
        ("07_research_age_62", Permit, Some("Research_partners"), false),
        ("08_research_age_40", Deny, Some("Research_partners"), false),
    ];
    let (dep, canned) = load();
    for ((name, doc), (want_name, value, rule, masked)) in canned.iter().zip(expected) {
        assert_eq!(name, want_name);
        let req = enrich(&dep, doc);
        let d = decide(&dep.store, &req);
        assert_eq!(d.value, value, "{name}");
        assert_eq!(d.matched_rule.as_deref(), rule, "{name}");
        assert_eq!(d.masked, masked, "{name}");
        assert!(agrees(&d, &oracle_decide(&dep.store, &req)), "{name}");
    }
}

#[test]
fn permit_grants_read_only() {
    let (dep, canned) = load();
    let d = decide(&dep.store, &enrich(&dep, &canned[0].1));
    assert_eq!(d.granted_right.as_deref(), Some("read_only"));
    let text = explain(&d);
    assert!(text.contains("rule Consult_read"));
    assert!(text.contains("role inheritance") || text.contains("subject: expert is-a Anyperson"));
    assert!(text.contains("years_of_service >= 3: true"), "{text}");
}

#[test]
fn masked_decisions_explain_nothing() {
    let (dep, canned) = load();
    for (_, doc) in &canned[1..3] {
        let d = decide(&dep.store, &enrich(&dep, doc));
        assert_eq!(explain(&d), "access denied");
        let wire = serialize_xacml_response(&to_response(&d));
        assert!(!wire.contains("Consult_read"));
        assert!(!wire.contains("Trace"));
    }
}

#[test]
fn golden_permit_response() {
    let (dep, canned) = load();
    let req = enrich(&dep, &canned[0].1);
    let golden_path = fixtures().join("golden/consult_permit_response.xml");
    let from_oracle = serialize_xacml_response(&to_response(&oracle_decide(&dep.store, &req)));
    if std::env::var_os("SACPDP_BLESS").is_some() {
        fs::write(&golden_path, &from_oracle).unwrap();
    }
    let golden = fs::read_to_string(&golden_path).unwrap();
    assert_eq!(from_oracle, golden);
    assert_eq!(serialize_xacml_response(&to_response(&decide(&dep.store, &req))), golden);
}

#[test]
fn asserted_roles_do_not_help_unregistered_subjects() {
    let (dep, canned) = load();
    let doc = &canned[3].1;
    assert_eq!(doc.subject_concepts, vec!["doctor".to_string()]);
    assert!(enrich(&dep, doc).subject_concepts.is_empty());
}

#[test]
fn canned_requests_round_trip() {
    let (_, canned) = load();
    for (_, doc) in canned {
        let text = sacpdp_core::parser::serialize_xacml_request(&doc);
        assert_eq!(parse_xacml_request(&text).unwrap(), doc);
    }
}

fn copy_bundle() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = fixtures().join("ehealth");
    for entry in fs::read_dir(&src).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let conf = fs::read_to_string(dir.path().join("bundle.conf")).unwrap();
    fs::write(dir.path().join("bundle.conf"), conf.replace("requests = requests\n", "")).unwrap();
    dir
}

#[test]
fn cyclic_subject_ontology_is_reported() {
    let dir = copy_bundle();
    let so = dir.path().join("ehealth_so.xml");
    let text = fs::read_to_string(&so)
        .unwrap()
        .replace("</ontology>", "  <isa child=\"Anyperson\" parent=\"expert\"/>\n</ontology>");
    fs::write(&so, text).unwrap();
    match Bundle::open(dir.path()).unwrap().load() {
        Err(BundleError::Invalid(report)) => {
            assert!(report.findings.iter().any(|f| f.code == "CycleDetected"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_finding_is_reported() {
    let dir = copy_bundle();
    let policy = dir.path().join("policy.xml");
    let text = fs::read_to_string(&policy)
        .unwrap()
        .replace(r#"<Action name="read" ontologyRef="AO"/>"#, r#"<Action name="fly" ontologyRef="AO"/>"#);
    fs::write(&policy, text).unwrap();
    let registry = dir.path().join("registry.xml");
    let text = fs::read_to_string(&registry).unwrap().replace("\"nurse\"", "\"janitor\"");
    fs::write(&registry, text).unwrap();
    match Bundle::open(dir.path()).unwrap().load() {
        Err(BundleError::Invalid(report)) => {
            // three rules name the action, plus the registry entry
            assert_eq!(report.findings.len(), 4, "{report}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_policy_file_is_io_error() {
    let dir = copy_bundle();
    fs::remove_file(dir.path().join("policy.xml")).unwrap();
    assert!(matches!(
        Bundle::open(dir.path()).unwrap().load(),
        Err(BundleError::Io { .. })
    ));
}
