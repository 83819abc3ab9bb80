//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sacpdp_core::gen::{random_dag, random_request, random_store};
use sacpdp_core::invariants;
use sacpdp_core::ontology::{OntologyGraph, OntologyKind};
use sacpdp_core::parser::{
    parse_rule, parse_spl_policy, parse_xacml_response, serialize_policy, serialize_rule, XacmlRequestDoc,
};
use sacpdp_core::pdp::agrees;
use sacpdp_core::policy::{
    evaluate_condition, AttributeVariable, ConceptPattern, ConditionExpr, Operator, PurposeRef, Truth,
};
use sacpdp_core::{decide, explain, oracle_decide, Bundle, DecisionValue, Deployment, LoadedBundle};

use common::{fixtures, Running, Stub};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load_ehealth() -> LoadedBundle {
    Bundle::open(&fixtures().join("ehealth")).unwrap().load().unwrap()
}

fn golden(name: &str) -> String {
    fs::read_to_string(fixtures().join("golden").join(name)).unwrap()
}

fn golden_fidelity() -> Check {
    let doc = parse_spl_policy(&golden("consulting_access.xml")).map_err(|e| e.to_string())?;
    ensure(doc.rules.len() == 1, || format!("{} rules", doc.rules.len()))?;
    let rule = &doc.rules[0];
    let attr = rule.required_attributes.first().ok_or("no required attribute")?;
    ensure(
        rule.name == "Auth_doctors"
            && !rule.public
            && rule.required_attributes.len() == 1
            && attr.name == "doctor"
            && attr.soa_id == "hospital_ADMIN"
            && attr.equivalence_enabled,
        || format!("unexpected rule {rule:?}"),
    )?;

    let rule = parse_rule(&golden("consult_rule.xml")).map_err(|e| e.to_string())?;
    let expected = (
        ConceptPattern::concept("Anyperson"),
        vec![AttributeVariable::subject("doctors")],
        ConceptPattern::concept("Anyperson"),
        vec![AttributeVariable::object("patients")],
        ConceptPattern::concept("read"),
        PurposeRef::Id("treat".into()),
        ConditionExpr::atom("work_history", Operator::Equals, "work more than three years"),
        Some("modification".to_string()),
    );
    let got = (
        rule.subject.clone(),
        rule.subject_vars.clone(),
        rule.object.clone(),
        rule.object_vars.clone(),
        rule.action.clone(),
        rule.purpose.clone(),
        rule.condition.clone(),
        rule.right.clone(),
    );
    ensure(got == expected, || format!("six-tuple {got:?}"))?;

    let once = serialize_rule(&rule);
    let again = serialize_rule(&parse_rule(&once).map_err(|e| e.to_string())?);
    ensure(once == again, || "rule serialization is not a fixed point".into())?;
    let once = serialize_policy(&doc);
    let back = parse_spl_policy(&once).map_err(|e| e.to_string())?;
    ensure(back == doc && serialize_policy(&back) == once, || {
        "policy serialization is not a fixed point".into()
    })?;
    Ok("policy and rule fixtures parse as expected; serialization round-trips byte-exact".into())
}

fn enrich(dep: &Deployment, doc: &XacmlRequestDoc) -> sacpdp_core::AccessRequest {
    dep.kb.enrich(doc, dep.store.trusted_soas()).request
}

fn scenario_suite() -> Check {
    use DecisionValue::*;
    let loaded = load_ehealth();
    let dep = &loaded.deployment;
    let canned: BTreeMap<&str, &XacmlRequestDoc> =
        loaded.canned.iter().map(|(n, d)| (n.as_str(), d)).collect();
    let core = [
        ("01_joan_five_years", Permit),
        ("02_joan_two_years", Deny),
        ("03_joan_years_unknown", Indeterminate),
        ("04_unregistered_subject", NotApplicable),
    ];
    for (name, want) in core {
        let req = enrich(dep, canned.get(name).ok_or(format!("missing {name}"))?);
        let d = decide(&dep.store, &req);
        let o = oracle_decide(&dep.store, &req);
        ensure(d.value == want, || format!("{name}: decide {} want {want}", d.value))?;
        ensure(agrees(&d, &o), || format!("{name}: oracle says {}", o.value))?;
    }
    // condition-driven examples: the decision follows the condition's truth value
    let conditional = [
        ("05_email_consent_given", "Consent_email", Truth::True),
        ("06_email_consent_refused", "Consent_email", Truth::False),
        ("07_research_age_62", "Research_partners", Truth::True),
        ("08_research_age_40", "Research_partners", Truth::False),
    ];
    for (name, rule_name, truth) in conditional {
        let req = enrich(dep, canned.get(name).ok_or(format!("missing {name}"))?);
        let rule = dep.store.rules().iter().find(|r| r.name == rule_name).unwrap();
        let got_truth = evaluate_condition(&rule.condition, &req.context).map_err(|e| e.to_string())?;
        ensure(got_truth == truth, || format!("{name}: condition is {got_truth:?}"))?;
        let want = if truth == Truth::True { Permit } else { Deny };
        let d = decide(&dep.store, &req);
        let o = oracle_decide(&dep.store, &req);
        ensure(
            d.value == want && d.matched_rule.as_deref() == Some(rule_name),
            || format!("{name}: decide {} via {:?}", d.value, d.matched_rule),
        )?;
        ensure(agrees(&d, &o), || format!("{name}: oracle says {}", o.value))?;
    }
    Ok("8 scenarios decided as expected and agree with the oracle".into())
}

fn differential() -> Check {
    const N: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5ac);
    for i in 0..N {
        let store = random_store(&mut rng, 12, 8);
        let req = random_request(&mut rng, &store);
        let d = decide(&store, &req);
        let o = oracle_decide(&store, &req);
        ensure(agrees(&d, &o), || {
            format!("instance {i}: decide {} ({:?}) oracle {} ({:?})", d.value, d.matched_rule, o.value, o.matched_rule)
        })?;
    }
    Ok(format!("{N}/{N} random instances agree"))
}

fn subsumption_oracle() -> Check {
    const DAGS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0xda6);
    let mut pairs = 0;
    for i in 0..DAGS {
        let kind = OntologyKind::ALL[i % 4];
        let doc = random_dag(&mut rng, kind, 12);
        let graph = OntologyGraph::load(&doc).map_err(|e| e.to_string())?;
        let ids: Vec<&String> = doc.nodes.iter().map(|(id, _)| id).collect();
        let n = ids.len();
        let index = |s: &String| ids.iter().position(|x| *x == s).unwrap();
        // reach[a][b]: b is reachable from a along is-a edges (or a == b)
        let mut reach = vec![vec![false; n]; n];
        for (a, row) in reach.iter_mut().enumerate() {
            row[a] = true;
        }
        for (child, parent) in &doc.isa {
            reach[index(child)][index(parent)] = true;
        }
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if reach[a][k] && reach[k][b] {
                        reach[a][b] = true;
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let got = graph.subsumes(ids[b], ids[a]).map_err(|e| e.to_string())?;
                ensure(got == reach[a][b], || {
                    format!("dag {i}: subsumes({}, {}) = {got}", ids[b], ids[a])
                })?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{DAGS} DAGs, {pairs} ordered pairs agree"))
}

fn invariant_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a7);
    let mut crashes = 0;
    for i in 0..1000 {
        let store = random_store(&mut rng, 12, 8);
        let req = random_request(&mut rng, &store);
        let run = catch_unwind(AssertUnwindSafe(|| {
            invariants::determinism(&store, &req)?;
            let _ = oracle_decide(&store, &req);
            let _ = explain(&decide(&store, &req));
            Ok::<(), String>(())
        }));
        match run {
            Ok(r) => r.map_err(|e| format!("fuzz {i}: {e}"))?,
            Err(_) => crashes += 1,
        }
    }
    ensure(crashes == 0, || format!("{crashes} crashes in the fuzz run"))?;

    const N: usize = 300;
    for i in 0..N {
        let store = random_store(&mut rng, 12, 8);
        let req = random_request(&mut rng, &store);
        invariants::role_monotonicity(&store, &req).map_err(|e| format!("monotonicity {i}: {e}"))?;
        invariants::masking_invariance(&store, &req).map_err(|e| format!("masking {i}: {e}"))?;
        invariants::equivalence_soundness(&store, &req).map_err(|e| format!("equivalence {i}: {e}"))?;
    }
    Ok(format!(
        "1000 fuzz requests without crash or drift; monotonicity, masking and equivalence hold on {N} stores"
    ))
}

fn headers_for(req: reqwest::RequestBuilder, doc: &XacmlRequestDoc) -> reqwest::RequestBuilder {
    let mut req = req
        .header("X-Subject-Id", &doc.subject_id)
        .header("X-Action", &doc.action_id)
        .header("X-Purpose", &doc.purpose);
    if !doc.subject_concepts.is_empty() {
        req = req.header("X-Subject-Roles", doc.subject_concepts.join(","));
    }
    for a in &doc.subject_attributes {
        let head = match &a.value {
            Some(v) => format!("{}={}; type={}", a.name, v.lexical(), v.kind()),
            None => a.name.clone(),
        };
        req = req.header("X-Subject-Attribute", format!("{head}; issuer={}", a.soa_id));
    }
    for (k, v) in &doc.environment {
        req = req.header("X-Context", format!("{k}={}; type={}", v.lexical(), v.kind()));
    }
    req
}

async fn end_to_end() -> Check {
    let stub = Stub::start().await;
    let gw = Running::start(&stub.url()).await;
    let loaded = load_ehealth();
    let dep = &loaded.deployment;
    let mut docs: Vec<XacmlRequestDoc> = loaded.canned.iter().map(|(_, d)| d.clone()).collect();
    for (subject, resource, action, purpose) in [
        ("nina", "jen_record", "read", "treat"),
        ("joan", "jen_record", "write", "treat"),
        ("ana", "jen_record", "read", "treat"),
        ("harrison", "bob_record", "query", "surgery"),
        ("joan", "jen_email", "read", "general"),
    ] {
        docs.push(XacmlRequestDoc {
            subject_id: subject.into(),
            resource_id: resource.into(),
            action_id: action.into(),
            purpose: purpose.into(),
            ..Default::default()
        });
    }
    let secrets: Vec<String> = dep.store.rules().iter().map(|r| r.name.clone()).collect();
    let mut permits = 0;
    for doc in &docs {
        let expected = oracle_decide(&dep.store, &enrich(dep, doc));
        let path = dep
            .kb
            .object(&doc.resource_id)
            .and_then(|o| o.path.clone())
            .unwrap_or_else(|| format!("/{}", doc.resource_id));
        let resp = headers_for(gw.get(&format!("/proxy{path}")), doc)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().await.map_err(|e| e.to_string())?;
        let who = format!("{} {} {}", doc.subject_id, doc.action_id, doc.resource_id);
        if expected.value == DecisionValue::Permit {
            permits += 1;
            ensure(status == 200 && body == format!("upstream:{path}"), || {
                format!("{who}: permit answered {status} {body:?}")
            })?;
        } else {
            ensure(status == 403, || format!("{who}: {} answered {status}", expected.value))?;
            ensure(!body.starts_with("upstream:"), || format!("{who}: upstream content leaked"))?;
            if expected.masked {
                ensure(body == "access denied", || format!("{who}: masked body {body:?}"))?;
                for s in &secrets {
                    ensure(!body.contains(s.as_str()), || format!("{who}: body names {s}"))?;
                }
            }
        }
    }
    let audit = gw.audit();
    ensure(audit.len() == docs.len(), || {
        format!("{} audit records for {} requests", audit.len(), docs.len())
    })?;
    let audited_permits = audit.iter().filter(|r| r["decision"] == "Permit").count();
    ensure(audited_permits == stub.hits() && stub.hits() == permits, || {
        format!("audit permits {audited_permits}, upstream hits {}, expected {permits}", stub.hits())
    })?;
    for r in &audit {
        if r["masked"] == true {
            ensure(r["matched_rule"].is_null(), || format!("masked record cites a rule: {r}"))?;
        }
    }
    Ok(format!(
        "{} requests, {permits} proxied, one audit record each",
        docs.len()
    ))
}

async fn snapshot_isolation() -> Check {
    const LOADS: usize = 100;
    const DECISIONS: usize = 1000;
    let gw = Arc::new(Running::start("http://127.0.0.1:9").await);
    let permit_policy = fs::read_to_string(fixtures().join("ehealth/policy.xml")).unwrap();
    let deny_policy = permit_policy.replace(
        r#"attribute="years_of_service" reference="3""#,
        r#"attribute="years_of_service" reference="6""#,
    );
    assert_ne!(permit_policy, deny_policy);
    let request = fs::read_to_string(fixtures().join("ehealth/requests/01_joan_five_years.xml")).unwrap();

    // load i activates version i + 2: even versions carry the stricter policy
    let loader = {
        let gw = gw.clone();
        tokio::spawn(async move {
            for i in 0..LOADS {
                let body = if i % 2 == 0 { deny_policy.clone() } else { permit_policy.clone() };
                let resp = gw.admin("policy", body).await;
                if resp.status() != 200 {
                    return Err(format!("load {i} answered {}", resp.status()));
                }
                tokio::task::yield_now().await;
            }
            Ok(())
        })
    };
    const WORKERS: usize = 20;
    let workers: Vec<_> = (0..WORKERS)
        .map(|_| {
            let gw = gw.clone();
            let request = request.clone();
            tokio::spawn(async move {
                let mut out = Vec::new();
                for _ in 0..DECISIONS / WORKERS {
                    let resp = gw.decide_xml(request.clone()).await;
                    let versions: Vec<String> = resp
                        .headers()
                        .get_all("x-policy-version")
                        .iter()
                        .map(|v| v.to_str().unwrap_or_default().to_string())
                        .collect();
                    let body = resp.text().await.map_err(|e| e.to_string())?;
                    let decision = parse_xacml_response(&body).map_err(|e| e.to_string())?.decision;
                    out.push((versions, decision));
                }
                Ok::<_, String>(out)
            })
        })
        .collect();
    loader.await.map_err(|e| e.to_string())??;
    let mut seen = std::collections::BTreeSet::new();
    let mut checked = 0;
    for w in workers {
        for (versions, decision) in w.await.map_err(|e| e.to_string())?? {
            ensure(versions.len() == 1, || format!("decision cites versions {versions:?}"))?;
            let v: u64 = versions[0].parse().map_err(|_| format!("bad version {:?}", versions[0]))?;
            let want = if v % 2 == 1 { DecisionValue::Permit } else { DecisionValue::Deny };
            ensure(decision == want, || format!("version {v} decided {decision}, expected {want}"))?;
            seen.insert(v);
            checked += 1;
        }
    }
    ensure(checked == DECISIONS, || format!("{checked} decisions returned"))?;
    let last = gw.gateway.snapshot().version();
    ensure(last == LOADS as u64 + 1, || format!("final version {last}"))?;
    Ok(format!(
        "{DECISIONS} decisions over {} distinct versions, each consistent with exactly one",
        seen.len()
    ))
}

fn report(number: u32, title: &str, bound: Option<Duration>, started: Instant, result: Check) -> bool {
    let elapsed = started.elapsed();
    let timing = match bound {
        Some(b) => format!("{:.3}s, bound {}s", elapsed.as_secs_f64(), b.as_secs()),
        None => format!("{:.3}s", elapsed.as_secs_f64()),
    };
    let result = match (result, bound) {
        (Ok(_), Some(b)) if elapsed > b => Err("exceeded runtime bound".to_string()),
        (r, _) => r,
    };
    match &result {
        Ok(detail) => println!("PASS criterion {number} ({title}): {detail} [{timing}]"),
        Err(why) => println!("FAIL criterion {number} ({title}): {why} [{timing}]"),
    }
    result.is_ok()
}

fn timed(number: u32, title: &str, bound: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
    report(number, title, bound, started, result)
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let results = [
        timed(1, "golden fixtures", secs(1), golden_fidelity),
        timed(2, "scenario suite", secs(1), scenario_suite),
        timed(3, "differential equivalence", secs(30), differential),
        timed(4, "subsumption oracle", secs(10), subsumption_oracle),
        timed(5, "invariant suite", None, invariant_suite),
        timed(6, "end-to-end enforcement", secs(10), || rt.block_on(end_to_end())),
        timed(7, "snapshot isolation", None, || rt.block_on(snapshot_isolation())),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
