//! HTTP surface of the gateway.
//!
//! Clients identify themselves with headers:
//!
//! ```text
//! X-Subject-Id: joan
//! X-Subject-Roles: expert, doctor
//! X-Subject-Attribute: years_of_service=5; issuer=hospital_ADMIN; type=int
//! X-Context: consent=given
//! X-Purpose: treat                 (or ?purpose=treat)
//! X-Action: read                   (otherwise derived from the method)
//! ```
//!
//! `X-Subject-Attribute` and `X-Context` may repeat.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderName, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{any, get, post, put};
use axum::Router;

use sacpdp_core::parser::{parse_xacml_request, serialize_xacml_response, XacmlRequestDoc};
use sacpdp_core::value::{Scalar, ScalarType};
use sacpdp_core::{decide, explain, to_response, AttributeDescriptor, Decision, DecisionValue};

use crate::audit::AuditRecord;
use crate::gateway::{AdminKind, Gateway};

pub const DECISION_HEADER: &str = "x-decision";
pub const VERSION_HEADER: &str = "x-policy-version";

const CLIENT_HEADERS: [&str; 6] = [
    "x-subject-id",
    "x-subject-roles",
    "x-subject-attribute",
    "x-context",
    "x-purpose",
    "x-action",
];

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/proxy/{*path}", any(proxy))
        .route("/pdp/decide", post(pdp_decide))
        .route("/admin/version", get(version))
        .route("/admin/{*kind}", put(admin_load))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(gateway)
}

fn text(status: StatusCode, body: impl Into<String>) -> Response {
    (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body.into()).into_response()
}

fn finish(gw: &Gateway, mut record: AuditRecord, started: Instant, response: Response) -> Response {
    record.status = response.status().as_u16();
    record.latency_us = started.elapsed().as_micros().try_into().unwrap_or(u64::MAX);
    gw.audit.append(&record);
    response
}

fn record_decision(record: &mut AuditRecord, d: &Decision) {
    record.decision = Some(d.value.as_str().to_string());
    record.masked = d.masked;
    record.matched_rule = if d.masked { None } else { d.matched_rule.clone() };
    record.store_version = d.store_version;
}

fn header_values<'a>(headers: &'a HeaderMap, name: &str) -> Result<Vec<&'a str>, String> {
    headers
        .get_all(name)
        .iter()
        .map(|v| v.to_str().map_err(|_| format!("header {name} is not valid text")))
        .collect()
}

fn one_header<'a>(headers: &'a HeaderMap, name: &str) -> Result<Option<&'a str>, String> {
    Ok(header_values(headers, name)?.first().map(|v| v.trim()))
}

/// Reads an integer, decimal or boolean where possible, text otherwise.
fn infer_scalar(raw: &str) -> Scalar {
    [ScalarType::Int, ScalarType::Decimal, ScalarType::Bool]
        .into_iter()
        .find_map(|k| Scalar::parse_as(k, raw).ok())
        .unwrap_or_else(|| Scalar::String(raw.to_string()))
}

fn typed_scalar(raw: &str, kind: Option<&str>) -> Result<Scalar, String> {
    match kind {
        None => Ok(infer_scalar(raw)),
        Some(k) => {
            let kind = ScalarType::parse(k).ok_or_else(|| format!("unknown type {k:?}"))?;
            Scalar::parse_as(kind, raw).map_err(|e| e.to_string())
        }
    }
}

/// `name[=value]; issuer=SOA[; type=int]`
fn parse_attribute(raw: &str) -> Result<AttributeDescriptor, String> {
    let mut parts = raw.split(';').map(str::trim);
    let head = parts.next().unwrap_or_default();
    let (name, value) = match head.split_once('=') {
        Some((n, v)) => (n.trim(), Some(v.trim())),
        None => (head, None),
    };
    if name.is_empty() {
        return Err(format!("attribute {raw:?} has no name"));
    }
    let (mut issuer, mut kind) = (None, None);
    for p in parts.filter(|p| !p.is_empty()) {
        match p.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
            Some(("issuer", v)) => issuer = Some(v),
            Some(("type", v)) => kind = Some(v),
            _ => return Err(format!("unrecognised attribute parameter {p:?}")),
        }
    }
    let issuer = issuer.ok_or_else(|| format!("attribute {name} has no issuer"))?;
    let mut attr = AttributeDescriptor::new(name, issuer);
    if let Some(v) = value {
        attr.value = Some(typed_scalar(v, kind)?);
    }
    Ok(attr)
}

/// `key=value[; type=int]`
fn parse_context(raw: &str) -> Result<(String, Scalar), String> {
    let (pair, kind) = match raw.split_once(';') {
        Some((pair, rest)) => match rest.trim().split_once('=') {
            Some(("type", k)) => (pair, Some(k.trim())),
            _ => return Err(format!("unrecognised context parameter {rest:?}")),
        },
        None => (raw, None),
    };
    let (k, v) = pair
        .split_once('=')
        .ok_or_else(|| format!("context entry {raw:?} is not key=value"))?;
    Ok((k.trim().to_string(), typed_scalar(v.trim(), kind)?))
}

fn method_action(method: &Method) -> &'static str {
    match *method {
        Method::POST => "write",
        Method::PUT | Method::PATCH => "update",
        Method::DELETE => "delete",
        _ => "read",
    }
}

fn client_request(
    method: &Method,
    uri: &Uri,
    headers: &HeaderMap,
    resource_id: String,
) -> Result<XacmlRequestDoc, String> {
    let subject_id = one_header(headers, "x-subject-id")?
        .filter(|s| !s.is_empty())
        .ok_or("missing X-Subject-Id header")?;
    let subject_concepts = header_values(headers, "x-subject-roles")?
        .iter()
        .flat_map(|v| v.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    let subject_attributes = header_values(headers, "x-subject-attribute")?
        .into_iter()
        .map(parse_attribute)
        .collect::<Result<_, _>>()?;
    let environment: BTreeMap<String, Scalar> = header_values(headers, "x-context")?
        .into_iter()
        .map(parse_context)
        .collect::<Result<_, _>>()?;
    let query = Query::<HashMap<String, String>>::try_from_uri(uri)
        .map_err(|e| format!("bad query string: {e}"))?;
    let purpose = match query.get("purpose") {
        Some(p) => p.as_str(),
        None => one_header(headers, "x-purpose")?.ok_or("missing purpose")?,
    };
    let action = match one_header(headers, "x-action")? {
        Some(a) => a.to_string(),
        None => method_action(method).to_string(),
    };
    Ok(XacmlRequestDoc {
        subject_id: subject_id.to_string(),
        subject_concepts,
        subject_attributes,
        resource_id,
        action_id: action,
        purpose: purpose.to_string(),
        environment,
        ..Default::default()
    })
}

async fn proxy(
    State(gw): State<Arc<Gateway>>,
    method: Method,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> Response {
    let started = Instant::now();
    let mut record = AuditRecord::new("proxy");
    let snapshot = gw.snapshot();
    record.store_version = snapshot.version();
    let path = uri.path().strip_prefix("/proxy").unwrap_or("/");
    let resource_id = snapshot
        .kb
        .object_for_path(path)
        .map_or_else(|| path.to_string(), |o| o.id.clone());
    record.object_id = Some(resource_id.clone());

    let doc = match client_request(&method, &uri, &headers, resource_id) {
        Ok(r) => r,
        Err(msg) => {
            record.notes.push(msg.clone());
            return finish(&gw, record, started, text(StatusCode::BAD_REQUEST, msg));
        }
    };
    record.subject_id = Some(doc.subject_id.clone());
    record.action = Some(doc.action_id.clone());
    record.purpose = Some(doc.purpose.clone());
    if !snapshot.store.purposes().contains(&doc.purpose) {
        let msg = format!("unknown purpose {:?}", doc.purpose);
        record.notes.push(msg.clone());
        return finish(&gw, record, started, text(StatusCode::BAD_REQUEST, msg));
    }

    let enriched = snapshot.kb.enrich(&doc, snapshot.store.trusted_soas());
    record.notes = enriched.notes;
    let d = decide(&snapshot.store, &enriched.request);
    record_decision(&mut record, &d);
    let version = HeaderValue::from(d.store_version);

    if d.value != DecisionValue::Permit {
        let mut resp = text(StatusCode::FORBIDDEN, explain(&d));
        resp.headers_mut()
            .insert(DECISION_HEADER, HeaderValue::from_static(d.value.as_str()));
        resp.headers_mut().insert(VERSION_HEADER, version);
        return finish(&gw, record, started, resp);
    }

    let mut target = format!("{}{}", gw.upstream, path);
    if let Some(q) = uri.query() {
        target.push('?');
        target.push_str(q);
    }
    let mut forward = headers.clone();
    for h in CLIENT_HEADERS {
        forward.remove(h);
    }
    forward.remove(header::HOST);
    forward.remove(header::CONTENT_LENGTH);
    let upstream = gw
        .client
        .request(method, &target)
        .headers(forward)
        .body(body)
        .send()
        .await;
    let resp = match upstream {
        Ok(up) => {
            let status = up.status();
            let mut relay = HeaderMap::new();
            for (k, v) in up.headers() {
                if k != header::TRANSFER_ENCODING && k != header::CONNECTION && k != header::CONTENT_LENGTH {
                    relay.append(k.clone(), v.clone());
                }
            }
            match up.bytes().await {
                Ok(bytes) => {
                    let mut resp = Response::new(Body::from(bytes));
                    *resp.status_mut() = status;
                    *resp.headers_mut() = relay;
                    resp
                }
                Err(e) => {
                    record.notes.push(format!("upstream body failed: {e}"));
                    text(StatusCode::BAD_GATEWAY, "upstream unreachable")
                }
            }
        }
        Err(e) => {
            record.notes.push(format!("upstream unreachable: {e}"));
            text(StatusCode::BAD_GATEWAY, "upstream unreachable")
        }
    };
    let mut resp = resp;
    resp.headers_mut()
        .insert(DECISION_HEADER, HeaderValue::from_static(d.value.as_str()));
    resp.headers_mut().insert(VERSION_HEADER, version);
    finish(&gw, record, started, resp)
}

async fn pdp_decide(State(gw): State<Arc<Gateway>>, body: Bytes) -> Response {
    let started = Instant::now();
    let mut record = AuditRecord::new("decide");
    let snapshot = gw.snapshot();
    record.store_version = snapshot.version();
    let parsed = std::str::from_utf8(&body)
        .map_err(|_| "MalformedXml: request body is not UTF-8".to_string())
        .and_then(|t| {
            parse_xacml_request(t).map_err(|e| format!("{} at {}: {e}", e.code(), e.position()))
        });
    let doc = match parsed {
        Ok(doc) => doc,
        Err(msg) => {
            record.notes.push(msg.clone());
            return finish(&gw, record, started, text(StatusCode::BAD_REQUEST, msg));
        }
    };
    record.subject_id = Some(doc.subject_id.clone());
    record.object_id = Some(doc.resource_id.clone());
    record.action = Some(doc.action_id.clone());
    record.purpose = Some(doc.purpose.clone());
    let enriched = snapshot.kb.enrich(&doc, snapshot.store.trusted_soas());
    record.notes = enriched.notes;
    let d = decide(&snapshot.store, &enriched.request);
    record_decision(&mut record, &d);
    let resp = (
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/xml")),
            (HeaderName::from_static(VERSION_HEADER), HeaderValue::from(d.store_version)),
        ],
        serialize_xacml_response(&to_response(&d)),
    )
        .into_response();
    finish(&gw, record, started, resp)
}

async fn admin_load(State(gw): State<Arc<Gateway>>, Path(kind): Path<String>, body: Bytes) -> Response {
    let started = Instant::now();
    let mut record = AuditRecord::new("admin");
    record.action = Some(format!("load {kind}"));
    let resp = match (AdminKind::from_path(&kind), std::str::from_utf8(&body)) {
        (None, _) => text(StatusCode::NOT_FOUND, format!("unknown admin document kind {kind:?}")),
        (Some(_), Err(_)) => text(StatusCode::UNPROCESSABLE_ENTITY, "document is not UTF-8"),
        (Some(k), Ok(doc)) => match gw.admin_load(k, doc).await {
            Ok(v) => {
                record.store_version = v;
                axum::Json(serde_json::json!({ "version": v })).into_response()
            }
            Err(report) => {
                record.notes = report.findings.iter().map(|f| f.code.to_string()).collect();
                text(StatusCode::UNPROCESSABLE_ENTITY, report.to_string())
            }
        },
    };
    if record.store_version == 0 {
        record.store_version = gw.snapshot().version();
    }
    finish(&gw, record, started, resp)
}

async fn version(State(gw): State<Arc<Gateway>>) -> Response {
    axum::Json(serde_json::json!({ "version": gw.snapshot().version() })).into_response()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribute_headers() {
        let a = parse_attribute("years_of_service=5; issuer=hospital_ADMIN; type=int").unwrap();
        assert_eq!(a.name, "years_of_service");
        assert_eq!(a.soa_id, "hospital_ADMIN");
        assert_eq!(a.value, Some(Scalar::Int(5)));
        let a = parse_attribute("doctor;issuer=hospital_ADMIN").unwrap();
        assert_eq!(a.value, None);
        assert_eq!(parse_attribute("x=given; issuer=s").unwrap().value, Some(Scalar::from("given")));
        assert!(parse_attribute("doctor").is_err());
        assert!(parse_attribute("n=abc; issuer=s; type=int").is_err());
        assert!(parse_attribute("n; issuer=s; colour=red").is_err());
    }

    #[test]
    fn context_headers() {
        assert_eq!(parse_context("consent=given").unwrap(), ("consent".into(), Scalar::from("given")));
        assert_eq!(parse_context("n = 7").unwrap().1, Scalar::Int(7));
        assert_eq!(parse_context("n=7; type=string").unwrap().1, Scalar::from("7"));
        assert!(parse_context("novalue").is_err());
    }

    #[test]
    fn request_from_headers() {
        let mut h = HeaderMap::new();
        h.insert("x-subject-id", HeaderValue::from_static("joan"));
        h.insert("x-subject-roles", HeaderValue::from_static("expert, doctor"));
        h.append("x-subject-attribute", HeaderValue::from_static("doctor; issuer=hospital_ADMIN"));
        h.append("x-subject-attribute", HeaderValue::from_static("years_of_service=5; issuer=hospital_ADMIN"));
        let uri: Uri = "/proxy/records/jen?purpose=treat".parse().unwrap();
        let r = client_request(&Method::GET, &uri, &h, "jen_record".into()).unwrap();
        assert_eq!(r.subject_concepts, ["expert", "doctor"]);
        assert_eq!(r.subject_attributes.len(), 2);
        assert_eq!(r.action_id, "read");
        assert_eq!(r.purpose, "treat");

        let uri: Uri = "/proxy/records/jen".parse().unwrap();
        assert_eq!(
            client_request(&Method::GET, &uri, &h, "x".into()).unwrap_err(),
            "missing purpose"
        );
        h.insert("x-purpose", HeaderValue::from_static("research"));
        h.insert("x-action", HeaderValue::from_static("query"));
        let r = client_request(&Method::DELETE, &uri, &h, "x".into()).unwrap();
        assert_eq!((r.purpose.as_str(), r.action_id.as_str()), ("research", "query"));
        h.remove("x-subject-id");
        assert!(client_request(&Method::GET, &uri, &h, "x".into()).is_err());
    }

    #[test]
    fn methods_map_to_actions() {
        assert_eq!(method_action(&Method::GET), "read");
        assert_eq!(method_action(&Method::POST), "write");
        assert_eq!(method_action(&Method::PATCH), "update");
        assert_eq!(method_action(&Method::DELETE), "delete");
    }
}
