//! Engine-versus-oracle comparison over canned and seeded random requests.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::Deployment;
use crate::gen::bundle_request;
use crate::pdp::{agrees, oracle_decide, AccessRequest, Decision, PolicyStore};

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub label: String,
    pub request: AccessRequest,
    pub engine: Decision,
    pub oracle: Decision,
}

#[derive(Debug, Clone)]
pub struct DiffReport {
    pub seed: u64,
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn describe(req: &AccessRequest) -> String {
    let join = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
    let ctx: Vec<String> = req.context.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!(
        "subject={} [{}] object={} [{}] action={} purpose={} context{{{}}}",
        req.subject_id,
        join(&req.subject_concepts),
        req.object_id,
        join(&req.object_concepts),
        req.action,
        req.purpose,
        ctx.join(",")
    )
}

fn rule(d: &Decision) -> &str {
    d.matched_rule.as_deref().unwrap_or("-")
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "seed {}: {} requests checked, {} mismatches",
            self.seed,
            self.checked,
            self.mismatches.len()
        )?;
        for m in &self.mismatches {
            writeln!(
                f,
                "MISMATCH {}: {} | decide={} ({}) oracle={} ({})",
                m.label,
                describe(&m.request),
                m.engine.value,
                rule(&m.engine),
                m.oracle.value,
                rule(&m.oracle)
            )?;
        }
        Ok(())
    }
}

/// Runs `engine` and the oracle on every canned request and then on `n`
/// requests drawn from the deployment with `seed`.
pub fn run_differential(
    deployment: &Deployment,
    canned: &[(String, AccessRequest)],
    n: usize,
    seed: u64,
    engine: impl Fn(&PolicyStore, &AccessRequest) -> Decision,
) -> DiffReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..n).map(|i| (format!("random#{i}"), bundle_request(&mut rng, deployment)));
    let store = &deployment.store;
    let mut report = DiffReport {
        seed,
        checked: 0,
        mismatches: Vec::new(),
    };
    for (label, request) in canned.iter().cloned().chain(random) {
        report.checked += 1;
        let e = engine(store, &request);
        let o = oracle_decide(store, &request);
        if !agrees(&e, &o) {
            report.mismatches.push(Mismatch {
                label,
                request,
                engine: e,
                oracle: o,
            });
        }
    }
    report
}
