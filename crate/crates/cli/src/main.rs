//! `sacpdp`: validate bundles, decide requests offline, run the
//! differential oracle and launch the gateway.
//!
//! Exit codes:
//!
//! | code | meaning                                               |
//! |------|-------------------------------------------------------|
//! | 0    | success; Permit; no oracle mismatches                 |
//! | 1    | validation findings; oracle mismatches                |
//! | 2    | I/O, parse, configuration or usage failure            |
//! | 3    | Deny                                                  |
//! | 4    | NotApplicable                                         |
//! | 5    | Indeterminate                                         |

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use sacpdp_core::diff::run_differential;
use sacpdp_core::parser::parse_xacml_request;
use sacpdp_core::{
    decide_with, explain, Bundle, BundleError, CombiningOrder, DecisionValue, LoadedBundle,
};
use sacpdp_service::{build_gateway, config, serve, GatewayConfig};

#[derive(Parser)]
#[command(name = "sacpdp", version, about = "Semantic access control decision tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a bundle and report every validation finding.
    Validate { bundle: PathBuf },
    /// Decide one request file against a bundle.
    Decide {
        bundle: PathBuf,
        request: PathBuf,
        /// Print the decision trace (masked decisions print "access denied").
        #[arg(long)]
        explain: bool,
    },
    /// Compare the engine with the reference oracle on the bundle's canned
    /// requests plus random ones.
    Oracle {
        bundle: PathBuf,
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Combining order handed to the engine under test.
        #[arg(long, hide = true, value_parser = parse_order)]
        combining: Option<CombiningOrder>,
    },
    /// Run the enforcement gateway. `SACPDP_CONFIG` overrides the path.
    Serve { config: Option<PathBuf> },
}

fn parse_order(s: &str) -> Result<CombiningOrder, String> {
    CombiningOrder::parse(s).ok_or_else(|| format!("not a combining order: {s}"))
}

/// A failed command: what to print on stderr and the exit code.
struct Failure(u8, String);

impl From<BundleError> for Failure {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Invalid(report) => Failure(1, report.to_string()),
            other => Failure(2, other.to_string()),
        }
    }
}

fn load(bundle: &Path) -> Result<LoadedBundle, Failure> {
    Ok(Bundle::open(bundle)?.load()?)
}

/// Loads a bundle for evaluation, where an invalid bundle is a usage error.
fn load_for_use(bundle: &Path) -> Result<LoadedBundle, Failure> {
    load(bundle).map_err(|Failure(_, msg)| Failure(2, msg))
}

fn validate(bundle: &Path) -> Result<u8, Failure> {
    match load(bundle) {
        Ok(loaded) => {
            println!("ok: {} rules", loaded.deployment.store.rules().len());
            Ok(0)
        }
        Err(Failure(1, report)) => {
            println!("{report}");
            Ok(1)
        }
        Err(f) => Err(f),
    }
}

fn exit_code(v: DecisionValue) -> u8 {
    match v {
        DecisionValue::Permit => 0,
        DecisionValue::Deny => 3,
        DecisionValue::NotApplicable => 4,
        DecisionValue::Indeterminate => 5,
    }
}

fn decide_cmd(bundle: &Path, request: &Path, with_explanation: bool) -> Result<u8, Failure> {
    let loaded = load_for_use(bundle)?;
    let text = fs::read_to_string(request)
        .map_err(|e| Failure(2, format!("cannot read {}: {e}", request.display())))?;
    let doc = parse_xacml_request(&text)
        .map_err(|e| Failure(2, format!("{}: {} {e}", request.display(), e.code())))?;
    let dep = &loaded.deployment;
    let enriched = dep.kb.enrich(&doc, dep.store.trusted_soas());
    for note in &enriched.notes {
        eprintln!("note: {note}");
    }
    let d = decide_with(&dep.store, &enriched.request, CombiningOrder::default());
    println!("{}", d.value);
    if with_explanation {
        let text = explain(&d);
        let body = if d.masked {
            text.as_str()
        } else {
            text.split_once('\n').map_or("", |(_, rest)| rest)
        };
        if !body.is_empty() {
            println!("{body}");
        }
    }
    Ok(exit_code(d.value))
}

fn oracle_cmd(
    bundle: &Path,
    n: usize,
    seed: u64,
    order: Option<CombiningOrder>,
) -> Result<u8, Failure> {
    let loaded = load_for_use(bundle)?;
    let dep = &loaded.deployment;
    let canned: Vec<_> = loaded
        .canned
        .iter()
        .map(|(name, doc)| (name.clone(), dep.kb.enrich(doc, dep.store.trusted_soas()).request))
        .collect();
    let order = order.unwrap_or_default();
    let report = run_differential(dep, &canned, n, seed, |s, r| decide_with(s, r, order));
    println!("{}", report.to_string().trim_end());
    Ok(if report.passed() { 0 } else { 1 })
}

fn serve_cmd(path: Option<PathBuf>) -> Result<u8, Failure> {
    let path = config::resolve_path(path).ok_or_else(|| {
        Failure(2, format!("no configuration given (argument or {})", config::CONFIG_ENV))
    })?;
    let cfg = GatewayConfig::read(&path).map_err(|e| Failure(2, format!("{}: {e}", path.display())))?;
    let gateway = Arc::new(build_gateway(&cfg).map_err(|e| Failure(2, e.to_string()))?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(2, e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(cfg.listen)
            .await
            .map_err(|e| Failure(2, format!("cannot listen on {}: {e}", cfg.listen)))?;
        let addr = listener.local_addr().map_err(|e| Failure(2, e.to_string()))?;
        tracing::info!("listening on {addr}, upstream {}", cfg.upstream);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("interrupt received, shutting down");
        };
        serve(listener, gateway, shutdown)
            .await
            .map_err(|e| Failure(2, e.to_string()))?;
        Ok(0)
    })
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { bundle } => validate(&bundle),
        Command::Decide { bundle, request, explain } => decide_cmd(&bundle, &request, explain),
        Command::Oracle { bundle, random, seed, combining } => oracle_cmd(&bundle, random, seed, combining),
        Command::Serve { config } => serve_cmd(config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
