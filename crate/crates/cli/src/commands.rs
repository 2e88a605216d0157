use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use threebox::lg_stats::{self, ContextSummary, LgReport, SamplingPolicy};
use threebox::mr_search::{self, FitTargets, ScanSummary};
use threebox::protocol::{self, settle};
use threebox::{records, ContextSchedule, Error, GameEngine, Result, SessionConfig};
use threebox_serve::SessionManager;

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! sayln {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        Error::InsufficientData(_) => 4,
        _ => 1,
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<SessionConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = SessionConfig::from_json(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    config: &'a SessionConfig,
    rounds: u64,
    bets: u64,
    bet_rate: f64,
    alice_payoff: f64,
    contexts: Vec<ContextSummary>,
    lg_report: Option<LgReport>,
    lg_error: Option<String>,
}

pub fn simulate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    policy: SamplingPolicy,
    threads: Option<usize>,
) -> Result<()> {
    let cfg = load_config(config, seed)?;
    if cfg.context_schedule == ContextSchedule::External {
        return Err(Error::InvalidConfig("simulate needs a context schedule other than \"external\"".into()));
    }
    log::info!("simulating {} rounds with seed {}", cfg.rounds, cfg.seed);
    let recs = protocol::simulate(&cfg, threads)?;
    fs::create_dir_all(out)?;
    records::write_records_file(&out.join("records.csv"), &recs)?;

    let bets = recs.iter().filter(|r| r.alice_bets).count() as u64;
    let alice_payoff = recs.iter().map(|r| settle(r, cfg.odds)).sum::<Result<f64>>()?;
    let (lg_report, lg_error) = match LgReport::from_records(&recs, policy) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SimulationSummary {
        config: &cfg,
        rounds: recs.len() as u64,
        bets,
        bet_rate: bets as f64 / recs.len() as f64,
        alice_payoff,
        contexts: lg_stats::context_summaries(&recs),
        lg_report,
        lg_error,
    };
    write_json(&out.join("summary.json"), &summary)?;

    sayln!(
        "{} rounds, Alice bet on {} ({}), payoff to Alice {} stakes",
        summary.rounds,
        bets,
        lg_stats::sig6(summary.bet_rate),
        lg_stats::sig6(alice_payoff)
    );
    match &summary.lg_report {
        Some(r) => say!("{r}"),
        None => sayln!("no Leggett-Garg estimate: {}", summary.lg_error.as_deref().unwrap_or("")),
    }
    sayln!("wrote {} and {}", out.join("records.csv").display(), out.join("summary.json").display());
    Ok(())
}

pub fn verify(config: &Path, out: &Path, seed: Option<u64>, pairs: u64) -> Result<()> {
    let cfg = load_config(config, seed)?;
    if pairs == 0 {
        return Err(Error::InvalidConfig("--pairs must be at least 1".into()));
    }
    let engine = GameEngine::from_config(&cfg)?;
    let tables = protocol::run_verification(&engine, pairs, cfg.seed)?;
    let report = lg_stats::verification_report(&tables);
    fs::create_dir_all(out)?;
    #[derive(Serialize)]
    struct Verification<'a> {
        tables: &'a protocol::VerificationTables,
        report: &'a lg_stats::VerificationReport,
    }
    write_json(&out.join("verification.json"), &Verification { tables: &tables, report: &report })?;
    say!("{report}");
    sayln!("wrote {}", out.join("verification.json").display());
    Ok(())
}

pub fn analyze(path: &Path, policy: SamplingPolicy, out: Option<&Path>) -> Result<()> {
    let recs = records::read_records_file(path)?;
    let report = LgReport::from_records(&recs, policy)?;
    say!("{report}");
    if let Some(out) = out {
        write_json(out, &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanOutput<'a> {
    deterministic_scan: &'a ScanSummary,
    fit: &'a mr_search::FitResult,
}

pub fn mrscan(targets: Option<&Path>, budget: u64, out: &Path, seed: u64, lock: bool) -> Result<()> {
    let targets = match targets {
        Some(p) => FitTargets::from_json(&fs::read_to_string(p)?)?,
        None => FitTargets::ideal_quantum(),
    };
    let scan = mr_search::scan_deterministic();
    let fit = mr_search::best_noncontextual_fit(&targets, budget, seed, lock)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("fit.json"), &ScanOutput { deterministic_scan: &scan, fit: &fit })?;
    fs::write(out.join("frontier.csv"), fit.frontier_csv())?;

    let s = lg_stats::sig6;
    sayln!(
        "deterministic strategies: {} scanned, max P_M1(B|A) + P_M2(B|A) = {} (non-disturbing {}), so K >= {}",
        scan.strategies,
        s(scan.max_conditional_sum),
        s(scan.max_conditional_sum_non_disturbing),
        s(scan.k_min)
    );
    let (k_lo, k_hi) = mr_search::k_bounds();
    sayln!("macrorealist K range: [{}, {}]", s(k_lo), s(k_hi));
    sayln!(
        "best fit after {} evaluations ({} restarts{}): fit error {}, disturbance {}",
        fit.evaluations,
        fit.restarts,
        if lock { ", non-disturbing" } else { "" },
        s(fit.fit_error),
        s(fit.disturbance)
    );
    sayln!("  observable        target     achieved");
    let names = ["P(A | M1)", "P(A | M2)", "P(A | none)", "P(B | A, M1)", "P(B | A, M2)"];
    for ((name, t), a) in names.iter().zip(fit.targets.to_array()).zip(fit.achieved.to_array()) {
        sayln!("  {name:<16}  {:<9}  {}", s(t), s(a));
    }
    sayln!("frontier: {} points", fit.frontier.len());
    sayln!("wrote {} and {}", out.join("fit.json").display(), out.join("frontier.csv").display());
    Ok(())
}

pub fn serve(config: Option<&Path>, bind: SocketAddr, idle_timeout: u64) -> Result<()> {
    let default_config = match config {
        Some(p) => Some(load_config(p, None)?.with_schedule(ContextSchedule::External)),
        None => None,
    };
    let manager = Arc::new(SessionManager::new(Duration::from_secs(idle_timeout)));
    let runtime = tokio::runtime::Runtime::new()?;
    sayln!("serving on http://{bind}");
    runtime.block_on(threebox_serve::serve(bind, manager, default_config))?;
    Ok(())
}
