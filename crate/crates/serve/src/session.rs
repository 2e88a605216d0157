use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use threebox::lg_stats::{self, ContextSummary, LgReport, SamplingPolicy};
use threebox::protocol::{play_round_in_context, settle};
use threebox::{BobOutcome, Context, ContextSchedule, EngineKind, GameEngine, RoundRecord, SessionConfig};

use crate::commit;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    AwaitingContext,
    AwaitingReveal,
    Settled,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServeError {
    UnknownSession,
    WrongPhase { expected: Phase, actual: Phase },
    InvalidConfig(String),
    InvalidRequest(String),
    Internal(String),
}

impl ServeError {
    pub fn code(&self) -> &'static str {
        match self {
            ServeError::UnknownSession => "unknown_session",
            ServeError::WrongPhase { .. } => "wrong_phase",
            ServeError::InvalidConfig(_) => "invalid_config",
            ServeError::InvalidRequest(_) => "invalid_request",
            ServeError::Internal(_) => "internal",
        }
    }
}

impl fmt::Display for ServeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServeError::UnknownSession => write!(f, "no such session (it may have expired)"),
            ServeError::WrongPhase { expected, actual } => {
                write!(f, "operation needs phase {expected:?} but the session is in {actual:?}")
            }
            ServeError::InvalidConfig(m) | ServeError::InvalidRequest(m) | ServeError::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ServeError {}

impl From<threebox::Error> for ServeError {
    fn from(e: threebox::Error) -> Self {
        match e {
            threebox::Error::InvalidConfig(m) => ServeError::InvalidConfig(m),
            threebox::Error::InvalidContext(_) => ServeError::InvalidRequest(e.to_string()),
            other => ServeError::Internal(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreatedView {
    pub session_id: String,
    pub phase: Phase,
    pub round_id: u64,
    pub rounds_total: u64,
    pub engine: EngineKind,
    pub odds: f64,
}

/// What Bob learns after choosing a context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmitView {
    pub phase: Phase,
    pub round_id: u64,
    pub context: Context,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bob_outcome: Option<BobOutcome>,
    pub commitment_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealView {
    /// Phase after this settlement.
    pub phase: Phase,
    pub round_id: u64,
    pub alice_m3: bool,
    pub alice_bets: bool,
    pub alice_wins: Option<bool>,
    /// Change in Alice's ledger.
    pub payoff_delta: f64,
    /// Alice's running total, in stakes.
    pub ledger: f64,
    pub salt: String,
    /// The committed serialization; `commitment_hash = sha256(salt ‖ record_json)`.
    pub record_json: String,
    pub record: RoundRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportView {
    pub phase: Phase,
    pub round_id: u64,
    pub rounds_played: u64,
    pub rounds_total: u64,
    pub ledger: f64,
    pub contexts: Vec<ContextSummary>,
    /// `null` until both contexts have an Alice-true round.
    pub report: Option<LgReport>,
    pub history: Vec<RoundRecord>,
}

struct Pending {
    record: RoundRecord,
    canonical: String,
    salt: String,
    payoff: f64,
}

pub struct Session {
    config: SessionConfig,
    engine: GameEngine,
    seed: u64,
    phase: Phase,
    round_id: u64,
    ledger: f64,
    history: Vec<RoundRecord>,
    pending: Option<Pending>,
    last_active: Instant,
}

impl Session {
    fn new(config: SessionConfig, seed: u64) -> Result<Self, ServeError> {
        config.validate()?;
        if config.context_schedule != ContextSchedule::External {
            return Err(ServeError::InvalidConfig("interactive sessions need context_schedule \"external\"".into()));
        }
        Ok(Self {
            engine: GameEngine::from_config(&config)?,
            config,
            seed,
            phase: Phase::AwaitingContext,
            round_id: 1,
            ledger: 0.0,
            history: Vec::new(),
            pending: None,
            last_active: Instant::now(),
        })
    }

    fn expect(&self, phase: Phase) -> Result<(), ServeError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(ServeError::WrongPhase { expected: phase, actual: self.phase })
        }
    }

    fn submit(&mut self, context: Context) -> Result<SubmitView, ServeError> {
        self.expect(Phase::AwaitingContext)?;
        let record = play_round_in_context(&self.engine, self.seed, self.round_id, context)?;
        let payoff = settle(&record, self.config.odds)?;
        let canonical = commit::canonical_record(&record);
        let salt = commit::new_salt();
        let view = SubmitView {
            phase: Phase::AwaitingReveal,
            round_id: self.round_id,
            context,
            bob_outcome: record.bob_outcome,
            commitment_hash: commit::commitment_hash(&salt, &canonical),
        };
        self.pending = Some(Pending { record, canonical, salt, payoff });
        self.phase = Phase::AwaitingReveal;
        Ok(view)
    }

    fn reveal(&mut self) -> Result<RevealView, ServeError> {
        self.expect(Phase::AwaitingReveal)?;
        let p = self.pending.take().ok_or_else(|| ServeError::Internal("missing committed round".into()))?;
        self.ledger += p.payoff;
        let round_id = self.round_id;
        self.history.push(p.record.clone());
        self.phase = if round_id >= self.config.rounds {
            Phase::Settled
        } else {
            self.round_id += 1;
            Phase::AwaitingContext
        };
        Ok(RevealView {
            phase: self.phase,
            round_id,
            alice_m3: p.record.alice_m3,
            alice_bets: p.record.alice_bets,
            alice_wins: p.record.alice_wins,
            payoff_delta: p.payoff,
            ledger: self.ledger,
            salt: p.salt,
            record_json: p.canonical,
            record: p.record,
        })
    }

    fn report(&self) -> ReportView {
        ReportView {
            phase: self.phase,
            round_id: self.round_id,
            rounds_played: self.history.len() as u64,
            rounds_total: self.config.rounds,
            ledger: self.ledger,
            contexts: lg_stats::context_summaries(&self.history),
            report: LgReport::from_records(&self.history, SamplingPolicy::FairSampling).ok(),
            history: self.history.clone(),
        }
    }
}

/// All live sessions. Each session sits behind its own lock, so calls on one
/// session are serialized while different sessions proceed independently.
pub struct SessionManager {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    idle_timeout: Duration,
    /// Use the config seed instead of a secret per-session seed.
    replayable: bool,
}

impl Default for SessionManager {
    fn default() -> Self {
        Self::new(DEFAULT_IDLE_TIMEOUT)
    }
}

impl SessionManager {
    pub fn new(idle_timeout: Duration) -> Self {
        Self { sessions: Mutex::new(HashMap::new()), idle_timeout, replayable: false }
    }

    /// Sessions draw their randomness from the config seed, so whoever knows the
    /// config can predict Alice. For tests and demonstrations.
    pub fn replayable(mut self) -> Self {
        self.replayable = true;
        self
    }

    pub fn idle_timeout(&self) -> Duration {
        self.idle_timeout
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session table poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create_session(&self, config: SessionConfig) -> Result<CreatedView, ServeError> {
        let seed = if self.replayable { config.seed } else { rand::random() };
        let session = Session::new(config, seed)?;
        let view_of = |id: String| CreatedView {
            session_id: id,
            phase: session.phase,
            round_id: session.round_id,
            rounds_total: session.config.rounds,
            engine: session.config.engine,
            odds: session.config.odds,
        };
        let mut table = self.sessions.lock().expect("session table poisoned");
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !table.contains_key(&id) {
                break id;
            }
        };
        let view = view_of(id.clone());
        table.insert(id.clone(), Arc::new(Mutex::new(session)));
        log::info!("created session {id}");
        Ok(view)
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn sweep(&self) -> usize {
        let mut table = self.sessions.lock().expect("session table poisoned");
        let before = table.len();
        let timeout = self.idle_timeout;
        table.retain(|_, s| s.lock().map(|s| s.last_active.elapsed() <= timeout).unwrap_or(false));
        before - table.len()
    }

    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T, ServeError>,
    ) -> Result<T, ServeError> {
        let handle = {
            let mut table = self.sessions.lock().expect("session table poisoned");
            let handle = table.get(id).cloned().ok_or(ServeError::UnknownSession)?;
            let expired = handle.lock().map(|s| s.last_active.elapsed() > self.idle_timeout).unwrap_or(true);
            if expired {
                table.remove(id);
                return Err(ServeError::UnknownSession);
            }
            handle
        };
        let mut session = handle.lock().map_err(|_| ServeError::Internal("session lock poisoned".into()))?;
        session.last_active = Instant::now();
        f(&mut session)
    }

    pub fn submit_context(&self, id: &str, context: Context) -> Result<SubmitView, ServeError> {
        self.with_session(id, |s| s.submit(context))
    }

    pub fn reveal_and_settle(&self, id: &str) -> Result<RevealView, ServeError> {
        self.with_session(id, |s| s.reveal())
    }

    pub fn session_report(&self, id: &str) -> Result<ReportView, ServeError> {
        self.with_session(id, |s| Ok(s.report()))
    }
}
