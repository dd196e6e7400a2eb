//! Session bookkeeping: assignment, per-session serialization, expiry and
//! persistence of completed questionnaires.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use cvm_core::{Arm, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::definition::SurveyDefinition;
use crate::error::{Result, SurveyError};
use crate::flow::{Answer, Phase, Question, SessionState};
use crate::store::{export_csv, ResponseStore, StoredResponse};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    /// Drives session ids and arm assignment.
    pub seed: u64,
    pub idle_timeout: Duration,
    /// Bearer token required by the export endpoint; `None` disables export.
    pub export_token: Option<String>,
    /// Allowed browser origins; empty allows any.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            seed: 0,
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            export_token: None,
            cors_origins: Vec::new(),
        }
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> SystemTime;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> SystemTime {
        SystemTime::now()
    }
}

/// Hand-driven clock for tests and simulations.
#[derive(Debug)]
pub struct ManualClock(Mutex<SystemTime>);

impl ManualClock {
    pub fn new(start: SystemTime) -> Self {
        ManualClock(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        let mut t = lock(&self.0);
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> SystemTime {
        *lock(&self.0)
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn unix_secs(t: SystemTime) -> u64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// What the client sees for the current question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionPayload {
    pub session_id: String,
    /// Must be echoed back with the answer.
    pub seq: u64,
    #[serde(flatten)]
    pub question: Question,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub seq: u64,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerReceipt {
    pub session_id: String,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next: Option<QuestionPayload>,
    /// Set once the questionnaire is complete.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

struct Assigner {
    next_pair: usize,
    arms: ChaCha8Rng,
    ids: ChaCha8Rng,
}

struct LiveSession {
    state: SessionState,
    started: SystemTime,
    last_active: SystemTime,
}

pub struct SurveyService {
    definition: Arc<SurveyDefinition>,
    store: ResponseStore,
    config: ServiceConfig,
    clock: Arc<dyn Clock>,
    assigner: Mutex<Assigner>,
    sessions: Mutex<HashMap<String, Arc<Mutex<LiveSession>>>>,
}

impl SurveyService {
    pub fn new(definition: SurveyDefinition, store: ResponseStore, config: ServiceConfig) -> Self {
        Self::with_clock(definition, store, config, Arc::new(SystemClock))
    }

    pub fn with_clock(
        definition: SurveyDefinition,
        store: ResponseStore,
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let mut ids = ChaCha8Rng::seed_from_u64(config.seed);
        ids.set_stream(1);
        SurveyService {
            definition: Arc::new(definition),
            store,
            assigner: Mutex::new(Assigner {
                next_pair: 0,
                arms: ChaCha8Rng::seed_from_u64(config.seed),
                ids,
            }),
            config,
            clock,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn definition(&self) -> &SurveyDefinition {
        &self.definition
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &ResponseStore {
        &self.store
    }

    pub fn active_sessions(&self) -> usize {
        lock(&self.sessions).len()
    }

    /// Opens a session with the next round-robin bid pair and a seeded arm.
    pub fn create_session(&self) -> Result<QuestionPayload> {
        let (id, arm, bids) = {
            let mut a = lock(&self.assigner);
            let pairs = self.definition.design.pairs();
            let bids = pairs[a.next_pair % pairs.len()];
            a.next_pair += 1;
            let arm = if a.arms.random_bool(0.5) {
                Arm::UpperFirst
            } else {
                Arm::LowerFirst
            };
            let id = format!("{:032x}", a.ids.random::<u128>());
            (id, arm, bids)
        };
        let now = self.clock.now();
        let state = SessionState::new(arm, bids);
        let payload = self.payload(&id, &state)?;
        lock(&self.sessions).insert(
            id,
            Arc::new(Mutex::new(LiveSession {
                state,
                started: now,
                last_active: now,
            })),
        );
        Ok(payload)
    }

    fn payload(&self, id: &str, state: &SessionState) -> Result<QuestionPayload> {
        Ok(QuestionPayload {
            session_id: id.to_owned(),
            seq: state.seq,
            question: state.question(&self.definition)?,
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| SurveyError::UnknownSession(id.to_owned()))
    }

    fn expired(&self, s: &LiveSession, now: SystemTime) -> bool {
        now.duration_since(s.last_active).unwrap_or_default() > self.config.idle_timeout
    }

    fn expire(&self, id: &str) -> SurveyError {
        lock(&self.sessions).remove(id);
        SurveyError::Expired(id.to_owned())
    }

    /// Current question; repeated calls return the same payload.
    pub fn question(&self, id: &str) -> Result<QuestionPayload> {
        let session = self.session(id)?;
        let s = lock(&session);
        if self.expired(&s, self.clock.now()) {
            drop(s);
            return Err(self.expire(id));
        }
        self.payload(id, &s.state)
    }

    /// Applies an answer. `seq` must equal the current question's sequence
    /// number; anything else is a stale or duplicate submission.
    pub fn answer(&self, id: &str, submission: &Submission) -> Result<AnswerReceipt> {
        let session = self.session(id)?;
        let mut s = lock(&session);
        let now = self.clock.now();
        if self.expired(&s, now) {
            drop(s);
            return Err(self.expire(id));
        }
        if s.state.is_done() {
            return Err(SurveyError::Conflict("session is already complete".into()));
        }
        if submission.seq != s.state.seq {
            return Err(SurveyError::Conflict(format!(
                "answer for question {} but the current question is {}",
                submission.seq, s.state.seq
            )));
        }
        let next = s.state.apply(&self.definition, &submission.answer)?;
        if next.is_done() {
            // persist before committing so a failed write leaves the session retryable
            let response = StoredResponse {
                survey_id: self.definition.id.clone(),
                record: next.record(id)?,
                started_at: unix_secs(s.started),
                completed_at: unix_secs(now),
            };
            self.store.append(&response)?;
            tracing::info!(session = id, outcome = %response.record.outcome, "response stored");
        }
        s.state = next;
        s.last_active = now;
        let state = &s.state;
        Ok(AnswerReceipt {
            session_id: id.to_owned(),
            phase: state.phase,
            next: if state.is_done() {
                None
            } else {
                Some(self.payload(id, state)?)
            },
            outcome: state.is_done().then_some(state.outcome).flatten(),
        })
    }

    /// Drops idle sessions; partial answers are discarded. Returns how many.
    pub fn purge_expired(&self) -> usize {
        let now = self.clock.now();
        let mut map = lock(&self.sessions);
        let before = map.len();
        map.retain(|_, s| !self.expired(&lock(s), now));
        before - map.len()
    }

    /// Respondent CSV of every stored response.
    pub fn export_csv(&self) -> Result<String> {
        let responses = self.store.read_all()?;
        let mut out = Vec::new();
        export_csv(&mut out, &responses, &self.definition.covariate_names())?;
        Ok(String::from_utf8(out).expect("csv writer emits utf-8"))
    }
}
