//! Datasets and sessions, with their on-disk record.
//!
//! Layout under the storage root:
//!
//! ```text
//! datasets/{id}/data.csv     the ingested payload
//! datasets/{id}/schema.json  its schema sidecar
//! sessions/{id}.jsonl        one SessionLogRecord per successful request
//! ```
//!
//! A session log opens with a `create` record. Every later record is a
//! request that succeeded, so replaying the records in order against a fresh
//! session reproduces the ledger, the RNG streams and the phase state. Replay
//! checks each response digest against the recorded one.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, PoisonError, RwLock};

use dpxplain_core::data::{Dataset, Schema};
use dpxplain_core::dp::LedgerView;
use dpxplain_core::explain::ExplanationTable;
use dpxplain_core::release::QueryRelease;
use dpxplain_core::session::{Phase1Request, Phase2Request, Phase3Request, Session};
use dpxplain_core::validate::ValidityVerdict;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ServiceError;
use crate::log::{digest, now_ms, read_log, session_path, OperationKind, SessionLog, SessionLogRecord};

type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateDatasetRequest {
    pub csv: String,
    pub schema: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCreated {
    pub id: String,
    pub row_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub dataset_id: String,
    pub total_rho: f64,
    /// Fixes the noise of every request. Whoever knows the seed can
    /// regenerate the noise, so it is never echoed back.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub dataset_id: String,
    pub budget: LedgerView,
}

/// Result of one phase request.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseResponse {
    Release(QueryRelease),
    Verdict(ValidityVerdict),
    Table(ExplanationTable),
}

impl PhaseResponse {
    pub fn to_json(&self) -> Vec<u8> {
        match self {
            PhaseResponse::Release(r) => serde_json::to_vec(r),
            PhaseResponse::Verdict(v) => serde_json::to_vec(v),
            PhaseResponse::Table(t) => serde_json::to_vec(t),
        }
        .expect("responses serialize")
    }
}

#[derive(Debug)]
struct SessionSlot {
    session: Session,
    dataset_id: String,
    log: SessionLog,
}

#[derive(Debug, Default)]
pub struct Registry {
    root: Option<PathBuf>,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionSlot>>>>,
}

fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

fn to_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializable")
}

fn parse<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T> {
    T::deserialize(v).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn execute(session: &mut Session, kind: OperationKind, request: &Value) -> Result<PhaseResponse> {
    Ok(match kind {
        OperationKind::Phase1 => {
            PhaseResponse::Release(session.phase1(&parse::<Phase1Request>(request)?)?.clone())
        }
        OperationKind::Phase2 => {
            PhaseResponse::Verdict(session.phase2(&parse::<Phase2Request>(request)?)?)
        }
        OperationKind::Phase3 => {
            PhaseResponse::Table(session.phase3(&parse::<Phase3Request>(request)?)?.clone())
        }
        OperationKind::Create => {
            return Err(ServiceError::BadRequest("session already exists".into()))
        }
    })
}

impl Registry {
    /// A registry that keeps nothing on disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or initializes) a storage root, loading every dataset and
    /// replaying every session log.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("datasets"))?;
        fs::create_dir_all(root.join("sessions"))?;
        let registry = Self {
            root: Some(root.clone()),
            ..Self::default()
        };
        registry.load_datasets(&root)?;
        registry.replay_sessions(&root)?;
        Ok(registry)
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn load_datasets(&self, root: &Path) -> Result<()> {
        let mut map = self.datasets.write().unwrap_or_else(PoisonError::into_inner);
        for entry in fs::read_dir(root.join("datasets"))? {
            let entry = entry?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if id.starts_with('.') || !entry.file_type()?.is_dir() {
                continue;
            }
            let schema = Schema::from_json(&fs::read_to_string(entry.path().join("schema.json"))?)?;
            let csv = fs::File::open(entry.path().join("data.csv"))?;
            let data = Dataset::from_csv(Arc::new(schema), csv)?;
            map.insert(id, Arc::new(data));
        }
        Ok(())
    }

    fn replay_sessions(&self, root: &Path) -> Result<()> {
        let mut paths: Vec<PathBuf> = fs::read_dir(root.join("sessions"))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let (records, log) = read_log(&path)?;
            let slot = self.replay(&id, &records, log)?;
            tracing::info!(session = %id, records = records.len(), "replayed session");
            self.sessions
                .write()
                .unwrap_or_else(PoisonError::into_inner)
                .insert(id, Arc::new(Mutex::new(slot)));
        }
        Ok(())
    }

    fn replay(&self, id: &str, records: &[SessionLogRecord], log: SessionLog) -> Result<SessionSlot> {
        let fail = |seq: u64, reason: String| ServiceError::Replay {
            session: id.to_string(),
            seq,
            reason,
        };
        let first = records
            .first()
            .ok_or_else(|| fail(0, "log is empty".into()))?;
        if first.kind != OperationKind::Create {
            return Err(fail(0, "log does not start with a create record".into()));
        }
        let mut slot = None;
        for (i, rec) in records.iter().enumerate() {
            let seq = i as u64;
            if rec.seq != seq {
                return Err(fail(seq, format!("sequence number {} out of order", rec.seq)));
            }
            if digest(&to_bytes(&rec.request)) != rec.request_digest {
                return Err(fail(seq, "request digest mismatch".into()));
            }
            let response = if i == 0 {
                let req: CreateSessionRequest = parse(&rec.request)?;
                let (s, created) = self.build_session(id, &req)?;
                slot = Some(s);
                to_bytes(&created)
            } else {
                if rec.kind == OperationKind::Create {
                    return Err(fail(seq, "second create record".into()));
                }
                let s = slot.as_mut().expect("created above");
                execute(&mut s.session, rec.kind, &rec.request)
                    .map_err(|e| fail(seq, format!("request failed on replay: {e}")))?
                    .to_json()
            };
            if digest(&response) != rec.response_digest {
                return Err(fail(seq, "response differs from the recorded one".into()));
            }
        }
        let mut slot = slot.expect("at least one record");
        slot.log = log;
        Ok(slot)
    }

    fn dataset(&self, id: &str) -> Result<Arc<Dataset>> {
        self.datasets
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound {
                kind: "dataset",
                id: id.to_string(),
            })
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<SessionSlot>>> {
        self.sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound {
                kind: "session",
                id: id.to_string(),
            })
    }

    /// Registers a dataset. Every upload gets a fresh id, identical payloads
    /// included.
    pub fn create_dataset(&self, req: &CreateDatasetRequest) -> Result<DatasetCreated> {
        let schema = Schema::from_json(&req.schema.to_string())?;
        let data = Dataset::from_csv(Arc::new(schema), req.csv.as_bytes())?;
        let id = new_id();
        if let Some(root) = &self.root {
            let dir = root.join("datasets");
            let tmp = dir.join(format!(".{id}.tmp"));
            fs::create_dir_all(&tmp)?;
            fs::write(tmp.join("data.csv"), &req.csv)?;
            fs::write(tmp.join("schema.json"), data.schema().to_json())?;
            fs::rename(&tmp, dir.join(&id))?;
        }
        let row_count = data.len();
        self.datasets
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(id.clone(), Arc::new(data));
        Ok(DatasetCreated { id, row_count })
    }

    fn build_session(&self, id: &str, req: &CreateSessionRequest) -> Result<(SessionSlot, SessionCreated)> {
        let data = self.dataset(&req.dataset_id)?;
        let seed = req.seed.ok_or_else(|| ServiceError::BadRequest("missing seed".into()))?;
        let session = Session::new(data, req.total_rho, seed)?;
        let created = SessionCreated {
            id: id.to_string(),
            dataset_id: req.dataset_id.clone(),
            budget: session.budget(),
        };
        Ok((
            SessionSlot {
                session,
                dataset_id: req.dataset_id.clone(),
                log: SessionLog::memory(),
            },
            created,
        ))
    }

    pub fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionCreated> {
        let id = new_id();
        let req = CreateSessionRequest {
            seed: Some(req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0)),
            ..req.clone()
        };
        let (mut slot, created) = self.build_session(&id, &req)?;
        if let Some(root) = &self.root {
            slot.log = SessionLog::create(&session_path(root, &id))?;
        }
        let request = serde_json::to_value(&req).expect("serializable");
        slot.log.append(&SessionLogRecord {
            seq: 0,
            timestamp_ms: now_ms(),
            kind: OperationKind::Create,
            rho: 0.0,
            request_digest: digest(&to_bytes(&request)),
            response_digest: digest(&to_bytes(&created)),
            request,
        })?;
        self.sessions
            .write()
            .unwrap_or_else(PoisonError::into_inner)
            .insert(id, Arc::new(Mutex::new(slot)));
        Ok(created)
    }

    /// Runs one phase request against a copy of the session, logs it, and
    /// only then makes the copy current.
    fn mutate(&self, id: &str, kind: OperationKind, request: Value) -> Result<PhaseResponse> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().unwrap_or_else(PoisonError::into_inner);
        let mut session = slot.session.clone();
        let charged_before = session.ledger().charges().len();
        let response = execute(&mut session, kind, &request)?;
        let rho = session.ledger().charges()[charged_before..]
            .iter()
            .map(|c| c.rho)
            .sum();
        let record = SessionLogRecord {
            seq: slot.log.next_seq(),
            timestamp_ms: now_ms(),
            kind,
            rho,
            request_digest: digest(&to_bytes(&request)),
            response_digest: digest(&response.to_json()),
            request,
        };
        slot.log.append(&record)?;
        slot.session = session;
        Ok(response)
    }

    pub fn phase1(&self, id: &str, req: &Phase1Request) -> Result<QueryRelease> {
        let v = serde_json::to_value(req).expect("serializable");
        match self.mutate(id, OperationKind::Phase1, v)? {
            PhaseResponse::Release(r) => Ok(r),
            _ => unreachable!("phase1 answers with a release"),
        }
    }

    pub fn phase2(&self, id: &str, req: &Phase2Request) -> Result<ValidityVerdict> {
        let v = serde_json::to_value(req).expect("serializable");
        match self.mutate(id, OperationKind::Phase2, v)? {
            PhaseResponse::Verdict(r) => Ok(r),
            _ => unreachable!("phase2 answers with a verdict"),
        }
    }

    pub fn phase3(&self, id: &str, req: &Phase3Request) -> Result<ExplanationTable> {
        let v = serde_json::to_value(req).expect("serializable");
        match self.mutate(id, OperationKind::Phase3, v)? {
            PhaseResponse::Table(r) => Ok(r),
            _ => unreachable!("phase3 answers with a table"),
        }
    }

    /// Raw-JSON entry point used by the HTTP layer.
    pub fn phase(&self, id: &str, kind: OperationKind, request: Value) -> Result<PhaseResponse> {
        self.mutate(id, kind, request)
    }

    pub fn budget(&self, id: &str) -> Result<LedgerView> {
        let slot = self.slot(id)?;
        let slot = slot.lock().unwrap_or_else(PoisonError::into_inner);
        Ok(slot.session.budget())
    }

    pub fn session_dataset(&self, id: &str) -> Result<String> {
        let slot = self.slot(id)?;
        let slot = slot.lock().unwrap_or_else(PoisonError::into_inner);
        Ok(slot.dataset_id.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .unwrap_or_else(PoisonError::into_inner)
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}
