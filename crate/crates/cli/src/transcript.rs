//! The three-phase workflow as a printable transcript, run either in-process
//! or against a running service.

use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use dpxplain_core::data::{Dataset, GroupByQuery, Schema, UserQuestion};
use dpxplain_core::dp::LedgerView;
use dpxplain_core::explain::ExplanationTable;
use dpxplain_core::release::QueryRelease;
use dpxplain_core::session::{Phase1Request, Phase2Request, Phase3Request, Session};
use dpxplain_core::validate::{ConfidenceInterval, ValidityVerdict, Verdict};
use dpxplain_service::{CreateDatasetRequest, CreateSessionRequest, DatasetCreated, ErrorBody, SessionCreated};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::syntax::describe_question;

pub trait Backend {
    fn phase1(&mut self, req: &Phase1Request) -> Result<QueryRelease>;
    fn phase2(&mut self, req: &Phase2Request) -> Result<ValidityVerdict>;
    fn phase3(&mut self, req: &Phase3Request) -> Result<ExplanationTable>;
    fn budget(&mut self) -> Result<LedgerView>;
}

/// Links the engine directly.
pub struct LocalBackend {
    session: Session,
}

impl LocalBackend {
    pub fn new(data: Arc<Dataset>, total_rho: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            session: Session::new(data, total_rho, seed)?,
        })
    }
}

impl Backend for LocalBackend {
    fn phase1(&mut self, req: &Phase1Request) -> Result<QueryRelease> {
        Ok(self.session.phase1(req)?.clone())
    }

    fn phase2(&mut self, req: &Phase2Request) -> Result<ValidityVerdict> {
        Ok(self.session.phase2(req)?)
    }

    fn phase3(&mut self, req: &Phase3Request) -> Result<ExplanationTable> {
        Ok(self.session.phase3(req)?.clone())
    }

    fn budget(&mut self) -> Result<LedgerView> {
        Ok(self.session.budget())
    }
}

/// Talks to a service over HTTP.
pub struct RemoteBackend {
    agent: ureq::Agent,
    base: String,
    session: String,
}

impl RemoteBackend {
    /// Uploads the dataset and opens a session on it.
    pub fn connect(base: &str, csv: &str, schema: &Schema, total_rho: f64, seed: u64) -> Result<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        let base = base.trim_end_matches('/').to_string();
        let schema: Value = serde_json::from_str(&schema.to_json())?;
        let ds: DatasetCreated = request(
            &agent,
            &format!("{base}/datasets"),
            Some(&CreateDatasetRequest {
                csv: csv.to_string(),
                schema,
            }),
        )?;
        let s: SessionCreated = request(
            &agent,
            &format!("{base}/sessions"),
            Some(&CreateSessionRequest {
                dataset_id: ds.id,
                total_rho,
                seed: Some(seed),
            }),
        )?;
        Ok(Self {
            agent,
            base,
            session: s.id,
        })
    }

    fn url(&self, tail: &str) -> String {
        format!("{}/sessions/{}/{tail}", self.base, self.session)
    }
}

fn request<B: Serialize, T: DeserializeOwned>(agent: &ureq::Agent, url: &str, body: Option<&B>) -> Result<T> {
    let mut resp = match body {
        Some(b) => agent.post(url).send_json(b),
        None => agent.get(url).call(),
    }
    .with_context(|| format!("request to {url}"))?;
    let ok = resp.status().is_success();
    let text = resp.body_mut().read_to_string()?;
    if ok {
        serde_json::from_str(&text).with_context(|| format!("response from {url}"))
    } else {
        match serde_json::from_str::<ErrorBody>(&text) {
            Ok(e) => Err(anyhow!(e.message)),
            Err(_) => Err(anyhow!("{url} answered {}: {text}", resp.status())),
        }
    }
}

impl Backend for RemoteBackend {
    fn phase1(&mut self, req: &Phase1Request) -> Result<QueryRelease> {
        request(&self.agent, &self.url("phase1"), Some(req))
    }

    fn phase2(&mut self, req: &Phase2Request) -> Result<ValidityVerdict> {
        request(&self.agent, &self.url("phase2"), Some(req))
    }

    fn phase3(&mut self, req: &Phase3Request) -> Result<ExplanationTable> {
        request(&self.agent, &self.url("phase3"), Some(req))
    }

    fn budget(&mut self) -> Result<LedgerView> {
        request::<(), _>(&self.agent, &self.url("budget"), None)
    }
}

#[derive(Debug, Clone)]
pub struct RunParams {
    pub query: GroupByQuery,
    pub question: UserQuestion,
    pub rho_query: f64,
    pub gamma: f64,
    pub phase3: Phase3Request,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub text: String,
    /// Message of the request that stopped the run, if any.
    pub error: Option<String>,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "undefined".into()
    } else {
        format!("{x:.4}")
    }
}

fn interval(ci: &ConfidenceInterval) -> String {
    let end = |x: f64| {
        if x.is_infinite() {
            if x > 0.0 { "+inf" } else { "-inf" }.to_string()
        } else {
            num(x)
        }
    };
    format!("[{}, {}]", end(ci.lower), end(ci.upper))
}

pub fn render_release(rel: &QueryRelease) -> String {
    let mut s = String::new();
    let avg = rel.results.iter().any(|r| r.count_component.is_some());
    let width = rel.results.iter().map(|r| r.group.len()).max().unwrap_or(5).max(5);
    if avg {
        let _ = writeln!(s, "  {:<width$}  {:>12}  {:>12}  {:>12}", "group", "value", "sum", "count");
    } else {
        let _ = writeln!(s, "  {:<width$}  {:>12}", "group", "value");
    }
    for r in &rel.results {
        let _ = write!(s, "  {:<width$}  {:>12}", r.group, num(r.value));
        if let (Some(a), Some(b)) = (r.sum_component, r.count_component) {
            let _ = write!(s, "  {:>12}  {:>12}", num(a), num(b));
        }
        s.push('\n');
    }
    s
}

pub fn render_verdict(v: &ValidityVerdict) -> String {
    let word = match v.verdict {
        Verdict::Supported => "supported",
        Verdict::PossiblyNoise => "possibly noise (the interval does not exclude zero)",
    };
    format!(
        "  interval {} at level {}\n  verdict  {word}\n",
        interval(&v.interval),
        v.interval.level
    )
}

pub fn render_table(t: &ExplanationTable) -> String {
    let mut s = String::new();
    let width = t
        .rows
        .iter()
        .map(|r| r.predicate.to_string().len())
        .max()
        .unwrap_or(9)
        .max(9);
    let head = if t.degenerate { "influence" } else { "relative influence" };
    let _ = writeln!(s, "  {:<width$}  {:<28}  {}", "predicate", head, "rank");
    for r in &t.rows {
        let _ = writeln!(
            s,
            "  {:<width$}  {:<28}  [{}, {}]",
            r.predicate.to_string(),
            interval(&r.rel_influ_ci),
            r.rank_ci.lower,
            r.rank_ci.upper
        );
    }
    if t.degenerate {
        s.push_str("  (the observed gap is zero, so influences are shown unscaled)\n");
    }
    s
}

pub fn render_budget(b: &LedgerView) -> String {
    let mut s = format!(
        "  total {}  spent {}  remaining {}\n",
        b.total,
        num(b.spent),
        num(b.remaining)
    );
    for c in &b.charges {
        let _ = writeln!(s, "    {:<6} {}", c.label, c.rho);
    }
    s
}

/// Runs the three phases in order and stops at the first failing one.
pub fn run_transcript(backend: &mut dyn Backend, p: &RunParams) -> Transcript {
    let mut text = String::new();
    let error = run_phases(backend, p, &mut text).err().map(|e| e.to_string());
    if let Some(e) = &error {
        let _ = writeln!(text, "error: {e}");
    }
    if let Ok(b) = backend.budget() {
        let _ = write!(text, "Budget\n{}", render_budget(&b));
    }
    Transcript { text, error }
}

fn run_phases(backend: &mut dyn Backend, p: &RunParams, out: &mut String) -> Result<()> {
    let _ = writeln!(out, "Phase 1  {}  (rho_query {})", p.query, p.rho_query);
    let rel = backend.phase1(&Phase1Request {
        query: p.query.clone(),
        rho_query: p.rho_query,
    })?;
    out.push_str(&render_release(&rel));

    let _ = writeln!(out, "Phase 2  {}  (gamma {})", describe_question(&p.question), p.gamma);
    let v = backend.phase2(&Phase2Request {
        question: p.question.clone(),
        gamma: p.gamma,
    })?;
    out.push_str(&render_verdict(&v));

    let r = &p.phase3;
    let _ = writeln!(
        out,
        "Phase 3  k {}  l {}  gamma {}  eta {}  rho topk/influ/rank {}/{}/{}",
        r.k, r.l, r.gamma, r.eta, r.rho_topk, r.rho_influ, r.rho_rank
    );
    let t = backend.phase3(r)?;
    out.push_str(&render_table(&t));
    Ok(())
}
