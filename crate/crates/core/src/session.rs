//! The three-phase workflow over one dataset and one privacy budget.
//!
//! A session serializes its requests. Request `n` (counting successful
//! requests from 0) draws from `RandomSource::for_stream(seed, n)`, so
//! re-running a log of successful requests rebuilds the session exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroupByQuery, UserQuestion};
use crate::dp::{DpError, LedgerView, PrivacyLedger, RandomSource};
use crate::error::{Error, Result};
use crate::explain::{
    build_table, descending, influence_ci, noisy_topk, rank_ci, ExplanationTable, TableEntry,
};
use crate::influence::{
    enumerate_predicates, relative_influence_divisor, sensitivity, InfluenceEvaluator,
};
use crate::release::{answer_query, check_release, QueryRelease};
use crate::validate::{bind_to_release, validate_question, ValidityVerdict};

pub const DEFAULT_GAMMA: f64 = 0.95;

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase1Request {
    pub query: GroupByQuery,
    #[serde(default = "Phase1Request::default_rho")]
    pub rho_query: f64,
}

impl Phase1Request {
    fn default_rho() -> f64 {
        0.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase2Request {
    pub question: UserQuestion,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Phase3Request {
    pub k: usize,
    pub gamma: f64,
    pub rho_topk: f64,
    pub rho_influ: f64,
    pub rho_rank: f64,
    pub l: usize,
    pub eta: f64,
}

impl Default for Phase3Request {
    fn default() -> Self {
        Self {
            k: 5,
            gamma: DEFAULT_GAMMA,
            rho_topk: 0.5,
            rho_influ: 0.5,
            rho_rank: 1.0,
            l: 1,
            eta: 0.1,
        }
    }
}

impl Phase3Request {
    pub fn total_rho(&self) -> f64 {
        self.rho_topk + self.rho_influ + self.rho_rank
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    data: Arc<Dataset>,
    ledger: PrivacyLedger,
    seed: u64,
    requests: u64,
    release: Option<QueryRelease>,
    question: Option<UserQuestion>,
    verdict: Option<ValidityVerdict>,
    table: Option<ExplanationTable>,
}

impl Session {
    pub fn new(data: Arc<Dataset>, total_rho: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            data,
            ledger: PrivacyLedger::new(total_rho)?,
            seed,
            requests: 0,
            release: None,
            question: None,
            verdict: None,
            table: None,
        })
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn requests(&self) -> u64 {
        self.requests
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        &self.ledger
    }

    pub fn budget(&self) -> LedgerView {
        self.ledger.view()
    }

    pub fn release(&self) -> Option<&QueryRelease> {
        self.release.as_ref()
    }

    pub fn verdict(&self) -> Option<&ValidityVerdict> {
        self.verdict.as_ref()
    }

    pub fn table(&self) -> Option<&ExplanationTable> {
        self.table.as_ref()
    }

    fn next_rng(&self) -> RandomSource {
        RandomSource::for_stream(self.seed, self.requests)
    }

    /// Releases the query, replacing any earlier release and everything
    /// derived from it.
    pub fn phase1(&mut self, req: &Phase1Request) -> Result<&QueryRelease> {
        let mut rng = self.next_rng();
        let release = answer_query(&self.data, &req.query, req.rho_query, &mut self.ledger, &mut rng)?;
        self.requests += 1;
        self.release = Some(release);
        self.question = None;
        self.verdict = None;
        self.table = None;
        Ok(self.release.as_ref().expect("just set"))
    }

    /// Validates a question against the current release. Free of charge and
    /// repeatable; the latest verdict is the one Phase 3 explains.
    pub fn phase2(&mut self, req: &Phase2Request) -> Result<ValidityVerdict> {
        let release = self
            .release
            .as_ref()
            .ok_or_else(|| Error::PhaseOrder("no query has been released yet".into()))?;
        let verdict = validate_question(release, &req.question, req.gamma)?;
        self.requests += 1;
        self.question = Some(req.question.clone());
        self.verdict = Some(verdict);
        self.table = None;
        Ok(verdict)
    }

    /// Builds the explanation table for the last validated question. The
    /// three charges commit together or not at all.
    pub fn phase3(&mut self, req: &Phase3Request) -> Result<&ExplanationTable> {
        let (release, question) = match (&self.release, &self.question, &self.verdict) {
            (Some(r), Some(q), Some(_)) => (r, q),
            _ => {
                return Err(Error::PhaseOrder(
                    "a question must be validated before explaining it".into(),
                ))
            }
        };
        let total = req.total_rho();
        if !self.ledger.can_afford(total) {
            return Err(DpError::InsufficientBudget {
                requested: total,
                remaining: self.ledger.remaining(),
            }
            .into());
        }
        let schema = self.data.schema();
        let plan = release.query.plan(schema)?;
        check_release(release, &plan)?;
        let bound = bind_to_release(release, question)?;
        let space = enumerate_predicates(schema, &plan, req.l)?;
        let evaluator = InfluenceEvaluator::new(&self.data, &plan, &bound);
        let influences = evaluator.influences(&space);
        let delta = sensitivity(plan.agg, plan.abs_max(), &bound).delta;

        let mut ledger = self.ledger.clone();
        let mut rng = self.next_rng();
        let selection = noisy_topk(&influences, delta, req.rho_topk, req.k, &mut ledger, &mut rng)?;
        let chosen: Vec<f64> = selection.indices.iter().map(|&i| influences[i]).collect();
        let influence_cis = influence_ci(&chosen, delta, req.rho_influ, req.gamma, &mut ledger, &mut rng)?;
        let ranked = descending(&influences);
        let rank_cis = rank_ci(
            &chosen,
            &ranked,
            delta,
            req.rho_rank,
            req.gamma,
            req.eta,
            &mut ledger,
            &mut rng,
        )?;
        let entries = selection
            .indices
            .iter()
            .zip(influence_cis)
            .zip(rank_cis)
            .map(|((&i, ci), rk)| TableEntry {
                index: i,
                predicate: space.predicate(i).clone(),
                influence_ci: ci,
                rank_ci: rk,
            })
            .collect();
        let table = build_table(entries, relative_influence_divisor(&bound, release))?;

        self.ledger = ledger;
        self.requests += 1;
        self.table = Some(table);
        Ok(self.table.as_ref().expect("just set"))
    }
}
