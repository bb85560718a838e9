//! Monte-Carlo harness: coverage, top-k precision and interval widths.
//!
//! Repetition `r` of an experiment seeded with `s` draws its noise from a
//! seed derived from `(s, r)`; the same repetition index reuses that seed at
//! every grid point. Repetitions run in parallel and are collected in index
//! order, so reports do not depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Result};
use dpxplain_core::data::{BoundQuestion, Dataset, GroupByQuery, QueryPlan, UserQuestion};
use dpxplain_core::dp::{PrivacyLedger, RandomSource};
use dpxplain_core::explain::{
    build_table, descending, influence_ci, noisy_topk, rank_ci, TableEntry,
};
use dpxplain_core::influence::{
    enumerate_predicates, relative_influence_divisor, sensitivity, InfluenceEvaluator, PredicateSpace,
};
use dpxplain_core::release::{answer_query, QueryRelease};
use dpxplain_core::validate::{bind_to_release, validate_question, Verdict};
use rand::RngCore;
use rayon::prelude::*;

use crate::oracle::{kendall_tau, kth_largest, rank_range, Oracle};
use crate::syntax::describe_question;

/// Dataset, query and question shared by every run of an experiment.
#[derive(Clone)]
pub struct Workload {
    pub data: Arc<Dataset>,
    pub query: GroupByQuery,
    pub question: UserQuestion,
}

/// Everything about a workload that does not depend on noise.
pub struct Prepared {
    pub plan: QueryPlan,
    pub space: PredicateSpace,
    /// Engine influences, fed to the mechanisms.
    pub influences: Vec<f64>,
    /// Oracle influences, used as ground truth.
    pub truth: Vec<f64>,
    pub ranked: Vec<f64>,
    pub question_value: f64,
    pub delta: f64,
    /// Largest |engine − oracle| over the predicate space.
    pub oracle_gap: f64,
}

impl Workload {
    pub fn prepare(&self, l: usize) -> Result<Prepared> {
        let schema = self.data.schema();
        let plan = self.query.plan(schema)?;
        let bound: BoundQuestion = self.question.bind(&plan)?;
        let space = enumerate_predicates(schema, &plan, l)?;
        let influences = InfluenceEvaluator::new(&self.data, &plan, &bound).influences(&space);
        let oracle = Oracle::new(&self.data, &self.query, &self.question)?;
        let truth: Vec<f64> = space.bound().iter().map(|p| oracle.influence(p)).collect();
        let oracle_gap = influences
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(Prepared {
            delta: sensitivity(plan.agg, plan.abs_max(), &bound).delta,
            ranked: descending(&influences),
            question_value: oracle.question_value(),
            plan,
            space,
            influences,
            truth,
            oracle_gap,
        })
    }
}

/// Parameters of one Phase-3 style run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub rho_query: f64,
    pub gamma: f64,
    pub k: usize,
    pub rho_topk: f64,
    pub rho_influ: f64,
    pub rho_rank: f64,
    pub eta: f64,
}

impl Point {
    fn total(&self) -> f64 {
        self.rho_query + self.rho_topk + self.rho_influ + self.rho_rank
    }
}

pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    RandomSource::for_stream(seed, rep as u64).next_u64()
}

/// What one repetition produced: the release, the verdict and the raw
/// Phase-3 intervals, in selection order.
pub struct RunOutput {
    pub release: QueryRelease,
    pub supported: bool,
    pub question_covered: bool,
    pub selected: Vec<usize>,
    pub influence_cis: Vec<dpxplain_core::validate::ConfidenceInterval>,
    pub rank_cis: Vec<dpxplain_core::explain::RankInterval>,
}

pub fn run_once(w: &Workload, p: &Prepared, point: &Point, seed: u64) -> Result<RunOutput> {
    let mut ledger = PrivacyLedger::new(point.total())?;
    let mut rng = RandomSource::for_stream(seed, 0);
    let release = answer_query(&w.data, &w.query, point.rho_query, &mut ledger, &mut rng)?;
    let verdict = validate_question(&release, &w.question, point.gamma)?;
    let mut rng = RandomSource::for_stream(seed, 1);
    let sel = noisy_topk(&p.influences, p.delta, point.rho_topk, point.k, &mut ledger, &mut rng)?;
    let chosen: Vec<f64> = sel.indices.iter().map(|&i| p.influences[i]).collect();
    let influence_cis = influence_ci(&chosen, p.delta, point.rho_influ, point.gamma, &mut ledger, &mut rng)?;
    let rank_cis = rank_ci(
        &chosen,
        &p.ranked,
        p.delta,
        point.rho_rank,
        point.gamma,
        point.eta,
        &mut ledger,
        &mut rng,
    )?;
    Ok(RunOutput {
        supported: verdict.verdict == Verdict::Supported,
        question_covered: verdict.interval.contains(p.question_value),
        release,
        selected: sel.indices,
        influence_cis,
        rank_cis,
    })
}

fn runs<T: Send>(reps: usize, seed: u64, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..reps)
        .into_par_iter()
        .map(|r| f(rep_seed(seed, r)))
        .collect()
}

/// A CSV table plus a plain-text summary, both opening with the parameters
/// needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Report {
    pub fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column `{name}`"));
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(|x| x.to_string())).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{} experiment\n", self.name);
        for (k, v) in &self.header {
            let _ = writeln!(out, "  {k}: {v}");
        }
        let widths: Vec<usize> = self.columns.iter().map(|c| c.len().max(8)).collect();
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
        for r in &self.rows {
            for (x, w) in r.iter().zip(&widths) {
                let _ = write!(out, "  {:>w$}", format!("{x:.4}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv())?;
        std::fs::write(dir.join(format!("{}.txt", self.name)), self.summary())?;
        Ok(())
    }
}

/// Settings shared by every experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub reps: usize,
    pub seed: u64,
    pub l: usize,
    pub base: Point,
}

impl ExperimentSpec {
    fn check(&self) -> Result<()> {
        if self.reps == 0 {
            bail!("repetitions must be at least 1");
        }
        Ok(())
    }

    fn header(&self, w: &Workload, grid: &[(&str, &[f64])]) -> Vec<(String, String)> {
        let mut h = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("reps".to_string(), self.reps.to_string()),
            ("rows".to_string(), w.data.len().to_string()),
            ("query".to_string(), w.query.to_string()),
            ("question".to_string(), describe_question(&w.question)),
            ("l".to_string(), self.l.to_string()),
            ("base".to_string(), format!("{:?}", self.base)),
        ];
        for (name, values) in grid {
            h.push((format!("grid {name}"), format!("{values:?}")));
        }
        h
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn frac(xs: impl Iterator<Item = bool>) -> f64 {
    mean(xs.map(f64::from))
}

/// Coverage over the grid `rho_query × gamma`: question CI, verdict
/// accuracy, and influence and rank CIs pooled and per selection slot.
pub fn coverage(w: &Workload, spec: &ExperimentSpec, rho_query: &[f64], gamma: &[f64]) -> Result<Report> {
    spec.check()?;
    let p = w.prepare(spec.l)?;
    let truth_holds = p.question_value > 0.0;
    let mut rows = Vec::new();
    for &rq in rho_query {
        for &g in gamma {
            let point = Point {
                rho_query: rq,
                gamma: g,
                ..spec.base
            };
            let outs = runs(spec.reps, spec.seed, |s| run_once(w, &p, &point, s))?;
            let k = point.k;
            let influ = |o: &RunOutput, j: usize| o.influence_cis[j].contains(p.truth[o.selected[j]]);
            let rank = |o: &RunOutput, j: usize| {
                let (lo, hi) = rank_range(&p.truth, p.truth[o.selected[j]]);
                o.rank_cis[j].lower <= hi && lo <= o.rank_cis[j].upper
            };
            let slot_min = |f: &dyn Fn(&RunOutput, usize) -> bool| {
                (0..k)
                    .map(|j| frac(outs.iter().map(|o| f(o, j))))
                    .fold(f64::INFINITY, f64::min)
            };
            rows.push(vec![
                rq,
                g,
                frac(outs.iter().map(|o| o.question_covered)),
                frac(outs.iter().map(|o| o.supported == truth_holds)),
                frac(outs.iter().flat_map(|o| (0..k).map(move |j| influ(o, j)))),
                slot_min(&influ),
                frac(outs.iter().flat_map(|o| (0..k).map(move |j| rank(o, j)))),
                slot_min(&rank),
            ]);
        }
    }
    let mut header = spec.header(w, &[("rho_query", rho_query), ("gamma", gamma)]);
    header.push(("true question value".into(), p.question_value.to_string()));
    header.push(("engine-oracle gap".into(), p.oracle_gap.to_string()));
    Ok(Report {
        name: "coverage".into(),
        header,
        columns: [
            "rho_query",
            "gamma",
            "question_coverage",
            "verdict_accuracy",
            "influence_coverage",
            "influence_coverage_min_slot",
            "rank_coverage",
            "rank_coverage_min_slot",
        ]
        .map(String::from)
        .to_vec(),
        rows,
    })
}

/// Mean precision@k and Kendall-tau of the selection over `rho_topk × k`.
pub fn precision(w: &Workload, spec: &ExperimentSpec, rho_topk: &[f64], ks: &[usize]) -> Result<Report> {
    spec.check()?;
    let p = w.prepare(spec.l)?;
    let mut rows = Vec::new();
    for &rt in rho_topk {
        for &k in ks {
            let cut = kth_largest(&p.truth, k);
            let outs = runs(spec.reps, spec.seed, |s| {
                let mut ledger = PrivacyLedger::new(rt)?;
                let mut rng = RandomSource::for_stream(s, 1);
                let sel = noisy_topk(&p.influences, p.delta, rt, k, &mut ledger, &mut rng)?;
                let hits = sel.indices.iter().filter(|&&i| p.truth[i] >= cut).count();
                let order: Vec<f64> = (0..k).map(|j| -(j as f64)).collect();
                let truth: Vec<f64> = sel.indices.iter().map(|&i| p.truth[i]).collect();
                Ok((hits as f64 / k as f64, kendall_tau(&order, &truth)))
            })?;
            rows.push(vec![
                rt,
                k as f64,
                mean(outs.iter().map(|o| o.0)),
                mean(outs.iter().map(|o| o.1)),
            ]);
        }
    }
    let ks_f: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let mut header = spec.header(w, &[("rho_topk", rho_topk), ("k", &ks_f)]);
    header.push(("predicates".into(), p.space.len().to_string()));
    Ok(Report {
        name: "precision".into(),
        header,
        columns: ["rho_topk", "k", "precision", "kendall_tau"].map(String::from).to_vec(),
        rows,
    })
}

/// Mean widths of the relative-influence and rank intervals the user sees,
/// over `rho_influ × rho_rank`.
pub fn ciwidth(w: &Workload, spec: &ExperimentSpec, rho_influ: &[f64], rho_rank: &[f64]) -> Result<Report> {
    spec.check()?;
    let p = w.prepare(spec.l)?;
    let mut rows = Vec::new();
    for &ri in rho_influ {
        for &rr in rho_rank {
            let point = Point {
                rho_influ: ri,
                rho_rank: rr,
                ..spec.base
            };
            let outs = runs(spec.reps, spec.seed, |s| {
                let out = run_once(w, &p, &point, s)?;
                let bound = bind_to_release(&out.release, &w.question)?;
                let divisor = relative_influence_divisor(&bound, &out.release);
                let entries = out
                    .selected
                    .iter()
                    .zip(&out.influence_cis)
                    .zip(&out.rank_cis)
                    .map(|((&i, &ci), &rk)| TableEntry {
                        index: i,
                        predicate: p.space.predicate(i).clone(),
                        influence_ci: ci,
                        rank_ci: rk,
                    })
                    .collect();
                let table = build_table(entries, divisor)?;
                Ok((
                    mean(table.rows.iter().map(|r| r.rel_influ_ci.width())),
                    mean(table.rows.iter().map(|r| r.rank_ci.width() as f64)),
                    table.degenerate,
                ))
            })?;
            rows.push(vec![
                ri,
                rr,
                mean(outs.iter().map(|o| o.0)),
                mean(outs.iter().map(|o| o.1)),
                frac(outs.iter().map(|o| o.2)),
            ]);
        }
    }
    let mut header = spec.header(w, &[("rho_influ", rho_influ), ("rho_rank", rho_rank)]);
    header.push(("predicates".into(), p.space.len().to_string()));
    Ok(Report {
        name: "ciwidth".into(),
        header,
        columns: ["rho_influ", "rho_rank", "rel_influ_width", "rank_width", "degenerate"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}
