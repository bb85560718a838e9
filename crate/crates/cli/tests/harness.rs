use std::sync::Arc;

use dpxplain_cli::experiment::{ciwidth, coverage, precision, ExperimentSpec, Point, Workload};
use dpxplain_cli::syntax::{parse_query, parse_question};
use dpxplain_core::synth::SynthSpec;

fn workload(rows: usize, query: &str, question: &str) -> Workload {
    Workload {
        data: Arc::new(SynthSpec::with_rows(rows, 2).generate().unwrap()),
        query: parse_query(query).unwrap(),
        question: parse_question(question).unwrap(),
    }
}

fn spec(reps: usize) -> ExperimentSpec {
    ExperimentSpec {
        reps,
        seed: 17,
        l: 1,
        base: Point {
            rho_query: 0.1,
            gamma: 0.95,
            k: 5,
            rho_topk: 0.5,
            rho_influ: 0.5,
            rho_rank: 1.0,
            eta: 0.1,
        },
    }
}

#[test]
fn oracle_agrees_with_engine() {
    for query in [
        "COUNT(*) BY grp",
        "SUM(y) BY grp",
        "AVG(y) BY grp",
        "SUM(y) BY grp WHERE a5 != v0",
        "AVG(y) BY grp WHERE a4 = v1 AND a3 != v2",
    ] {
        for question in ["g0 > g1", "1*g0 + -2*g2 + 0.5*g3 > 1"] {
            let w = workload(800, query, question);
            for l in 1..=2 {
                let p = w.prepare(l).unwrap();
                let scale = p.truth.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                assert!(p.oracle_gap <= 1e-9 * scale, "{query} / {question} / l={l}: {}", p.oracle_gap);
            }
        }
    }
}

#[test]
fn precision_limits() {
    let w = workload(2_000, "SUM(y) BY grp", "g0 > g1");
    let r = precision(&w, &spec(10), &[1e9], &[1, 5]).unwrap();
    assert_eq!(r.column("precision"), [1.0, 1.0]);
    let r = precision(&w, &spec(5), &[0.01], &[30]).unwrap();
    assert_eq!(r.column("precision"), [1.0]);
}

#[test]
fn widths_shrink_with_budget_and_ranks_stay_clamped() {
    let w = workload(2_000, "SUM(y) BY grp", "g0 > g1");
    let r = ciwidth(&w, &spec(40), &[0.05, 0.5, 5.0], &[0.1, 1.0, 10.0]).unwrap();
    let influ = r.column("rel_influ_width");
    let rank = r.column("rank_width");
    // Rows run over rho_rank fastest.
    for rr in 0..3 {
        assert!(influ[rr] > influ[3 + rr] && influ[3 + rr] > influ[6 + rr]);
    }
    for ri in 0..3 {
        assert!(rank[ri * 3] > rank[ri * 3 + 2]);
    }
    assert!(rank.iter().all(|&x| x <= 29.0));
}

#[test]
fn coverage_trends() {
    let w = workload(1_000, "SUM(y) BY grp", "g0 > g1");
    let r = coverage(&w, &spec(200), &[0.001, 0.01, 0.1, 1.0, 10.0], &[0.95]).unwrap();
    let acc = r.column("verdict_accuracy");
    for pair in acc.windows(2) {
        assert!(pair[0] <= pair[1], "{acc:?}");
    }
    assert_eq!(acc[4], 1.0);
    let r = coverage(&w, &spec(100), &[0.1], &[0.0]).unwrap();
    assert_eq!(r.column("question_coverage"), [0.0]);
    assert_eq!(r.column("influence_coverage"), [0.0]);
}
