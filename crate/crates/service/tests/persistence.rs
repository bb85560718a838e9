use std::fs::{self, OpenOptions};
use std::io::Write;

use dpxplain_core::data::{GroupByQuery, UserQuestion};
use dpxplain_core::session::{Phase1Request, Phase2Request, Phase3Request};
use dpxplain_core::synth::SynthSpec;
use dpxplain_service::{CreateDatasetRequest, CreateSessionRequest, Registry, ServiceError, SessionLogRecord};

fn dataset_request() -> CreateDatasetRequest {
    let d = SynthSpec::with_rows(1_500, 4).generate().unwrap();
    CreateDatasetRequest {
        csv: d.to_csv(),
        schema: serde_json::from_str(&d.schema().to_json()).unwrap(),
    }
}

fn p1() -> Phase1Request {
    Phase1Request {
        query: GroupByQuery::sum("grp", "y"),
        rho_query: 0.1,
    }
}

fn p2() -> Phase2Request {
    Phase2Request {
        question: UserQuestion::simple("g0", "g1"),
        gamma: 0.95,
    }
}

fn p3() -> Phase3Request {
    Phase3Request {
        k: 3,
        rho_topk: 0.2,
        rho_influ: 0.2,
        rho_rank: 0.2,
        ..Phase3Request::default()
    }
}

#[test]
fn reopening_replays_ledger_and_phase_state() {
    let dir = tempfile::tempdir().unwrap();
    let (sid, ds, table) = {
        let reg = Registry::open(dir.path()).unwrap();
        let ds = reg.create_dataset(&dataset_request()).unwrap().id;
        let sid = reg
            .create_session(&CreateSessionRequest {
                dataset_id: ds.clone(),
                total_rho: 2.0,
                seed: Some(77),
            })
            .unwrap()
            .id;
        reg.phase1(&sid, &p1()).unwrap();
        reg.phase2(&sid, &p2()).unwrap();
        // A failed request is not logged and does not advance the stream.
        assert!(reg.phase3(&sid, &Phase3Request::default()).is_err());
        let table = reg.phase3(&sid, &p3()).unwrap();
        (sid, ds, table)
    };

    let log = fs::read_to_string(dir.path().join("sessions").join(format!("{sid}.jsonl"))).unwrap();
    let records: Vec<SessionLogRecord> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.iter().map(|r| r.seq).collect::<Vec<_>>(), [0, 1, 2, 3]);
    assert_eq!(records[2].rho, 0.0);
    assert!((records[3].rho - 0.6).abs() < 1e-12);

    let reg = Registry::open(dir.path()).unwrap();
    assert_eq!(reg.session_dataset(&sid).unwrap(), ds);
    let view = reg.budget(&sid).unwrap();
    assert!((view.spent - 0.7).abs() < 1e-12);
    assert_eq!(view.charges.len(), 4);

    // The replayed session continues its RNG streams where the original
    // left off, so it agrees with an uninterrupted run.
    let next = reg.phase3(&sid, &p3()).unwrap();
    let mem = Registry::in_memory();
    let ds2 = mem.create_dataset(&dataset_request()).unwrap().id;
    let s2 = mem
        .create_session(&CreateSessionRequest {
            dataset_id: ds2,
            total_rho: 2.0,
            seed: Some(77),
        })
        .unwrap()
        .id;
    mem.phase1(&s2, &p1()).unwrap();
    mem.phase2(&s2, &p2()).unwrap();
    assert_eq!(mem.phase3(&s2, &p3()).unwrap(), table);
    assert_eq!(mem.phase3(&s2, &p3()).unwrap(), next);
}

#[test]
fn torn_final_record_is_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let sid = {
        let reg = Registry::open(dir.path()).unwrap();
        let ds = reg.create_dataset(&dataset_request()).unwrap().id;
        let sid = reg
            .create_session(&CreateSessionRequest {
                dataset_id: ds,
                total_rho: 1.0,
                seed: Some(1),
            })
            .unwrap()
            .id;
        reg.phase1(&sid, &p1()).unwrap();
        sid
    };
    let path = dir.path().join("sessions").join(format!("{sid}.jsonl"));
    OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(b"{\"seq\":2,\"kind\":\"pha")
        .unwrap();
    let reg = Registry::open(dir.path()).unwrap();
    assert_eq!(reg.budget(&sid).unwrap().charges.len(), 1);
    reg.phase2(&sid, &p2()).unwrap();
    drop(reg);
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
    Registry::open(dir.path()).unwrap();
}

#[test]
fn tampered_log_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let sid = {
        let reg = Registry::open(dir.path()).unwrap();
        let ds = reg.create_dataset(&dataset_request()).unwrap().id;
        let sid = reg
            .create_session(&CreateSessionRequest {
                dataset_id: ds,
                total_rho: 1.0,
                seed: Some(1),
            })
            .unwrap()
            .id;
        reg.phase1(&sid, &p1()).unwrap();
        sid
    };
    let path = dir.path().join("sessions").join(format!("{sid}.jsonl"));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<SessionLogRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[1].response_digest = "00".repeat(32);
    let out: String = lines.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    fs::write(&path, out).unwrap();
    match Registry::open(dir.path()) {
        Err(ServiceError::Replay { seq, .. }) => assert_eq!(seq, 1),
        other => panic!("expected replay failure, got {other:?}"),
    }
}
