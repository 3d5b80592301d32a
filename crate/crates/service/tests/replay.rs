//! Event-log replay: restarts, torn writes and prefixes.

mod common;

use std::fs::OpenOptions;
use std::io::Write;

use common::{lab_results, request, synthetic};
use spade_core::{Dataset, EndpointSpec, PolicyConfig, PolicyKind};
use spade_service::events::read_events;
use spade_service::{Campaign, CampaignStore, ServiceError};

fn run_cycles(store: &CampaignStore, id: &str, ds: &Dataset, n: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let batch = store.suggest(id, false).unwrap().batch;
            store.submit(id, &lab_results(ds, &batch)).unwrap();
            batch
        })
        .collect()
}

fn new_campaign(store: &CampaignStore, ds: &Dataset) -> String {
    let req = request(ds, PolicyKind::Spade, PolicyConfig::default(), vec![EndpointSpec::average_top10(8.0)], 7);
    store.create(req).unwrap().campaign_id
}

#[test]
fn restart_reproduces_summary_bytes() {
    let ds = synthetic(400, 20);
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let store = CampaignStore::open(dir.path()).unwrap();
        let id = new_campaign(&store, &ds);
        run_cycles(&store, &id, &ds, 3);
        store.suggest(&id, false).unwrap();
        (id.clone(), serde_json::to_vec(&store.summary(&id).unwrap()).unwrap())
    };
    let store = CampaignStore::open(dir.path()).unwrap();
    let after = serde_json::to_vec(&store.summary(&id).unwrap()).unwrap();
    assert_eq!(before, after);
    // The pending batch survives the restart and is still returned unchanged.
    assert!(store.suggest(&id, false).unwrap().repeated);
}

#[test]
fn torn_final_write_is_discarded() {
    let ds = synthetic(400, 21);
    let dir = tempfile::tempdir().unwrap();
    let (id, before, path) = {
        let store = CampaignStore::open(dir.path()).unwrap();
        let id = new_campaign(&store, &ds);
        run_cycles(&store, &id, &ds, 2);
        let before = serde_json::to_vec(&store.summary(&id).unwrap()).unwrap();
        (id.clone(), before, store.log_path(&id))
    };
    let clean_len = std::fs::metadata(&path).unwrap().len();
    // A crash mid-append leaves half a record without its newline.
    let mut f = OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"seq":5,"kind":"batch_suggested","timestamp_ms":1,"payload":{"cycle":2,"ligand_"#)
        .unwrap();
    drop(f);

    let store = CampaignStore::open(dir.path()).unwrap();
    assert_eq!(serde_json::to_vec(&store.summary(&id).unwrap()).unwrap(), before);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), clean_len);
    run_cycles(&store, &id, &ds, 1);
    let seqs: Vec<u64> = read_events(&path).unwrap().iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (0..7).collect::<Vec<u64>>());
}

#[test]
fn restart_does_not_change_later_suggestions() {
    let ds = synthetic(500, 22);
    let straight_dir = tempfile::tempdir().unwrap();
    let straight = CampaignStore::open(straight_dir.path()).unwrap();
    let id = new_campaign(&straight, &ds);
    let expected = run_cycles(&straight, &id, &ds, 5);

    let dir = tempfile::tempdir().unwrap();
    let mut got = {
        let store = CampaignStore::open(dir.path()).unwrap();
        let id = new_campaign(&store, &ds);
        run_cycles(&store, &id, &ds, 2)
    };
    let store = CampaignStore::open(dir.path()).unwrap();
    got.extend(run_cycles(&store, &id, &ds, 3));
    assert_eq!(got, expected);
}

#[test]
fn every_prefix_replays_to_a_valid_state() {
    let ds = synthetic(300, 23);
    let dir = tempfile::tempdir().unwrap();
    let store = CampaignStore::open(dir.path()).unwrap();
    let id = new_campaign(&store, &ds);
    run_cycles(&store, &id, &ds, 3);
    let events = store.events(&id).unwrap();
    assert_eq!(events.len(), 7);
    for n in 1..=events.len() {
        let c = Campaign::replay(&id, &events[..n]).unwrap();
        let s = c.summary();
        assert_eq!(s.last_seq, n as u64 - 1);
        assert_eq!(s.seen_count, 10 * ((n - 1) / 2));
    }
    let full = Campaign::replay(&id, &events).unwrap().summary();
    assert_eq!(full, store.summary(&id).unwrap());
}

#[test]
fn gaps_and_corruption_are_detected() {
    let ds = synthetic(300, 24);
    let dir = tempfile::tempdir().unwrap();
    let store = CampaignStore::open(dir.path()).unwrap();
    let id = new_campaign(&store, &ds);
    run_cycles(&store, &id, &ds, 2);
    let events = store.events(&id).unwrap();
    let mut gapped = events.clone();
    gapped.remove(2);
    assert!(matches!(Campaign::replay(&id, &gapped), Err(ServiceError::Replay(_))));

    let path = store.log_path(&id);
    drop(store);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{not json}";
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert!(matches!(CampaignStore::open(dir.path()), Err(ServiceError::CorruptLog { line: 3, .. })));
}
