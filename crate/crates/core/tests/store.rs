use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::sync::{Arc, Barrier};

use plforge::store::{RecordKind, Store, StoreError};
use proptest::prelude::*;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
enum Op {
    Insert(usize, usize, Value),
    Update(usize, usize, u64, Value),
    Upsert(usize, usize, Value),
}

fn payload() -> impl Strategy<Value = Value> {
    (any::<i64>(), prop::num::f64::NORMAL | prop::num::f64::ZERO, "[a-z ]{0,12}", any::<bool>())
        .prop_map(|(i, f, s, b)| json!({"i": i, "f": f, "s": s, "b": b, "nested": [i, {"s": s}]}))
}

fn op() -> impl Strategy<Value = Op> {
    let kind = 0..RecordKind::ALL.len();
    let id = 0usize..4;
    prop_oneof![
        (kind.clone(), id.clone(), payload()).prop_map(|(k, i, p)| Op::Insert(k, i, p)),
        (kind.clone(), id.clone(), 0u64..4, payload()).prop_map(|(k, i, v, p)| Op::Update(k, i, v, p)),
        (kind, id, payload()).prop_map(|(k, i, p)| Op::Upsert(k, i, p)),
    ]
}

type Model = BTreeMap<(RecordKind, String), (u64, Value)>;

fn snapshot(store: &Store) -> Model {
    RecordKind::ALL
        .iter()
        .flat_map(|&k| store.list(k).into_iter().map(move |r| ((k, r.id), (r.version, r.payload))))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn log_replay_matches_a_map_model(ops in prop::collection::vec(op(), 0..40)) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut model: Model = BTreeMap::new();
        for op in ops {
            match op {
                Op::Insert(k, i, p) => {
                    let key = (RecordKind::ALL[k], format!("id{i}"));
                    let res = store.insert(key.0, &key.1, p.clone());
                    match model.entry(key) {
                        Entry::Occupied(_) => {
                            let exists = matches!(res, Err(StoreError::Exists { .. }));
                            prop_assert!(exists);
                        }
                        Entry::Vacant(slot) => {
                            prop_assert_eq!(res.unwrap().version, 1);
                            slot.insert((1, p));
                        }
                    }
                }
                Op::Update(k, i, v, p) => {
                    let key = (RecordKind::ALL[k], format!("id{i}"));
                    let res = store.update(key.0, &key.1, v, p.clone());
                    match model.get_mut(&key) {
                        Some((version, payload)) if *version == v => {
                            prop_assert_eq!(res.unwrap().version, v + 1);
                            *version += 1;
                            *payload = p;
                        }
                        Some((version, _)) => {
                            let conflict = matches!(res, Err(StoreError::Conflict { current, .. }) if current == *version);
                            prop_assert!(conflict);
                        }
                        None => {
                            let missing = matches!(res, Err(StoreError::NotFound { .. }));
                            prop_assert!(missing);
                        }
                    }
                }
                Op::Upsert(k, i, p) => {
                    let key = (RecordKind::ALL[k], format!("id{i}"));
                    let r = store.upsert(key.0, &key.1, p.clone()).unwrap();
                    let entry = model.entry(key).or_insert((0, Value::Null));
                    entry.0 += 1;
                    entry.1 = p;
                    prop_assert_eq!(r.version, entry.0);
                }
            }
        }
        prop_assert_eq!(&snapshot(&store), &model);
        drop(store);

        let reopened = Store::open(dir.path()).unwrap();
        prop_assert_eq!(&snapshot(&reopened), &model);

        let export = dir.path().join("export.jsonl");
        prop_assert_eq!(reopened.export(&export).unwrap(), model.len());
        let other = tempfile::tempdir().unwrap();
        let copy = Store::open(other.path()).unwrap();
        copy.import(&export).unwrap();
        prop_assert_eq!(&snapshot(&copy), &model);

        reopened.compact().unwrap();
        drop(reopened);
        prop_assert_eq!(&snapshot(&Store::open(dir.path()).unwrap()), &model);
    }
}

#[test]
fn concurrent_writers_at_one_version_have_one_winner() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    store.insert(RecordKind::ReviewTask, "t", json!({"n": 0})).unwrap();
    let barrier = Arc::new(Barrier::new(8));
    let handles: Vec<_> = (0..8)
        .map(|n| {
            let (store, barrier) = (store.clone(), barrier.clone());
            std::thread::spawn(move || {
                barrier.wait();
                store.update(RecordKind::ReviewTask, "t", 1, json!({"n": n})).is_ok()
            })
        })
        .collect();
    let wins = handles.into_iter().map(|h| h.join().unwrap()).filter(|&ok| ok).count();
    assert_eq!(wins, 1);
    assert_eq!(store.get(RecordKind::ReviewTask, "t").unwrap().version, 2);
}

#[test]
fn import_keeps_the_higher_version() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let old = Store::open(a.path()).unwrap();
    old.insert(RecordKind::Plan, "p", json!({"v": "old"})).unwrap();
    let new = Store::open(b.path()).unwrap();
    new.insert(RecordKind::Plan, "p", json!({"v": "first"})).unwrap();
    new.update(RecordKind::Plan, "p", 1, json!({"v": "new"})).unwrap();

    let export = a.path().join("old.jsonl");
    old.export(&export).unwrap();
    new.import(&export).unwrap();
    assert_eq!(new.get(RecordKind::Plan, "p").unwrap().payload, json!({"v": "new"}));

    let export = b.path().join("new.jsonl");
    new.export(&export).unwrap();
    old.import(&export).unwrap();
    let r = old.get(RecordKind::Plan, "p").unwrap();
    assert_eq!((r.version, r.payload), (2, json!({"v": "new"})));
}
