use std::collections::BTreeMap;

use cmt_core::aes::Key128;
use cmt_core::keys::{MasterKey, TenantId};
use cmt_core::store::{RowId, Store, StoreError, TableSchema};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Insert {
        tenant: usize,
        value: String,
    },
    Update {
        tenant: usize,
        pick: usize,
        value: String,
    },
    Delete {
        tenant: usize,
        pick: usize,
    },
}

fn op_strategy() -> impl Strategy<Value = Op> {
    let tenant = 0..4usize;
    let value = "[ -~]{0,24}";
    prop_oneof![
        3 => (tenant.clone(), value).prop_map(|(tenant, value)| Op::Insert { tenant, value }),
        1 => (tenant.clone(), any::<usize>(), value).prop_map(|(tenant, pick, value)| Op::Update { tenant, pick, value }),
        1 => (tenant, any::<usize>()).prop_map(|(tenant, pick)| Op::Delete { tenant, pick }),
    ]
}

fn tenants() -> Vec<TenantId> {
    (0..4)
        .map(|i| TenantId::new(format!("t{i}")).unwrap())
        .collect()
}

fn master() -> MasterKey {
    MasterKey::new(Key128::new([0x33; 16]))
}

fn schema() -> TableSchema {
    TableSchema::new("props", ["a", "b"]).unwrap()
}

type Model = BTreeMap<RowId, (usize, String)>;

fn apply(
    store: &mut Store,
    model: &mut Model,
    ts: &[TenantId],
    op: &Op,
) -> Result<(), TestCaseError> {
    let pick_row = |pick: usize, model: &Model| -> Option<RowId> {
        let ids: Vec<RowId> = model.keys().copied().collect();
        (!ids.is_empty()).then(|| ids[pick % ids.len()])
    };
    match op {
        Op::Insert { tenant, value } => {
            let id = store
                .insert(&ts[*tenant], &[("a", value.as_str()), ("b", "x")])
                .unwrap();
            prop_assert!(model.keys().all(|&k| k < id));
            model.insert(id, (*tenant, value.clone()));
        }
        Op::Update {
            tenant,
            pick,
            value,
        } => {
            if let Some(id) = pick_row(*pick, model) {
                let owner = model[&id].0;
                let res = store.update(&ts[*tenant], id, &[("a", value.as_str()), ("b", "x")]);
                if owner == *tenant {
                    prop_assert!(res.is_ok());
                    model.insert(id, (owner, value.clone()));
                } else {
                    prop_assert!(matches!(res, Err(StoreError::IsolationDenied(_))));
                }
            }
        }
        Op::Delete { tenant, pick } => {
            if let Some(id) = pick_row(*pick, model) {
                let owner = model[&id].0;
                let res = store.delete(&ts[*tenant], id);
                if owner == *tenant {
                    prop_assert!(res.is_ok());
                    model.remove(&id);
                } else {
                    prop_assert!(matches!(res, Err(StoreError::IsolationDenied(_))));
                }
            }
        }
    }
    Ok(())
}

fn snapshot(store: &Store, ts: &[TenantId]) -> Vec<Vec<(RowId, String)>> {
    ts.iter()
        .map(|t| {
            store
                .list(t)
                .unwrap()
                .into_iter()
                .map(|r| (r.row_id, r.get("a").unwrap().to_owned()))
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn replay_matches_in_memory_state(ops in prop::collection::vec(op_strategy(), 1..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.cmt");
        let ts = tenants();
        let mut store = Store::create(&path, &schema(), master()).unwrap();
        let mut model = Model::new();
        for op in &ops {
            apply(&mut store, &mut model, &ts, op)?;
        }
        let in_memory = snapshot(&store, &ts);
        let last = store.last_row_id();
        drop(store);

        let reopened = Store::open(&path, master()).unwrap();
        prop_assert_eq!(snapshot(&reopened, &ts), in_memory.clone());
        prop_assert_eq!(reopened.last_row_id(), last);

        for (i, rows) in in_memory.iter().enumerate() {
            let expected: Vec<(RowId, String)> = model
                .iter()
                .filter(|(_, (owner, _))| *owner == i)
                .map(|(id, (_, v))| (*id, v.clone()))
                .collect();
            prop_assert_eq!(rows, &expected);
        }
    }

    #[test]
    fn ids_increase_across_restarts(batches in prop::collection::vec(1..5usize, 1..5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ids.cmt");
        let t = TenantId::new("solo").unwrap();
        Store::init_file(&path, &schema()).unwrap();
        let mut last = RowId(0);
        for n in batches {
            let mut store = Store::open(&path, master()).unwrap();
            for _ in 0..n {
                let id = store.insert(&t, &[("a", "1"), ("b", "2")]).unwrap();
                prop_assert!(id > last);
                last = id;
            }
            store.delete(&t, last).unwrap();
        }
    }
}
