use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use sable_core::engine::{merge_default, TraversalMap, CONFLICT_MESSAGE};
use sable_core::value::AspectValue;

const CASES: u32 = 10_000;

// Aspect names determine the value kind, so random maps never mix kinds.
fn bool_or_set() -> impl Strategy<Value = TraversalMap> {
    let b = prop::option::of(any::<bool>().prop_map(AspectValue::Bool));
    let s = |tag: &'static str| {
        prop::option::of(
            prop::collection::btree_set(0..6u8, 0..5).prop_map(move |xs| {
                AspectValue::Set(
                    xs.into_iter()
                        .map(|x| AspectValue::Str(format!("{tag}{x}")))
                        .collect(),
                )
            }),
        )
    };
    (b.clone(), b, s("a"), s("b")).prop_map(|(b1, b2, s1, s2)| {
        let mut m = TraversalMap::new();
        for (k, v) in [("B1", b1), ("B2", b2), ("S1", s1), ("S2", s2)] {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        }
        m
    })
}

/// Independent oracle: per key, or / union / the value present.
fn oracle(a: &TraversalMap, b: &TraversalMap) -> TraversalMap {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let mut out = BTreeMap::new();
    for k in keys {
        let v = match (a.get(k), b.get(k)) {
            (Some(AspectValue::Bool(x)), Some(AspectValue::Bool(y))) => AspectValue::Bool(*x || *y),
            (Some(AspectValue::Set(x)), Some(AspectValue::Set(y))) => AspectValue::Set(x | y),
            (Some(x), None) | (None, Some(x)) => x.clone(),
            other => panic!("mixed kinds {other:?}"),
        };
        out.insert(k.clone(), v);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn merge_is_commutative(a in bool_or_set(), b in bool_or_set()) {
        prop_assert_eq!(merge_default(&a, &b).unwrap(), merge_default(&b, &a).unwrap());
    }

    #[test]
    fn merge_is_associative(a in bool_or_set(), b in bool_or_set(), c in bool_or_set()) {
        let left = merge_default(&merge_default(&a, &b).unwrap(), &c).unwrap();
        let right = merge_default(&a, &merge_default(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn merge_matches_the_oracle_and_is_idempotent(a in bool_or_set(), b in bool_or_set()) {
        prop_assert_eq!(merge_default(&a, &b).unwrap(), oracle(&a, &b));
        prop_assert_eq!(merge_default(&a, &a).unwrap(), a);
    }

    #[test]
    fn unequal_scalars_conflict(x in any::<i64>(), y in any::<i64>(), s in "[a-z]{0,4}", t in "[a-z]{0,4}") {
        let map = |v: AspectValue| TraversalMap::from([("X".to_string(), v)]);
        let ints = merge_default(&map(AspectValue::Int(x)), &map(AspectValue::Int(y)));
        if x == y {
            prop_assert_eq!(ints.unwrap(), map(AspectValue::Int(x)));
        } else {
            let err = ints.unwrap_err();
            prop_assert!(err.to_string().starts_with("Conflict of values"));
            prop_assert_eq!(err.aspect.as_str(), "X");
        }
        let strs = merge_default(&map(AspectValue::Str(s.clone())), &map(AspectValue::Str(t.clone())));
        prop_assert_eq!(strs.is_err(), s != t);
    }
}

#[test]
fn mixed_kinds_conflict_with_the_documented_message() {
    let a = TraversalMap::from([("X".to_string(), AspectValue::Bool(true))]);
    let b = TraversalMap::from([("X".to_string(), AspectValue::Set(BTreeSet::new()))]);
    let err = merge_default(&a, &b).unwrap_err();
    assert!(err.to_string().starts_with(CONFLICT_MESSAGE));
    let l = TraversalMap::from([(
        "L".to_string(),
        AspectValue::List(vec![AspectValue::Int(1)]),
    )]);
    let r = TraversalMap::from([("L".to_string(), AspectValue::List(vec![]))]);
    assert!(merge_default(&l, &r).is_err());
    assert_eq!(merge_default(&l, &l).unwrap(), l);
}
