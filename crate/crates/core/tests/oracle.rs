mod support;

use std::collections::BTreeSet;

use graphvec::bitmap::Bitmap;
use graphvec::dist::wire::{self, Message, SearchRequest, SearchResponse, SegmentResult};
use graphvec::predicate::{CmpOp, Predicate};
use graphvec::query::{merge_local_topk, Hit, VertexSet};
use graphvec::schema::Value;
use graphvec::storage::{SegmentId, VertexId};
use proptest::prelude::*;

use support::instance::check_seed;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn every_operation_matches_the_model(seed in any::<u64>()) {
        let c = check_seed(seed).map_err(TestCaseError::fail)?;
        prop_assert!(c.queries > 0);
    }
}

fn hit_strategy() -> impl Strategy<Value = Hit> {
    (0u32..3, 0u32..200, 0u8..16)
        .prop_map(|(t, o, d)| Hit::new(VertexId::new(t, o), d as f32 / 4.0))
}

proptest! {
    #[test]
    fn merge_equals_global_sort(lists in prop::collection::vec(prop::collection::vec(hit_strategy(), 0..20), 0..8), k in 0usize..40) {
        let mut all: Vec<Hit> = lists.iter().flatten().copied().collect();
        all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.vertex.cmp(&b.vertex)));
        all.truncate(k);
        prop_assert_eq!(merge_local_topk(lists, k), all);
    }

    #[test]
    fn vertex_set_algebra(a in prop::collection::btree_set((0u32..2, 0u32..300), 0..120),
                          b in prop::collection::btree_set((0u32..2, 0u32..300), 0..120),
                          cap in prop::sample::select(vec![1usize, 7, 64, 1024])) {
        let vs = |s: &BTreeSet<(u32, u32)>| VertexSet::from_vertices(cap, s.iter().map(|&(t, o)| VertexId::new(t, o)));
        let back = |s: &VertexSet| s.iter().map(|v| (v.vtype, v.ordinal)).collect::<BTreeSet<_>>();
        let mut u = vs(&a);
        u.union_with(&vs(&b));
        prop_assert_eq!(back(&u), a.union(&b).copied().collect());
        let mut i = vs(&a);
        i.intersect_with(&vs(&b));
        prop_assert_eq!(back(&i), a.intersection(&b).copied().collect());
        let mut d = vs(&a);
        d.difference_with(&vs(&b));
        prop_assert_eq!(back(&d), a.difference(&b).copied().collect());
        prop_assert_eq!(vs(&a).len(), a.len());
        for &(t, o) in &b {
            prop_assert_eq!(vs(&a).contains(VertexId::new(t, o)), a.contains(&(t, o)));
        }
    }

    #[test]
    fn bitmap_matches_bool_vector(bits in prop::collection::vec(any::<bool>(), 0..300),
                                  other in prop::collection::vec(any::<bool>(), 0..300)) {
        let n = bits.len().max(other.len());
        let mk = |v: &Vec<bool>| Bitmap::from_indices(n, v.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i));
        let get = |v: &Vec<bool>, i: usize| v.get(i).copied().unwrap_or(false);
        let (x, y) = (mk(&bits), mk(&other));
        let mut and = x.clone();
        and.intersect_with(&y);
        let mut or = x.clone();
        or.union_with(&y);
        let mut diff = x.clone();
        diff.difference_with(&y);
        for i in 0..n {
            prop_assert_eq!(and.contains(i), get(&bits, i) && get(&other, i));
            prop_assert_eq!(or.contains(i), get(&bits, i) || get(&other, i));
            prop_assert_eq!(diff.contains(i), get(&bits, i) && !get(&other, i));
        }
        prop_assert_eq!(x.count_ones(), bits.iter().filter(|b| **b).count());
        let words = Bitmap::from_words(n, x.words().to_vec());
        prop_assert_eq!(words, x);
    }
}

fn predicate_strategy() -> impl Strategy<Value = Predicate> {
    let leaf = prop_oneof![
        Just(Predicate::True),
        ("[a-z]{1,6}", 0usize..6, any::<i64>()).prop_map(|(a, op, v)| Predicate::cmp(
            a,
            op_of(op),
            Value::Int(v)
        )),
        (
            "[a-z]{1,6}",
            0usize..6,
            any::<f64>().prop_filter("finite", |f| f.is_finite())
        )
            .prop_map(|(a, op, v)| Predicate::cmp(a, op_of(op), Value::Float(v))),
        ("[a-z]{1,6}", ".{0,12}").prop_map(|(a, s)| Predicate::cmp(a, CmpOp::Eq, Value::Str(s))),
        ("[a-z]{1,6}", any::<bool>()).prop_map(|(a, b)| Predicate::cmp(
            a,
            CmpOp::Ne,
            Value::Bool(b)
        )),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Predicate::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Predicate::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|a| Predicate::Not(Box::new(a))),
        ]
    })
}

fn op_of(i: usize) -> CmpOp {
    [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ][i]
}

fn filter_strategy() -> impl Strategy<Value = Option<Vec<(SegmentId, Bitmap)>>> {
    prop::option::of(prop::collection::vec(
        (
            0u32..4,
            0u32..64,
            prop::collection::vec(any::<bool>(), 0..200),
        )
            .prop_map(|(t, o, bits)| {
                let n = bits.len();
                (
                    SegmentId::new(t, o),
                    Bitmap::from_indices(
                        n,
                        bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i),
                    ),
                )
            }),
        0..6,
    ))
}

proptest! {
    #[test]
    fn request_round_trips_bit_exactly(query_id in any::<u64>(), tid in any::<u64>(), k in any::<u32>(), ef in any::<u32>(),
                                       query in prop::collection::vec(any::<f32>(), 0..200),
                                       attrs in prop::collection::vec(("[A-Za-z]{1,8}", "[a-z_]{1,8}"), 0..4),
                                       predicate in prop::option::of(predicate_strategy()),
                                       filter in filter_strategy()) {
        let req = SearchRequest { query_id, tid, partition: 1, partitions: 4, seed: 3, k, ef, attrs, query, predicate, filter };
        let bytes = wire::encode(&Message::Request(req.clone()));
        let (back, used) = wire::decode(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        let Message::Request(got) = back else { return Err(TestCaseError::fail("wrong kind")) };
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&got.query), bits(&req.query));
        prop_assert_eq!(wire::encode(&Message::Request(got)), bytes);
    }

    #[test]
    fn response_round_trips(segments in prop::collection::vec(
        (0u32..4, 0u32..64, any::<bool>(), any::<u32>(), prop::collection::vec((any::<u64>(), any::<f32>()), 0..20)), 0..8)) {
        let resp = SearchResponse {
            query_id: 9,
            partition: 2,
            segments: segments.into_iter().map(|(t, o, bf, valid, hits)| SegmentResult {
                segment: SegmentId::new(t, o),
                bruteforce: bf,
                valid,
                hits: hits.into_iter().map(|(v, d)| Hit::new(VertexId::from_u64(v), d)).collect(),
            }).collect(),
        };
        let bytes = wire::encode(&Message::Response(resp));
        let (back, _) = wire::decode(&bytes).unwrap();
        prop_assert_eq!(wire::encode(&back), bytes);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = wire::decode(&bytes);
    }
}
