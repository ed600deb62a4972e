use mltr::letor::{parse_dataset, parse_record, write_dataset, LetorError};
use mltr_core::synthetic::{generate, SyntheticSpec};
use mltr_core::{Dataset, Document, QueryGroup};
use proptest::prelude::*;

fn round_trip(ds: &Dataset) -> Dataset {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf).unwrap();
    parse_dataset(buf.as_slice(), Some(ds.feature_dims), &ds.name).unwrap()
}

/// Field-by-field comparison, independent of the derived `PartialEq`.
fn assert_same(a: &Dataset, b: &Dataset) {
    assert_eq!(a.feature_dims, b.feature_dims);
    assert_eq!(a.queries.len(), b.queries.len());
    for (qa, qb) in a.queries.iter().zip(&b.queries) {
        assert_eq!(qa.query_id, qb.query_id);
        assert_eq!(qa.documents.len(), qb.documents.len());
        for (da, db) in qa.documents.iter().zip(&qb.documents) {
            assert_eq!(da.relevance, db.relevance);
            assert_eq!(da.comment, db.comment);
            let bits = |d: &Document| d.features.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(da), bits(db));
        }
    }
}

#[test]
fn thousand_line_sample() {
    let spec = SyntheticSpec {
        queries: 25,
        min_docs: 40,
        max_docs: 40,
        feature_dims: 46,
        seed: 2008,
        ..SyntheticSpec::default()
    };
    let ds = generate(&spec).unwrap();
    let mut text = Vec::new();
    write_dataset(&ds, &mut text).unwrap();
    assert_eq!(text.iter().filter(|&&b| b == b'\n').count(), 1000);
    let once = parse_dataset(text.as_slice(), Some(46), "synthetic").unwrap();
    assert_same(&ds, &once);
    let mut again = Vec::new();
    write_dataset(&once, &mut again).unwrap();
    assert_eq!(text, again);
}

#[test]
fn sparse_input_round_trips_by_value() {
    let text = "2 qid:10 1:0.5 3:1.0 # GX001\n0 qid:10 46:-3e-5\n1 qid:11 2:7 #docid = GX2\n";
    let ds = parse_dataset(text.as_bytes(), Some(46), "x").unwrap();
    assert_eq!(ds.queries[0].documents[0].features[..3], [0.5, 0.0, 1.0]);
    assert_eq!(ds.queries[0].documents[1].features[45], -3e-5);
    assert_same(&ds, &round_trip(&ds));
}

#[test]
fn errors_carry_line_numbers() {
    let text = "0 qid:1 1:0.5\n\n1 qid:1 1:x\n";
    match parse_dataset(text.as_bytes(), None, "x") {
        Err(LetorError::MalformedLine { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(parse_record("1 qid:1 -2:0.5", 1).is_err());
}

fn arb_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(-0.0),
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        (1u32..1000).prop_map(|k| k as f64 / 7.0),
    ]
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..6, 0usize..5).prop_flat_map(|(dims, nq)| {
        let doc = (prop::collection::vec(arb_value(), dims), 0u32..5, prop::option::of("[a-zA-Z0-9=_.\\- ]{0,12}"))
            .prop_map(|(features, relevance, comment)| Document {
                features,
                relevance,
                comment: comment.map(|c| c.trim().to_string()).filter(|c| !c.is_empty() && !c.contains('#')),
            });
        prop::collection::vec(prop::collection::vec(doc, 1..5), nq).prop_map(move |groups| {
            let queries = groups
                .into_iter()
                .enumerate()
                .map(|(i, docs)| QueryGroup::new(format!("q{i}"), docs))
                .collect();
            Dataset::new("p", dims, queries).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn parse_write_parse_identity(ds in arb_dataset()) {
        let back = round_trip(&ds);
        assert_same(&ds, &back);
        prop_assert_eq!(&back, &ds);
    }

    #[test]
    fn document_order_is_preserved(ids in prop::collection::vec(0u8..4, 1..30)) {
        let text: String = ids.iter().enumerate().map(|(j, q)| format!("0 qid:{q} 1:{j}\n")).collect();
        let ds = parse_dataset(text.as_bytes(), None, "o").unwrap();
        let mut first_seen = Vec::new();
        for q in &ids {
            if !first_seen.contains(q) {
                first_seen.push(*q);
            }
        }
        let got: Vec<String> = ds.queries.iter().map(|q| q.query_id.clone()).collect();
        let want: Vec<String> = first_seen.iter().map(|q| q.to_string()).collect();
        prop_assert_eq!(got, want);
        for g in &ds.queries {
            let pos: Vec<f64> = g.documents.iter().map(|d| d.features[0]).collect();
            prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn never_yields_non_finite(v in "(nan|NaN|inf|-inf|infinity|1e400)") {
        let line = format!("0 qid:1 1:{v}");
        let rejected = matches!(parse_record(&line, 1), Err(LetorError::MalformedLine { .. }));
        prop_assert!(rejected);
    }
}
