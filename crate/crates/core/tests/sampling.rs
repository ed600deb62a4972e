use mltr_core::dataset::{normalize_features, split_by_query, SplitRatios};
use mltr_core::sampling::{make_finetune_split, make_meta_episode, sample_pn, SamplingStrategy, SparsityProfile};
use mltr_core::seeding;
use mltr_core::smote::{self, smote_oversample};
use mltr_core::{Dataset, Document, QueryGroup};
use proptest::prelude::*;
use std::collections::HashSet;

fn group(pos: usize, neg: usize) -> QueryGroup {
    let docs = (0..pos + neg)
        .map(|i| Document::new(vec![i as f64, (i * i) as f64], if i % 4 == 1 && i / 4 < pos { 1 } else { 0 }))
        .collect::<Vec<_>>();
    // re-label so exactly `pos` positives exist, spread through the list
    let mut docs = docs;
    let mut left = pos;
    for (i, d) in docs.iter_mut().enumerate() {
        d.relevance = 0;
        if left > 0 && (i % 3 == 1 || pos + neg - i <= left) {
            d.relevance = 1 + (i % 2) as u32;
            left -= 1;
        }
    }
    QueryGroup::new("g", docs)
}

fn counts(g: &QueryGroup, items: &[usize]) -> (usize, usize) {
    let pos = items.iter().filter(|&&i| g.documents[i].relevance > 0).count();
    (pos, items.len() - pos)
}

fn distinct(items: &[usize]) -> bool {
    items.iter().collect::<HashSet<_>>().len() == items.len()
}

fn p(s: &str) -> SparsityProfile {
    s.parse().unwrap()
}

#[test]
fn invariants_over_ten_thousand_draws() {
    let g = group(3, 50);
    let profile = p("p1n9");
    let mut rng = seeding::rng_from_seed(99);
    let draws = 10_000;
    let mut freq = vec![0usize; g.len()];
    for _ in 0..draws {
        let s = sample_pn(&g, profile, &mut rng).unwrap();
        assert_eq!(counts(&g, &s), (1, 9));
        assert!(distinct(&s));
        for i in s {
            freq[i] += 1;
        }

        let ep = make_meta_episode(&g, profile, SamplingStrategy::OnePositive, 3, &mut rng).unwrap();
        for t in &ep.train_steps {
            assert_eq!(counts(&g, t), (1, 9));
        }
        assert_eq!(counts(&g, &ep.test_items), (1, 9));
        assert!(ep.test_items.iter().all(|i| !ep.final_train().contains(i)));

        let split = make_finetune_split(&g, profile, &mut rng).unwrap();
        let mut all: Vec<usize> = split.tuning.iter().chain(&split.eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..g.len()).collect::<Vec<_>>());
    }
    // each positive is drawn with probability 1/3, each negative 9/50
    for (i, &c) in freq.iter().enumerate() {
        let p = if g.documents[i].relevance > 0 { 1.0 / 3.0 } else { 9.0 / 50.0 };
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let f = c as f64 / draws as f64;
        assert!((f - p).abs() <= 4.0 * sigma, "item {i}: {f} vs {p}");
    }
}

#[test]
fn finetune_split_frequencies() {
    let g = group(3, 27);
    let mut rng = seeding::rng_from_seed(5);
    let draws = 10_000;
    let mut freq = vec![0usize; g.len()];
    for _ in 0..draws {
        let s = make_finetune_split(&g, p("p1n9"), &mut rng).unwrap();
        assert_eq!((s.tuning.len(), s.eval.len()), (10, 20));
        for i in s.tuning {
            freq[i] += 1;
        }
    }
    for (i, &c) in freq.iter().enumerate() {
        let p = if g.documents[i].relevance > 0 { 1.0 / 3.0 } else { 9.0 / 27.0 };
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((c as f64 / draws as f64 - p).abs() <= 4.0 * sigma);
    }
}

#[test]
fn strategy_examples() {
    let mut rng = seeding::rng_from_seed(1);
    let g = group(2, 20);
    let ep = make_meta_episode(&g, p("p1n9"), SamplingStrategy::Fixed, 1, &mut rng).unwrap();
    assert!(ep.test_items.iter().all(|i| !ep.train_steps[0].contains(i)));

    let g = group(6, 60);
    let ep = make_meta_episode(&g, p("p2n18"), SamplingStrategy::MultiplePositive(2), 2, &mut rng).unwrap();
    assert_eq!(ep.train_steps.len(), 2);
    for t in &ep.train_steps {
        assert_eq!(counts(&g, t), (2, 18));
    }
    assert!(sample_pn(&group(0, 10), p("p1n9"), &mut rng).is_err());
}

fn small_dataset(queries: usize, seed: u64) -> Dataset {
    let mut rng = seeding::rng_from_seed(seed);
    use rand::Rng;
    let qs = (0..queries)
        .map(|q| {
            let n = rng.random_range(1..8);
            let docs = (0..n).map(|_| Document::new(vec![rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0)], rng.random_range(0..3))).collect();
            QueryGroup::new(format!("q{q}"), docs)
        })
        .collect();
    Dataset::new("s", 2, qs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_respect_counts_and_exclusion(
        pos in 2usize..8,
        neg in 18usize..40,
        steps in 1usize..4,
        seed in any::<u64>(),
        strategy in prop_oneof![Just(SamplingStrategy::Fixed), Just(SamplingStrategy::OnePositive), Just(SamplingStrategy::MultiplePositive(1))],
    ) {
        let g = group(pos, neg);
        let mut rng = seeding::rng_from_seed(seed);
        let ep = make_meta_episode(&g, p("p1n9"), strategy, steps, &mut rng).unwrap();
        prop_assert_eq!(ep.train_steps.len(), steps);
        for t in &ep.train_steps {
            prop_assert_eq!(counts(&g, t), (1, 9));
            prop_assert!(distinct(t));
        }
        prop_assert_eq!(counts(&g, &ep.test_items), (1, 9));
        prop_assert!(ep.test_items.iter().all(|i| !ep.final_train().contains(i)));
        if strategy == SamplingStrategy::Fixed {
            prop_assert!(ep.train_steps.windows(2).all(|w| w[0] == w[1]));
        }
        // same seed, same episode
        let again = make_meta_episode(&g, p("p1n9"), strategy, steps, &mut seeding::rng_from_seed(seed)).unwrap();
        prop_assert_eq!(ep, again);
    }

    #[test]
    fn query_split_is_a_partition(queries in 3usize..60, seed in any::<u64>()) {
        let ds = small_dataset(queries, seed);
        if queries < 10 {
            // a 10% share would be empty
            prop_assert!(split_by_query(&ds, SplitRatios::DEFAULT, seed).is_err());
            return Ok(());
        }
        let (tr, va, te) = split_by_query(&ds, SplitRatios::DEFAULT, seed).unwrap();
        let ids = |d: &Dataset| d.queries.iter().map(|q| q.query_id.clone()).collect::<HashSet<_>>();
        let (a, b, c) = (ids(&tr), ids(&va), ids(&te));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(a.len() + b.len() + c.len(), queries);
        prop_assert_eq!((va.queries.len(), te.queries.len()), ((queries as f64 * 0.1).floor() as usize, (queries as f64 * 0.1).floor() as usize));
        prop_assert_eq!(split_by_query(&ds, SplitRatios::DEFAULT, seed).unwrap(), (tr, va, te));
    }

    #[test]
    fn normalization_is_per_query_min_max(queries in 1usize..10, seed in any::<u64>()) {
        let ds = small_dataset(queries, seed);
        let out = normalize_features(&ds);
        for (q, nq) in ds.queries.iter().zip(&out.queries) {
            for f in 0..2 {
                let col: Vec<f64> = q.documents.iter().map(|d| d.features[f]).collect();
                let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                for (x, d) in col.iter().zip(&nq.documents) {
                    let expected = if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
                    prop_assert!((d.features[f] - expected).abs() < 1e-12);
                }
            }
            prop_assert_eq!(q.labels(), nq.labels());
        }
    }

    #[test]
    fn smote_points_lie_on_parent_segments(n_pos in 2usize..12, dims in 1usize..6, n_syn in 0usize..200, k in 1usize..6, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = seeding::rng_from_seed(seed);
        let pool: Vec<Vec<f64>> = (0..n_pos).map(|_| (0..dims).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let out = smote_oversample(&pool, k, n_syn, &mut rng).unwrap();
        prop_assert_eq!(out.len(), n_syn);
        for s in &out {
            let (x, nn) = (&pool[s.base], &pool[s.neighbor]);
            prop_assert!(s.base != s.neighbor);
            // recover u from the largest-gap coordinate
            let j = (0..dims).max_by(|&a, &b| (nn[a] - x[a]).abs().total_cmp(&(nn[b] - x[b]).abs())).unwrap();
            if (nn[j] - x[j]).abs() > 1e-9 {
                let u = (s.features[j] - x[j]) / (nn[j] - x[j]);
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(&u));
                for d in 0..dims {
                    prop_assert!((s.features[d] - (x[d] + u * (nn[d] - x[d]))).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn smote_augmentation_counts() {
    let ds = small_dataset(20, 3);
    let positives = ds.num_positives();
    let aug = smote::augment_dataset(&ds, 5, 0.5, &mut seeding::rng_from_seed(4)).unwrap();
    assert_eq!(aug.synthetic, positives / 2);
    assert_eq!(aug.dataset.num_documents(), ds.num_documents() + positives / 2);
    assert_eq!(aug.dataset.num_positives(), positives + positives / 2);
    assert!(aug.dataset.queries.iter().zip(&ds.queries).all(|(a, b)| a.documents[..b.len()] == b.documents[..]));
    assert!(smote_oversample(&[vec![1.0]], 3, 4, &mut seeding::rng_from_seed(0)).is_err());
}
