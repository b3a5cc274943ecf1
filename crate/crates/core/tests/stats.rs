use prism_core::stats::{
    aggregate, compare, one_sided_t_test, student_t_cdf, zscores, zscores_pooled, ModelKey, Pool, ScoreTable, Verdict,
};
use prism_core::Error;
use proptest::prelude::*;

fn key(name: &str) -> ModelKey {
    ModelKey::new("Visual Representations", name)
}

fn table(rows: &[(&str, &[Option<f64>])], benchmarks: &[&str]) -> ScoreTable {
    let keys: Vec<ModelKey> = rows.iter().map(|(n, _)| key(n)).collect();
    let mut t = ScoreTable::new(keys, benchmarks.iter().map(|b| b.to_string()).collect()).unwrap();
    for (m, (_, vals)) in rows.iter().enumerate() {
        for (b, v) in vals.iter().enumerate() {
            t.set(m, b, *v).unwrap();
        }
    }
    t
}

fn vqav2() -> ScoreTable {
    table(
        &[
            ("IN1K ViT-L 224px", &[Some(68.26)]),
            ("DINOv2 ViT-L 224px", &[Some(66.29)]),
            ("CLIP ViT-L 224px", &[Some(75.32)]),
            ("SigLIP ViT-SO 224px", &[Some(76.32)]),
        ],
        &["VQAv2"],
    )
}

#[test]
fn vqav2_visual_representation_zscores() {
    // exact oracle in hundredths: mean = Σx / n, pop var = (nΣx² − (Σx)²) / n²
    let xs: [i128; 4] = [6826, 6629, 7532, 7632];
    let n = xs.len() as i128;
    let s: i128 = xs.iter().sum();
    let s2: i128 = xs.iter().map(|x| x * x).sum();
    assert_eq!(s, 28619);
    let mean = s as f64 / (n as f64 * 100.0);
    let var_num = n * s2 - s * s;
    let std = (var_num as f64).sqrt() / (n as f64 * 100.0);
    assert!((mean - 71.5475).abs() < 1e-12);
    assert!((std - 4.3433).abs() < 1e-4);
    let want_sig = (7632.0 / 100.0 - mean) / std;
    assert!((want_sig - 1.099).abs() < 1e-3);

    let z = zscores(&vqav2()).unwrap();
    let got = z.value(&key("SigLIP ViT-SO 224px"), "VQAv2").unwrap();
    assert!((got - want_sig).abs() < 1e-12, "{got} vs {want_sig}");
    let total: f64 = (0..4).map(|m| z.get(m, 0).unwrap()).sum();
    assert!(total.abs() < 1e-12);
}

#[test]
fn zero_variance_and_short_columns() {
    let flat = table(&[("a", &[Some(50.0)]), ("b", &[Some(50.0)]), ("c", &[Some(50.0)])], &["X"]);
    let z = zscores(&flat).unwrap();
    assert!((0..3).all(|m| z.get(m, 0) == Some(0.0)));
    let short = table(&[("a", &[Some(50.0)]), ("b", &[None])], &["X"]);
    assert!(matches!(zscores(&short), Err(Error::InsufficientData(_))));
}

#[test]
fn missing_values_stay_missing_and_are_reported() {
    let t = table(
        &[
            ("a", &[Some(1.0), Some(10.0)]),
            ("b", &[Some(2.0), None]),
            ("c", &[Some(3.0), Some(30.0)]),
        ],
        &["X", "Y"],
    );
    let z = zscores(&t).unwrap();
    assert_eq!(z.get(1, 1), None);
    let aggs = aggregate(&z, None).unwrap();
    assert_eq!(aggs[1].present, 1);
    assert_eq!(aggs[1].missing, vec!["Y".to_string()]);
    assert_eq!(aggs[1].score, z.get(1, 0).unwrap());
    let only_y = vec!["Y".to_string()];
    assert!(matches!(aggregate(&z, Some(&only_y)), Err(Error::InsufficientData(_))));
    assert!(aggregate(&z, Some(&[])).is_err());
}

#[test]
fn aggregate_examples() {
    let z = table(&[("a", &[Some(1.0), Some(-1.0)]), ("b", &[Some(-1.0), Some(1.0)])], &["X", "Y"]);
    let aggs = aggregate(&z, None).unwrap();
    assert_eq!(aggs[0].score, 0.0);
    let x = vec!["X".to_string()];
    let single = aggregate(&z, Some(&x)).unwrap();
    assert_eq!(single[0].score, 1.0);
    assert_eq!(single[1].score, -1.0);
}

#[test]
fn family_pools_normalize_separately() {
    let mut rows = Vec::new();
    let a = ModelKey::new("F1", "a");
    let b = ModelKey::new("F1", "b");
    let c = ModelKey::new("F2", "a");
    let d = ModelKey::new("F2", "d");
    rows.push((&a, "X", Some(1.0)));
    rows.push((&b, "X", Some(3.0)));
    rows.push((&c, "X", Some(100.0)));
    rows.push((&d, "X", Some(300.0)));
    let t = ScoreTable::from_rows(rows.iter().copied()).unwrap();
    let fam = zscores_pooled(&t, Pool::Family).unwrap();
    for m in 0..4 {
        assert_eq!(fam.get(m, 0).unwrap().abs(), 1.0);
    }
    let global = zscores_pooled(&t, Pool::Global).unwrap();
    assert!(global.get(0, 0).unwrap() > -1.0 && global.get(0, 0).unwrap() < 0.0);
    assert!(ScoreTable::from_rows(vec![(&a, "X", Some(1.0)), (&a, "X", Some(2.0))]).is_err());
}

#[test]
fn t_test_matches_closed_form_df2() {
    let r = one_sided_t_test(&[0.5, 0.3, 0.7]).unwrap();
    assert_eq!(r.df, 2);
    assert!((r.t - 4.330127).abs() < 1e-6, "{}", r.t);
    // df = 2: P(T > t) = 1/2 − t / (2 √(t² + 2))
    let closed = 0.5 - r.t / (2.0 * (r.t * r.t + 2.0).sqrt());
    assert!((r.p - closed).abs() < 1e-12);
    assert!((r.p - 0.0247).abs() < 1e-4);
    assert!(one_sided_t_test(&[0.0, 0.0, 0.0]).is_none());
    assert!(one_sided_t_test(&[1.0]).is_none());
}

#[test]
fn t_cdf_closed_forms() {
    for t in [-30.0, -3.0, -0.7, 0.0, 0.2, 1.0, 4.33, 12.0] {
        let cauchy = 0.5 + f64::atan(t) / std::f64::consts::PI;
        assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-12, "df1 t={t}");
        let df2 = 0.5 + t / (2.0 * (t * t + 2.0).sqrt());
        assert!((student_t_cdf(t, 2.0) - df2).abs() < 1e-12, "df2 t={t}");
    }
}

#[test]
fn compare_verdicts() {
    let t = table(
        &[
            ("b1", &[Some(0.0)]),
            ("b2", &[Some(0.1)]),
            ("a1", &[Some(1.0)]),
            ("a2", &[Some(1.3)]),
        ],
        &["X"],
    );
    let r = compare(&[key("b1"), key("b2")], &[key("a1"), key("a2")], &t, None).unwrap();
    assert_eq!(r.differences.len(), 4);
    assert_eq!(r.differences[0], 1.0);
    assert_eq!(r.df, Some(3));
    assert_eq!(r.verdict == Verdict::Significant, r.p.unwrap() < 0.01);
    let one = compare(&[key("b1")], &[key("a1")], &t, None).unwrap();
    assert_eq!(one.verdict, Verdict::InsufficientData);
    assert!(compare(&[key("b1")], &[key("b1"), key("a1")], &t, None).is_err());
    assert!(compare(&[], &[key("a1")], &t, None).is_err());
}

proptest! {
    #[test]
    fn negation_maps_p_to_its_complement(d in prop::collection::vec(-5.0..5.0f64, 2..20)) {
        let pos = one_sided_t_test(&d);
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        if let (Some(a), Some(b)) = (pos, one_sided_t_test(&neg)) {
            prop_assert!((a.p + b.p - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.p));
        }
    }

    #[test]
    fn shifting_up_never_loses_significance(d in prop::collection::vec(-2.0..2.0f64, 2..20), c in 0.001..3.0f64) {
        if let Some(a) = one_sided_t_test(&d) {
            let shifted: Vec<f64> = d.iter().map(|x| x + c).collect();
            let b = one_sided_t_test(&shifted).unwrap();
            if a.p < 0.01 {
                prop_assert!(b.p < 0.01);
            }
            prop_assert!(b.p <= a.p + 1e-12);
        }
    }

    #[test]
    fn z_is_invariant_to_positive_affine_maps(
        vals in prop::collection::vec(0.0..100.0f64, 3..10),
        scale in 0.1..10.0f64,
        shift in -50.0..50.0f64,
    ) {
        let names: Vec<String> = (0..vals.len()).map(|i| format!("m{i}")).collect();
        let rows: Vec<(&str, Vec<Option<f64>>)> = names.iter().zip(&vals).map(|(n, v)| (n.as_str(), vec![Some(*v)])).collect();
        let mapped: Vec<(&str, Vec<Option<f64>>)> = names.iter().zip(&vals).map(|(n, v)| (n.as_str(), vec![Some(scale * v + shift)])).collect();
        let t1 = table(&rows.iter().map(|(n, v)| (*n, v.as_slice())).collect::<Vec<_>>(), &["X"]);
        let t2 = table(&mapped.iter().map(|(n, v)| (*n, v.as_slice())).collect::<Vec<_>>(), &["X"]);
        let (z1, z2) = (zscores(&t1).unwrap(), zscores(&t2).unwrap());
        for m in 0..vals.len() {
            prop_assert!((z1.get(m, 0).unwrap() - z2.get(m, 0).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn aggregate_ignores_benchmark_order(vals in prop::collection::vec(-3.0..3.0f64, 12)) {
        let rows: Vec<(String, Vec<Option<f64>>)> = (0..4).map(|m| (format!("m{m}"), vals[m * 3..m * 3 + 3].iter().map(|v| Some(*v)).collect())).collect();
        let t = table(&rows.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect::<Vec<_>>(), &["A", "B", "C"]);
        let order = ["C".to_string(), "A".to_string(), "B".to_string()];
        let a = aggregate(&t, None).unwrap();
        let b = aggregate(&t, Some(&order)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.score - y.score).abs() < 1e-12);
        }
    }
}
