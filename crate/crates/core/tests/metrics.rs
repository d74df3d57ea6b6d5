use geomae::metrics::*;
use geomae_tensor::Tensor;
use proptest::prelude::*;

fn t(v: &[f64]) -> Tensor {
    Tensor::new(vec![v.len()], v.to_vec()).unwrap()
}

#[test]
fn worked_example() {
    let r = evaluate(&t(&[1.0, 2.0, 6.0]), &t(&[2.0, 2.0, 2.0]), None).unwrap();
    assert!((r.mae - 5.0 / 3.0).abs() < 1e-12);
    assert!((r.rmse - (17.0f64 / 3.0).sqrt()).abs() < 1e-12);
    let smape = (2.0 / 3.0 + 0.0 + 8.0 / 8.0) / 3.0;
    assert!((r.smape - smape).abs() < 1e-8);
    assert_eq!(r.count, 3);
}

#[test]
fn all_missing_is_an_error() {
    assert!(evaluate(&t(&[1.0]), &t(&[2.0]), Some(&t(&[1.0]))).is_err());
}

#[test]
fn rows_round_trip() {
    let r = evaluate(&t(&[1.0, 3.0]), &t(&[2.0, 2.5]), None).unwrap();
    let rows = ResultRow::from_report("full", "point", 0.25, 7, &r);
    assert_eq!(rows.len(), 3);
    assert_eq!(read_rows(&write_rows(&rows)).unwrap(), rows);
    assert_eq!(MetricReport::from_key_value(&r.to_key_value()).unwrap(), r);
}

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<bool>)> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn rmse_bounds_mae((a, b, _) in pairs()) {
        let r = evaluate(&t(&a), &t(&b), None).unwrap();
        prop_assert!(r.rmse >= r.mae - 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&r.smape));
    }

    #[test]
    fn masked_entries_do_not_count((a, b, miss) in pairs(), junk in -1e6..1e6f64) {
        prop_assume!(miss.iter().any(|&m| !m));
        let m: Vec<f64> = miss.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
        let changed: Vec<f64> = b.iter().zip(&miss).map(|(&v, &x)| if x { junk } else { v }).collect();
        let r1 = evaluate(&t(&a), &t(&b), Some(&t(&m))).unwrap();
        let r2 = evaluate(&t(&a), &t(&changed), Some(&t(&m))).unwrap();
        prop_assert_eq!(r1, r2);
        let (pa, pb): (Vec<f64>, Vec<f64>) =
            a.iter().zip(&b).zip(&miss).filter(|(_, &x)| !x).map(|((&p, &q), _)| (p, q)).unzip();
        let dense = evaluate(&t(&pa), &t(&pb), None).unwrap();
        prop_assert_eq!(r1.count, dense.count);
        prop_assert!((r1.mae - dense.mae).abs() < 1e-12);
        prop_assert!((r1.rmse - dense.rmse).abs() < 1e-12);
    }

    #[test]
    fn errors_scale_linearly((a, b, _) in pairs(), c in 0.1..10.0f64) {
        let r = evaluate(&t(&a), &t(&b), None).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
        let sb: Vec<f64> = b.iter().map(|v| v * c).collect();
        let s = evaluate(&t(&sa), &t(&sb), None).unwrap();
        prop_assert!((s.mae - c * r.mae).abs() <= 1e-9 * (1.0 + s.mae));
        prop_assert!((s.rmse - c * r.rmse).abs() <= 1e-9 * (1.0 + s.rmse));
        prop_assert!((s.smape - r.smape).abs() <= 1e-6);
    }

    #[test]
    fn accumulator_merge_matches_one_pass((a, b, _) in pairs(), cut in 0usize..40) {
        let cut = cut.min(a.len());
        let mut left = MetricAccumulator::default();
        let mut right = MetricAccumulator::default();
        for i in 0..a.len() {
            if i < cut { left.push(a[i], b[i]) } else { right.push(a[i], b[i]) }
        }
        left.merge(&right);
        let one = evaluate(&t(&a), &t(&b), None).unwrap();
        let merged = left.report().unwrap();
        prop_assert_eq!(merged.count, one.count);
        prop_assert!((merged.mae - one.mae).abs() < 1e-9);
    }
}
