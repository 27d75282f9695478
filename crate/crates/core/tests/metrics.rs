use fuznet::metrics::{
    correlation_metrics, error_metrics, fractional_ranks, spearman, MetricsReport,
};
use fuznet::rng::SeededRng;
use fuznet::Error;
use proptest::prelude::*;

mod common;

use common::{close, oracle, random_pair};

#[test]
fn thousand_pairs_match_oracle() {
    let mut rng = SeededRng::new(99);
    let tol = 1e-10;
    for case in 0..1000 {
        let (p, t) = random_pair(&mut rng, case);
        let (rmse, mae) = error_metrics(&p, &t).unwrap();
        assert!((rmse - oracle::rmse(&p, &t)).abs() <= tol, "case {case}");
        assert!((mae - oracle::mae(&p, &t)).abs() <= tol, "case {case}");
        assert!(rmse >= mae - 1e-15, "case {case}");
        let c = correlation_metrics(&p, &t).unwrap();
        assert!(close(c.pcc, oracle::pcc(&p, &t), tol), "pcc case {case}");
        assert!(close(c.ccc, oracle::ccc(&p, &t), tol), "ccc case {case}");
        assert!(close(c.r2, oracle::r2(&p, &t), tol), "r2 case {case}");
        assert!(
            close(spearman(&p, &t).unwrap(), oracle::scc(&p, &t), tol),
            "scc case {case}"
        );
    }
}

#[test]
fn error_metric_examples() {
    let (r, m) = error_metrics(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
    assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(m, 3.5);
    assert_eq!(error_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
    let t = [1.0, 5.0, -2.0];
    let p: Vec<f64> = t.iter().map(|v| v - 2.5).collect();
    let (r, m) = error_metrics(&p, &t).unwrap();
    assert!((r - 2.5).abs() < 1e-15 && (m - 2.5).abs() < 1e-15);
    assert!(matches!(
        error_metrics::<f64>(&[], &[]),
        Err(Error::Contract(_))
    ));
    assert!(matches!(
        error_metrics(&[1.0], &[1.0, 2.0]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn correlation_examples() {
    let t = [1.0f64, 3.0, 2.0, 7.0];
    let c = correlation_metrics(&t, &t).unwrap();
    assert!((c.pcc.unwrap() - 1.0).abs() < 1e-15);
    assert!((c.ccc.unwrap() - 1.0).abs() < 1e-15);
    assert!((c.r2.unwrap() - 1.0).abs() < 1e-15);

    let shifted: Vec<f64> = t.iter().map(|v| v + 5.0).collect();
    let c = correlation_metrics(&shifted, &t).unwrap();
    assert!((c.pcc.unwrap() - 1.0).abs() < 1e-12);
    assert!(c.ccc.unwrap() < 1.0);

    let p = [1.0f64, 2.0, 3.0, 4.0];
    let q = [1.1, 1.9, 3.2, 3.8];
    // μp = 2.5, μt = 2.5, σp² = 1.25, σt² = 1.125, cov = 1.175.
    let direct: f64 = 2.0 * 1.175 / (1.25 + 1.125);
    let ccc = correlation_metrics(&p, &q).unwrap().ccc.unwrap();
    assert!((ccc - direct).abs() < 1e-12);
    assert!((ccc - oracle::ccc(&p, &q).unwrap()).abs() < 1e-12);

    let flat = correlation_metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((flat.pcc, flat.ccc), (None, None));
    assert!(flat.r2.is_some());
    let flat_truth = correlation_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
    assert_eq!(
        (flat_truth.pcc, flat_truth.ccc, flat_truth.r2),
        (None, None, None)
    );
    assert!(matches!(
        correlation_metrics(&[1.0], &[1.0]),
        Err(Error::Contract(_))
    ));
}

#[test]
fn ccc_penalizes_rescaling() {
    let t = [1.0, 4.0, 2.0, 8.0, 5.0];
    let doubled: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
    let base = correlation_metrics(&t, &t).unwrap().ccc.unwrap();
    assert!(correlation_metrics(&doubled, &t).unwrap().ccc.unwrap() < base);
}

#[test]
fn spearman_examples() {
    assert!(
        (spearman(&[1.0f64, 2.0, 5.0], &[3.0, 10.0, 11.0])
            .unwrap()
            .unwrap()
            - 1.0)
            .abs()
            < 1e-15
    );
    assert!(
        (spearman(&[1.0f64, 2.0, 3.0], &[9.0, 4.0, 1.0])
            .unwrap()
            .unwrap()
            + 1.0)
            .abs()
            < 1e-15
    );
    let p = [1.0f64, 1.0, 2.0];
    let t = [1.0, 2.0, 3.0];
    assert_eq!(fractional_ranks(&p), vec![1.5, 1.5, 3.0]);
    let s = spearman(&p, &t).unwrap().unwrap();
    assert!((s - oracle::scc(&p, &t).unwrap()).abs() < 1e-12);
    // Ranks (1.5, 1.5, 3) against (1, 2, 3): cov 0.5, sd 0.7071 and 0.8165.
    assert!((s - 0.5 / (0.5f64.sqrt() * (2.0f64 / 3.0).sqrt())).abs() < 1e-12);
    assert_eq!(spearman(&[4.0, 4.0], &[1.0, 2.0]).unwrap(), None);
}

#[test]
fn report_round_trips_as_key_values() {
    let r = MetricsReport::compute(&[1.0, 2.0, 2.5], &[1.5, 2.0, 3.5]).unwrap();
    let text = r.to_kv();
    assert!(text.lines().any(|l| l.starts_with("rmse=")));
    assert_eq!(text.parse::<MetricsReport>().unwrap(), r);
    let flat = MetricsReport::compute(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
    assert!(flat.to_kv().contains("ccc=undefined"));
    assert_eq!(flat.to_kv().parse::<MetricsReport>().unwrap(), flat);
}

fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
        )
    })
}

proptest! {
    #[test]
    fn rmse_dominates_mae((p, t) in vec_pair()) {
        let (r, m) = error_metrics(&p, &t).unwrap();
        prop_assert!(r + 1e-12 >= m && m >= 0.0);
    }

    #[test]
    fn bounded_correlations((p, t) in vec_pair()) {
        let c = correlation_metrics(&p, &t).unwrap();
        for v in [c.pcc, c.ccc, spearman(&p, &t).unwrap()].into_iter().flatten() {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
        if let Some(r2) = c.r2 {
            prop_assert!(r2 <= 1.0);
        }
    }

    #[test]
    fn rank_metrics_ignore_positive_affine((p, t) in vec_pair(), a in 0.1f64..10.0, b in -20.0f64..20.0) {
        let q: Vec<f64> = p.iter().map(|v| a * v + b).collect();
        let before = correlation_metrics(&p, &t).unwrap().pcc.unwrap();
        let after = correlation_metrics(&q, &t).unwrap().pcc.unwrap();
        prop_assert!((before - after).abs() < 1e-9);
        let sb = spearman(&p, &t).unwrap().unwrap();
        let sa = spearman(&q, &t).unwrap().unwrap();
        prop_assert!((sb - sa).abs() < 1e-9);
    }
}
