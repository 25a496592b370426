mod common;

use common::{dense_prediction, test_function as branin_like};
use windfarm_sbo::kriging::*;

#[test]
fn agrees_with_dense_solve() {
    for (trend, n) in [
        (TrendSelection::Constant, 25),
        (TrendSelection::Linear, 25),
        (TrendSelection::Quadratic, 25),
    ] {
        let x = random_points(n, 3, 21);
        let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
        let opts = KrigingOptions {
            trend,
            ..KrigingOptions::default()
        };
        // fixed length-scales, one per trend
        let m = KrigingModel::fit_fixed(&x, &y, &[8.0, 6.0, 10.0], &opts).unwrap();
        for q in random_points(20, 3, 22) {
            let p = m.predict_standardized(&q);
            let (mean, sd) = dense_prediction(&m, &q);
            assert!(
                (p.mean - mean).abs() <= 1e-8,
                "{trend:?} mean {} vs {mean}",
                p.mean
            );
            assert!((p.sd - sd).abs() <= 1e-8, "{trend:?} sd {} vs {sd}", p.sd);
        }
    }
}

#[test]
fn agrees_with_dense_solve_at_fitted_length_scales() {
    let x = random_points(25, 3, 21);
    let y: Vec<f64> = x.iter().map(|r| branin_like(r)).collect();
    let m = KrigingModel::fit(&x, &y, &KrigingOptions::default()).unwrap();
    for q in random_points(20, 3, 22) {
        let p = m.predict_standardized(&q);
        let (mean, sd) = dense_prediction(&m, &q);
        assert!(
            (p.mean - mean).abs() <= 1e-8,
            "mean {} vs {mean}, theta {:?}",
            p.mean,
            m.theta()
        );
        assert!((p.sd - sd).abs() <= 1e-8, "sd {} vs {sd}", p.sd);
    }
}

#[test]
fn interpolates_training_data() {
    let x = random_points(30, 4, 5);
    let y: Vec<f64> = x.iter().map(|r| branin_like(r) + r[3]).collect();
    let m = KrigingModel::fit(&x, &y, &KrigingOptions::default()).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        let p = m.predict_standardized(xi);
        assert!((p.mean - m.standardize(*yi)).abs() <= 1e-5);
        assert!(
            p.sd <= (m.nugget() * m.sigma2()).sqrt() * 10.0,
            "sd {}",
            p.sd
        );
    }
}

#[test]
fn reverts_to_trend_far_from_data() {
    let x = random_points(20, 2, 8);
    let y: Vec<f64> = x.iter().map(|r| (5.0 * r[0]).cos() + r[1]).collect();
    let opts = KrigingOptions {
        trend: TrendSelection::Constant,
        ..KrigingOptions::default()
    };
    let m = KrigingModel::fit_fixed(&x, &y, &[6.0, 6.0], &opts).unwrap();
    let far = [50.0, -50.0];
    let p = m.predict_standardized(&far);
    assert!((p.mean - m.beta()[0]).abs() < 1e-12);
    let (_, sd) = dense_prediction(&m, &far);
    assert!((p.sd - sd).abs() < 1e-10);
    assert!(p.sd >= m.sigma2().sqrt());
    assert!(p.sd <= m.sigma2().sqrt() * 1.5);
}

#[test]
fn learns_a_smooth_curve() {
    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| (2.0 * std::f64::consts::PI * r[0]).sin())
        .collect();
    let m = KrigingModel::fit(&x, &y, &KrigingOptions::default()).unwrap();
    let mse: f64 = (0..100)
        .map(|i| {
            let t = i as f64 / 99.0;
            (m.predict(&[t]).mean - (2.0 * std::f64::consts::PI * t).sin()).powi(2)
        })
        .sum::<f64>()
        / 100.0;
    assert!(mse.sqrt() < 0.05, "rmse {}", mse.sqrt());
}

#[test]
fn expected_improvement_properties() {
    let x = random_points(15, 2, 30);
    let y: Vec<f64> = x.iter().map(|r| r[0] - r[1] * r[1]).collect();
    let m = KrigingModel::fit(&x, &y, &KrigingOptions::default()).unwrap();
    let best = y
        .iter()
        .map(|v| m.standardize(*v))
        .fold(f64::NEG_INFINITY, f64::max);
    for q in random_points(200, 2, 31) {
        assert!(m.expected_improvement(&q, best) >= 0.0);
    }
    for xi in &x {
        assert!(m.expected_improvement(xi, best) < 1e-3);
    }
}

#[test]
fn hyperparameters_stay_in_bounds_and_are_reproducible() {
    let x = random_points(40, 5, 2);
    let y: Vec<f64> = x.iter().map(|r| branin_like(r) + 0.1 * r[4]).collect();
    let opts = KrigingOptions::default();
    let a = KrigingModel::fit(&x, &y, &opts).unwrap();
    let b = KrigingModel::fit(&x, &y, &opts).unwrap();
    assert_eq!(a.theta(), b.theta());
    assert!(a.theta().iter().all(|t| (1e-3..=1e2).contains(t)));
    let warm = KrigingModel::fit_from(&x, &y, &opts, Some(a.theta())).unwrap();
    assert!(warm.log_likelihood() >= a.log_likelihood() - 1e-9);
}
