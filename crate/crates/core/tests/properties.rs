use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use windfarm_sbo::farm_model::{
    velocity_deficit, FarmModel, Layout, Point, TurbineSpec, WakeParams, WindCondition,
};
use windfarm_sbo::kriging::expected_improvement;
use windfarm_sbo::pce::wind_rose_bases;
use windfarm_sbo::wind_resource::{lhs_column, SpeedModel, WindRose};

const D: f64 = 126.0;

fn model() -> FarmModel {
    FarmModel::new(TurbineSpec::nrel_5mw(), WakeParams::default()).unwrap()
}

fn scattered(n: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((0.0f64..2000.0, 0.0f64..2000.0), n).prop_filter_map("too close", |xy| {
        let pts: Vec<Point> = xy.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let ok = pts
            .iter()
            .enumerate()
            .all(|(i, a)| pts[i + 1..].iter().all(|b| a.distance(b) >= 2.0 * D));
        ok.then_some(pts)
    })
}

fn max_gram_error(rose: &WindRose, degree: usize) -> f64 {
    let (bd, bs) = wind_rose_bases(rose, degree).unwrap();
    let (d, f): (Vec<f64>, Vec<f64>) = rose.direction_bins().unzip();
    let dm = windfarm_sbo::pce::DiscreteMeasure::new(d, f).unwrap();
    let (s, w): (Vec<f64>, Vec<f64>) = rose.speed_bins().into_iter().unzip();
    let sm = windfarm_sbo::pce::DiscreteMeasure::new(s, w).unwrap();
    let mut worst: f64 = 0.0;
    for (basis, measure) in [(&bd, &dm), (&bs, &sm)] {
        let g = basis.gram_matrix(measure);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn turbine_speeds_never_exceed_freestream(
        pts in scattered(6),
        dir in 0.0f64..360.0,
        speed in 0.0f64..30.0,
    ) {
        let m = model();
        let layout = Layout::new(pts);
        let fp = m.farm_power(&layout, &WindCondition::new(dir, speed));
        let rated = m.turbine.power(12.0);
        for (&u, &p) in fp.effective_speeds_ms.iter().zip(&fp.turbine_powers_w) {
            prop_assert!(u <= speed + 1e-12 && u >= 0.0);
            prop_assert!((0.0..=rated + 1e-6).contains(&p));
        }
        prop_assert!((fp.total_w - fp.turbine_powers_w.iter().sum::<f64>()).abs() < 1e-6);
        if speed < m.turbine.cut_in_ms {
            prop_assert_eq!(fp.total_w, 0.0);
        }
    }

    #[test]
    fn farm_power_is_translation_invariant(
        pts in scattered(5),
        dir in 0.0f64..360.0,
        speed in 4.0f64..20.0,
        shift in (-5000.0f64..5000.0, -5000.0f64..5000.0),
    ) {
        let m = model();
        let cond = WindCondition::new(dir, speed);
        let a = m.farm_power(&Layout::new(pts.clone()), &cond).total_w;
        let moved = pts.iter().map(|p| Point::new(p.x + shift.0, p.y + shift.1)).collect();
        let b = m.farm_power(&Layout::new(moved), &cond).total_w;
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn farm_power_is_rotation_covariant(
        pts in scattered(5),
        dir in 0.0f64..360.0,
        turn in 0.0f64..360.0,
        speed in 4.0f64..20.0,
    ) {
        // Turning the farm clockwise by `turn` and the wind with it changes nothing.
        let m = model();
        let (s, c) = turn.to_radians().sin_cos();
        let turned = pts.iter().map(|p| Point::new(c * p.x + s * p.y, -s * p.x + c * p.y)).collect();
        let a = m.farm_power(&Layout::new(pts), &WindCondition::new(dir, speed)).total_w;
        let b = m.farm_power(&Layout::new(turned), &WindCondition::new(dir + turn, speed)).total_w;
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn wake_deficit_is_bounded_and_symmetric(
        ct in 0.05f64..0.95,
        dx in 0.5f64..30.0,
        dy in -5.0f64..5.0,
        dz in -1.0f64..1.0,
    ) {
        let spec = TurbineSpec::nrel_5mw();
        let wp = WakeParams::default();
        let a = velocity_deficit(&spec, &wp, ct, dx * D, dy * D, dz * D).unwrap();
        let b = velocity_deficit(&spec, &wp, ct, dx * D, -dy * D, -dz * D).unwrap();
        prop_assert!((0.0..=1.0).contains(&a.fraction));
        prop_assert_eq!(a.fraction, b.fraction);
        let upstream = velocity_deficit(&spec, &wp, ct, -dx * D, dy * D, dz * D).unwrap();
        prop_assert_eq!(upstream.fraction, 0.0);
        let farther = velocity_deficit(&spec, &wp, ct, (dx + 1.0) * D, 0.0, 0.0).unwrap();
        let centre = velocity_deficit(&spec, &wp, ct, dx * D, 0.0, 0.0).unwrap();
        prop_assert!(farther.fraction <= centre.fraction + 1e-15);
    }

    #[test]
    fn bases_are_orthonormal_for_any_rose(
        shape in 1.2f64..4.0,
        scale in 5.0f64..12.0,
        freqs in prop::collection::vec(0.01f64..1.0, 36),
        degree in 1usize..=10,
    ) {
        let speed = SpeedModel::weibull(shape, scale, 3.0, 25.0).unwrap();
        let centers = (0..36).map(|i| i as f64 * 10.0).collect();
        let rose = WindRose::new(centers, freqs, speed).unwrap();
        let err = max_gram_error(&rose, degree);
        prop_assert!(err <= 1e-8, "gram error {err:e}");
    }

    #[test]
    fn expected_improvement_is_nonnegative_and_monotone(
        mean in -50.0f64..50.0,
        sd in 0.0f64..20.0,
        best in -50.0f64..50.0,
    ) {
        let ei = expected_improvement(mean, sd, best);
        prop_assert!(ei >= 0.0);
        prop_assert!(ei >= (mean - best).max(0.0) - 1e-9);
        prop_assert!(expected_improvement(mean + 1.0, sd, best) >= ei - 1e-12);
        prop_assert!(expected_improvement(mean, sd + 1.0, best) >= ei - 1e-12);
    }

    #[test]
    fn lhs_puts_one_draw_in_each_stratum(n in 1usize..200, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let col = lhs_column(n, &mut rng);
        let mut strata: Vec<usize> = col.iter().map(|&p| (p * n as f64).floor() as usize).collect();
        strata.sort_unstable();
        prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn ei_reference_values() {
    let at_mean = expected_improvement(3.0, 1.0, 3.0);
    assert!((at_mean - 1.0 / (2.0 * PI).sqrt()).abs() <= 1e-12);
    assert!((expected_improvement(5.0, 1e-12, 2.0) - 3.0).abs() < 1e-9);
}
