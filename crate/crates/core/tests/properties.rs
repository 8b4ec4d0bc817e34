use proptest::prelude::*;

use qharmonic::kernel::Kernel;
use qharmonic::model::{level_point, phi, solve_t0, tilt, StepSet, TiltVector};

const CLOCKWISE: [(i32, i32); 8] = [(1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1)];

/// Random valid step sets: eight weights, some zeroed, normalized.
fn step_set() -> impl Strategy<Value = StepSet> {
    (prop::array::uniform8(0.05f64..1.0), prop::array::uniform8(any::<bool>()))
        .prop_filter_map("degenerate step set", |(w, keep)| {
            let pairs: Vec<_> = CLOCKWISE
                .iter()
                .zip(w.iter().zip(keep.iter()))
                .filter(|(_, (_, &k))| k)
                .map(|(&s, (&v, _))| (s, v))
                .collect();
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let pairs: Vec<_> = pairs.into_iter().map(|(s, v)| (s, v / total)).collect();
            StepSet::from_pairs(&pairs).ok()
        })
}

/// Walks with p(k,l) = p(−k,−l), hence zero drift.
fn symmetric_set() -> impl Strategy<Value = StepSet> {
    prop::array::uniform4(0.0f64..1.0).prop_filter_map("degenerate step set", |w| {
        let half = [(1, 1), (1, 0), (1, -1), (0, 1)];
        let total: f64 = 2.0 * w.iter().sum::<f64>();
        let pairs: Vec<_> = half
            .iter()
            .zip(w)
            .flat_map(|(&(k, l), v)| [((k, l), v / total), ((-k, -l), v / total)])
            .filter(|p| p.1 > 0.02)
            .collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let pairs: Vec<_> = pairs.into_iter().map(|(s, v)| (s, v / total)).collect();
        StepSet::from_pairs(&pairs).ok()
    })
}

fn tilt_vector() -> impl Strategy<Value = TiltVector> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| TiltVector::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phi_is_convex(s in step_set(), a in tilt_vector(), b in tilt_vector()) {
        let mid = TiltVector::new(0.5 * (a.a1 + b.a1), 0.5 * (a.a2 + b.a2));
        let chord = 0.5 * (phi(&s, a) + phi(&s, b));
        prop_assert!(phi(&s, mid) <= chord * (1.0 + 1e-14));
    }

    #[test]
    fn t0_is_the_minimum(s in step_set(), a in tilt_vector()) {
        let crit = solve_t0(&s).unwrap();
        prop_assert!(crit.t0 > 0.0 && crit.t0 <= 1.0 + 1e-15);
        prop_assert!(phi(&s, a) >= crit.t0 * (1.0 - 1e-12));
        prop_assert!((phi(&s, crit.a_star) - crit.t0).abs() <= 1e-14);
    }

    #[test]
    fn zero_drift_means_t0_one(s in symmetric_set()) {
        let crit = solve_t0(&s).unwrap();
        prop_assert!((crit.t0 - 1.0).abs() <= 1e-9);
        prop_assert!(crit.a_star.a1.abs() <= 1e-9 && crit.a_star.a2.abs() <= 1e-9);
    }

    #[test]
    fn drift_means_t0_below_one(s in step_set()) {
        let (dx, dy) = s.drift();
        prop_assume!(dx.hypot(dy) > 1e-3);
        prop_assert!(solve_t0(&s).unwrap().t0 < 1.0 - 1e-9);
    }

    #[test]
    fn level_point_and_tilt(s in step_set(), excess in 0.01f64..0.5, angle in 0.0f64..std::f64::consts::TAU) {
        let crit = solve_t0(&s).unwrap();
        let t = crit.t0 + excess;
        let a = level_point(&s, &crit, t, (angle.cos(), angle.sin())).unwrap();
        prop_assert!((phi(&s, a) - t).abs() <= 1e-10 * t);
        let tilted = tilt(&s, a, t).unwrap();
        let total: f64 = tilted.steps().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        // φ_a(b) = φ(a + b)/t, so the tilted walk has t0' = t0/t
        let t0_tilted = solve_t0(&tilted).unwrap().t0;
        prop_assert!((t0_tilted - crit.t0 / t).abs() <= 1e-9);
    }

    #[test]
    fn branch_points_satisfy_vieta(s in step_set(), excess in 0.05f64..0.5) {
        let t = solve_t0(&s).unwrap().t0 + excess;
        let k = Kernel::new(s, t).unwrap();
        let bp = k.branch_points().unwrap();
        let d = &k.delta.c;
        let lead = d.iter().rposition(|a| a.abs() > 1e-14).unwrap();
        let finite: Vec<f64> = bp.x.r.iter().copied().filter(|r| r.is_finite()).collect();
        prop_assert_eq!(finite.len(), lead);
        let product: f64 = finite.iter().product();
        let sign = if lead % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((product - sign * d[0] / d[lead]).abs() <= 1e-8 * (d[0] / d[lead]).abs().max(1e-3));
        let sum: f64 = finite.iter().sum();
        prop_assert!((sum + d[lead - 1] / d[lead]).abs() <= 1e-8 * sum.abs().max(1.0));
        for &x in &finite {
            let scale = d.iter().enumerate().map(|(i, a)| (a * x.abs().powi(i as i32)).abs()).sum::<f64>();
            prop_assert!(k.delta.eval(x).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn transpose_swaps_branch_points(s in step_set(), excess in 0.05f64..0.5) {
        let t = solve_t0(&s).unwrap().t0 + excess;
        let a = Kernel::new(s, t).unwrap().branch_points().unwrap();
        let b = Kernel::new(s.transpose(), t).unwrap().branch_points().unwrap();
        for (u, v) in a.x.r.iter().zip(b.y.r.iter()).chain(a.y.r.iter().zip(b.x.r.iter())) {
            if u.is_finite() {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{} vs {}", u, v);
            } else {
                prop_assert!(v.is_infinite());
            }
        }
    }

    #[test]
    fn branch_point_pattern(s in step_set(), excess in 0.05f64..0.5) {
        let t = solve_t0(&s).unwrap().t0 + excess;
        let bp = Kernel::new(s, t).unwrap().branch_points().unwrap();
        let [x1, x2, x3, _] = bp.x.r;
        prop_assert!(x1.abs() <= x2 && x2 < x3 && x2 > 0.0, "{:?}", bp.x.r);
    }
}
