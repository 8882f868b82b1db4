//! Optimizer solutions against closed-form maximizers.

use proptest::prelude::*;
use setpar::optimizer::{maximize, FeasibleRegion};

/// Nearest point to `(ci, cj)` in `{x ≥ l, xi + xj ≤ c}`: the clipped point
/// if feasible, otherwise the foot of the perpendicular on the cap line
/// `t ↦ (t, c − t)`, clamped to the segment's ends.
fn pair_projection(ci: f64, cj: f64, li: f64, lj: f64, cap: f64) -> (f64, f64) {
    let (xi, xj) = (ci.max(li), cj.max(lj));
    if xi + xj <= cap {
        return (xi, xj);
    }
    let t = ((ci + cap - cj) / 2.0).clamp(li, cap - lj);
    (t, cap - t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn isotropic_quadratic_maximizer_is_the_projection(
        c in prop::array::uniform3(-0.5f64..2.0),
        start in (0.01f64..3.0, 0.01f64..0.5, 0.01f64..0.45),
    ) {
        let region = FeasibleRegion::par(1e-3);
        let obj = |x: &[f64]| {
            let f = -(0..3).map(|i| (x[i] - c[i]).powi(2)).sum::<f64>();
            (f, (0..3).map(|i| -2.0 * (x[i] - c[i])).collect())
        };
        let res = maximize(obj, &region, &[start.0, start.1, start.2], 1e-10, 1000).unwrap();
        prop_assert!(res.converged, "{:?}", res);
        prop_assert!(region.contains(&res.argmax, 1e-15));
        let (pi, pj) = pair_projection(c[1], c[2], 1e-3, 1e-3, 1.0 - 1e-3);
        let expect = [c[0].max(1e-3), pi, pj];
        for i in 0..3 {
            prop_assert!((res.argmax[i] - expect[i]).abs() < 1e-8, "{:?} vs {:?}", res.argmax, expect);
        }
    }

    #[test]
    fn setpar_region_solutions_satisfy_kkt(
        c in prop::array::uniform6(-0.5f64..2.0),
        w in prop::array::uniform6(0.1f64..10.0),
    ) {
        let region = FeasibleRegion::setpar(1e-3);
        let obj = |x: &[f64]| {
            let f = -(0..6).map(|i| w[i] * (x[i] - c[i]).powi(2)).sum::<f64>();
            (f, (0..6).map(|i| -2.0 * w[i] * (x[i] - c[i])).collect())
        };
        let start = [1.0, 0.5, 0.3, 1.0, 0.3, 0.3];
        let res = maximize(obj, &region, &start, 1e-9, 1000).unwrap();
        prop_assert!(res.converged);
        prop_assert!(region.projected_gradient_norm(&res.argmax, &res.gradient) < 1e-9);
        // Coordinates outside the cap separate: weighted projection is clipping.
        for i in [0, 1, 2, 3] {
            let want = c[i].clamp(region.lower[i], region.upper[i]);
            prop_assert!((res.argmax[i] - want).abs() < 1e-8);
        }
    }
}
