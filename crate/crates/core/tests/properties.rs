use std::f64::consts::PI;

use proptest::prelude::*;

use gaugeweave::aharonov_bohm::{ellipse_loop, line_integral_a, peierls_phase, PathChoice};
use gaugeweave::geometry::apply_gauge;
use gaugeweave::linalg::{phase_distance, wrap_phase};
use gaugeweave::models::SpinHalfSphere;
use gaugeweave::weak_value::gauge_covariance_test;
use gaugeweave::{
    berry_connection, berry_phase_wilson, build_bundle, decompose, eig_hermitian, Axis, ComplexMatrix, ComplexVector,
    DiffOrder, EigenBundle, GaugeFunction, HermitianMatrix, ParameterGrid, PathContour, PostSelection, SolenoidConfig,
    Units, C64,
};

fn northern_patch() -> EigenBundle {
    let grid = ParameterGrid::new(vec![Axis::open(0.3, 1.3, 17), Axis::periodic(0.0, 2.0 * PI, 24)])
        .unwrap()
        .with_order(DiffOrder::Fourth);
    build_bundle(&SpinHalfSphere::default(), &grid).unwrap()
}

fn bra(a: f64, b: f64, c: f64) -> PostSelection {
    // |phi> = (cos a, sin a e^{ib}) e^{ic}, kept away from the south pole state.
    let v = ComplexVector::from_vec(vec![C64::from_polar(a.cos(), c), C64::from_polar(a.sin(), b + c)]);
    PostSelection::Fixed(v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wrap_phase_lands_in_half_open_interval(x in -100.0f64..100.0) {
        let w = wrap_phase(x);
        prop_assert!(w > -PI && w <= PI);
        let k = ((x - w) / (2.0 * PI)).round();
        prop_assert!((x - w - 2.0 * PI * k).abs() < 1e-9);
    }

    #[test]
    fn phase_distance_is_a_metric_on_the_circle(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let d = phase_distance(a, b);
        prop_assert!((0.0..=PI + 1e-12).contains(&d));
        prop_assert!((d - phase_distance(b, a)).abs() < 1e-12);
        prop_assert!(phase_distance(a, a + 2.0 * PI) < 1e-12);
    }

    #[test]
    fn eigenpairs_satisfy_the_eigen_equation(vals in proptest::collection::vec(-1.0f64..1.0, 18)) {
        let n = 3;
        let mut m = ComplexMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in 0..=i {
                let (re, im) = (vals[k], if i == j { 0.0 } else { vals[k + 1] });
                k += 2;
                m[(i, j)] = C64::new(re, im);
                m[(j, i)] = C64::new(re, -im);
            }
        }
        let eig = eig_hermitian(&HermitianMatrix::new(m.clone()).unwrap()).unwrap();
        for (a, va) in eig.eigenvectors.iter().enumerate() {
            let r = &m * va - va * C64::new(eig.eigenvalues[a], 0.0);
            prop_assert!(r.norm() < 1e-10);
            for vb in &eig.eigenvectors[..a] {
                prop_assert!(va.dotc(vb).norm() < 1e-10);
            }
            prop_assert!((va.norm() - 1.0).abs() < 1e-12);
        }
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn self_and_mutual_parts_close_for_any_bra(a in 0.0f64..1.2, b in -PI..PI, c in -PI..PI) {
        let bundle = northern_patch();
        let d = decompose(&bundle, 0, &bra(a, b, c)).unwrap();
        let full = berry_connection(&bundle, 0).unwrap();
        for p in d.unmasked() {
            for m in 0..2 {
                let sum = d.a_self.field.get(p, m) + d.a_mutual.field.get(p, m);
                prop_assert!((sum - full.field.get(p, m)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn decomposition_is_gauge_covariant(seed in 0u64..1000, a in 0.0f64..1.2, b in -PI..PI) {
        let bundle = northern_patch();
        let g = GaugeFunction::random_smooth(bundle.grid(), &[0, 1], seed);
        let report = gauge_covariance_test(&bundle, 0, &bra(a, b, 0.0), &g).unwrap();
        prop_assert!(report.worst() < 1e-8, "{report:?}");
    }

    #[test]
    fn wilson_loop_ignores_the_gauge(seed in 0u64..1000, row in 0usize..17) {
        let bundle = northern_patch();
        let path = PathContour::axis_loop(bundle.grid(), bundle.grid().linear_index(&[row, 0]), 1).unwrap();
        let g = GaugeFunction::random_smooth(bundle.grid(), &[0], seed);
        let before = berry_phase_wilson(&bundle, 0, &path).unwrap();
        let after = berry_phase_wilson(&apply_gauge(&bundle, &g).unwrap(), 0, &path).unwrap();
        prop_assert!(phase_distance(before, after) < 1e-10);
        let theta = bundle.grid().coords(path.points()[0])[0];
        // 24 links resolve the solid angle to a few parts in 1e3.
        prop_assert!(phase_distance(before, -PI * (1.0 - theta.cos())) < 1e-2);
    }

    #[test]
    fn loop_integral_counts_enclosed_flux(
        flux in -4.0f64..4.0,
        a in 0.3f64..2.0,
        b in 0.3f64..2.0,
        tilt in -PI..PI,
        shift in (-0.2f64..0.2, -0.2f64..0.2),
    ) {
        let s = SolenoidConfig::new(flux, [0.0, 0.0], 0.05).unwrap();
        let inside = line_integral_a(&ellipse_loop([shift.0, shift.1], a, b, tilt, 4000), &s).unwrap();
        prop_assert!((inside - flux).abs() < 1e-6 * flux.abs().max(1.0));
        let outside = line_integral_a(&ellipse_loop([a + b + 1.0, 0.0], a, b, tilt, 4000), &s).unwrap();
        prop_assert!(outside.abs() < 1e-9);
    }

    #[test]
    fn peierls_phase_depends_only_on_winding(
        flux in -3.0f64..3.0,
        y0 in 0.3f64..2.0,
        y1 in 0.3f64..2.0,
        detour in 0.5f64..3.0,
    ) {
        let s = SolenoidConfig::new(flux, [0.0, 0.0], 0.05).unwrap();
        let units = Units::default();
        let (r, big_r) = ([-1.0, y0], [1.0, y1]);
        // Paths run from R to r; going over the top is anticlockwise about the axis.
        let straight = peierls_phase(r, big_r, &s, &units, &PathChoice::Straight).unwrap();
        let same_side = peierls_phase(r, big_r, &s, &units, &PathChoice::Via(vec![[0.0, y0.max(y1) + detour]])).unwrap();
        prop_assert!(phase_distance(straight, same_side) < 1e-9);
        let other_side = peierls_phase(r, big_r, &s, &units, &PathChoice::Via(vec![[1.0, -detour], [-1.0, -detour]])).unwrap();
        prop_assert!(phase_distance(straight - other_side, flux) < 1e-9);
    }
}
