use nalgebra::DMatrix;
use nlirf::bss::{self, ar1_demixing_residuals, default_transform_pairs};
use nlirf::identified_set::{
    polar_decompose, radial_rotation_gauss, radial_rotation_uniform, skew_exp, AngleFn, RadialRotationSpec,
};
use nlirf::innovations::{gauss_to_uniform, uniform_to_gauss};
use nlirf::model::zoo;
use nlirf::normal;
use proptest::prelude::*;

fn skew_from(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            b[(i, j)] = v[k];
            b[(j, i)] = -v[k];
            k += 1;
        }
    }
    b
}

// Above zero, Phi(x) is stored as 1 - small and loses absolute resolution
// f64::EPSILON, which maps back to an error of about EPSILON / pdf(x).
fn roundtrip_slack(x: f64) -> f64 {
    let tail = if x > 0.0 { 2.0 * f64::EPSILON / normal::pdf(x) } else { 0.0 };
    1e-9 * (1.0 + x.abs()) + tail
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn skew_exp_is_special_orthogonal(n in 2usize..6, v in prop::collection::vec(-3.0f64..3.0, 10)) {
        let q = skew_exp(&skew_from(&v, n)).unwrap();
        let err = (q.transpose() * &q - DMatrix::<f64>::identity(n, n)).abs().max();
        prop_assert!(err < 1e-12, "Q'Q - I = {err:e}");
        prop_assert!((q.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn planar_rotation_preserves_the_norm(x in -8.0f64..8.0, y in -8.0f64..8.0, c in -3.0f64..3.0, s in -2.0f64..2.0) {
        for angle in [AngleFn::Constant(c), AngleFn::Linear(s)] {
            let spec = RadialRotationSpec::planar(angle);
            let z = radial_rotation_gauss(&[x, y], &spec).unwrap();
            prop_assert!((z[0].hypot(z[1]) - x.hypot(y)).abs() < 1e-12);
            let back = radial_rotation_gauss(&z, &spec.inverse()).unwrap();
            prop_assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
        }
    }

    #[test]
    fn skew_rotation_preserves_the_norm(e in prop::collection::vec(-5.0f64..5.0, 4), seed in 0u64..50) {
        let spec = RadialRotationSpec::default_skew(4, 0.3, seed).unwrap();
        let z = radial_rotation_gauss(&e, &spec).unwrap();
        let (a, b): (f64, f64) = (z.iter().map(|v| v * v).sum(), e.iter().map(|v| v * v).sum());
        prop_assert!((a.sqrt() - b.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn uniform_rotation_stays_in_the_cube(u in 1e-6f64..(1.0 - 1e-6), v in 1e-6f64..(1.0 - 1e-6)) {
        let spec = RadialRotationSpec::planar(AngleFn::Linear(0.2));
        let w = radial_rotation_uniform(&[u, v], &spec).unwrap();
        prop_assert!(w.iter().all(|x| *x > 0.0 && *x < 1.0));
    }

    #[test]
    fn polar_factors_reconstruct(v in prop::collection::vec(-2.0f64..2.0, 9)) {
        let a = DMatrix::from_vec(3, 3, v) + DMatrix::<f64>::identity(3, 3) * 4.0;
        prop_assume!(a.determinant() > 0.1);
        let p = polar_decompose(&a).unwrap();
        prop_assert!((p.reconstruct() - &a).abs().max() < 1e-9 * a.abs().max());
        prop_assert!((p.omega.clone() - p.omega.transpose()).abs().max() < 1e-10);
        prop_assert!((p.omega.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn demix_inverts_mix(a12 in -0.9f64..0.9, a21 in -0.9f64..0.9, seed in 0u64..100) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, a12, a21, 1.0]);
        prop_assume!((1.0 - a12 * a21).abs() > 0.05);
        let x = nlirf::rng::NormalStream::new(seed, nlirf::rng::Domain::Auxiliary, 0).matrix(0, 64, 2);
        let back = bss::demix(&bss::mix(&x, &a), &a).unwrap();
        prop_assert!((back - x).abs().max() < 1e-10);
    }

    #[test]
    fn gcov_objective_is_nonnegative(p in prop::collection::vec(-0.8f64..0.8, 4), seed in 0u64..20) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.3, 1.0]);
        let (_, y) = bss::simulate_mixed_ar1([0.9, 0.2], &a, 300, seed).unwrap();
        let obj = bss::gcov_objective(&ar1_demixing_residuals, &p, &y, &default_transform_pairs(), &[1, 2]);
        if let Ok(v) = obj {
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }

    #[test]
    fn gauss_uniform_roundtrip(v in prop::collection::vec(-7.0f64..7.0, 6)) {
        let e = DMatrix::from_vec(3, 2, v);
        let back = uniform_to_gauss(&gauss_to_uniform(&e).unwrap(), None).unwrap();
        for (b, x) in back.iter().zip(e.iter()) {
            prop_assert!((b - x).abs() < roundtrip_slack(*x));
        }
    }

    #[test]
    fn quantile_inverts_cdf(x in -30.0f64..8.0) {
        let p = normal::cdf(x);
        prop_assume!(p > 0.0 && p < 1.0);
        let q = normal::quantile(p);
        prop_assert!((q - x).abs() < roundtrip_slack(x));
    }

    #[test]
    fn transition_is_increasing_in_each_innovation(
        y in prop::collection::vec(-2.0f64..2.0, 2),
        e in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        for m in zoo::all() {
            let n = m.n();
            let (yp, ep) = (&y[..n], &e[..n]);
            let base = m.transition_step(yp, ep).unwrap();
            for i in 0..n {
                let mut bumped = ep.to_vec();
                bumped[i] += 1e-4;
                let up = m.transition_step(yp, &bumped).unwrap();
                prop_assert!(up[i] > base[i], "{} component {i}", m.tag());
            }
        }
    }
}
