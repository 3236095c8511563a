use proptest::prelude::*;
use spindle_radon::microlocal::{
    det_m3, det_m3_closed, det_restricted_jacobian, restricted_m2, restricted_projection,
    CanonicalSampleRestricted,
};
use spindle_radon::scalar::det3;
use spindle_radon::Vec3;

fn sample() -> impl Strategy<Value = CanonicalSampleRestricted<f64>> {
    (
        prop_oneof![-2.0..-0.2f64, 0.2..2.0f64],
        -0.5..0.5f64,
        -0.5..0.5f64,
        prop::array::uniform3(-1.5..1.5f64),
    )
        .prop_filter("off the axis", |(_, x0, y0, x)| {
            (x[0] - x0).hypot(x[1] - y0) > 0.05
        })
        .prop_map(|(sigma, x0, y0, x)| CanonicalSampleRestricted {
            sigma,
            x0,
            y0,
            x: Vec3::from(x),
        })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-10 * scale.max(a.abs()).max(b.abs())
}

proptest! {
    #[test]
    fn spatial_block_determinant_has_the_closed_form(c in sample()) {
        // the base block of the projection is the identity, so the full
        // Jacobian determinant is that of the spatial block
        let closed = det_restricted_jacobian(&c).unwrap();
        let block = det3(&restricted_m2(&c).unwrap());
        let m2 = restricted_m2(&c).unwrap();
        let scale: f64 = (0..3).map(|r| m2.row(r).norm()).product();
        prop_assert!(close(block, closed, scale), "{} vs {}", block, closed);
    }

    #[test]
    fn m3_determinant_has_the_closed_form(c in sample()) {
        let a = det_m3(&c).unwrap();
        let b = det_m3_closed(&c).unwrap();
        prop_assert!(close(a, b, 1.0), "{} vs {}", a, b);
    }

    #[test]
    fn projection_scales_linearly_in_sigma(c in sample(), k in 0.1..5.0f64) {
        let base = restricted_projection(&c).unwrap();
        let scaled = restricted_projection(&CanonicalSampleRestricted { sigma: k * c.sigma, ..c }).unwrap();
        prop_assert_eq!(scaled[0], k * c.sigma);
        prop_assert_eq!(&scaled[1..4], &base[1..4]);
        for i in 4..6 {
            prop_assert!(close(scaled[i], k * base[i], 1e-300));
        }
    }
}
