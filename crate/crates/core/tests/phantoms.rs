use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spindle_radon::{Component, GridSpec, PhantomSpec, Vec3};

/// Mean absolute gap between trilinear samples of the rasterized phantom and
/// the phantom itself, at points well inside the grid.
fn sampling_error(spec: &PhantomSpec<f64>, n: usize, points: &[Vec3<f64>]) -> f64 {
    let vol = spec.rasterize(&GridSpec::cube(n, 1.0).unwrap());
    points
        .iter()
        .map(|x| (vol.sample(x) - spec.evaluate(x)).abs())
        .sum::<f64>()
        / points.len() as f64
}

fn interior_points(seed: u64, n: usize) -> Vec<Vec3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
            )
        })
        .collect()
}

fn observed_orders(spec: &PhantomSpec<f64>, seed: u64) -> Vec<f64> {
    let points = interior_points(seed, 2000);
    let errs: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| sampling_error(spec, n, &points))
        .collect();
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn ball_sampling_converges_at_first_order() {
    let ball =
        PhantomSpec::new(vec![Component::ball(Vec3::new(0.05, -0.1, 0.0), 0.5, 1.0)]).unwrap();
    let orders = observed_orders(&ball, 1);
    // the indicator's jump limits the mean error to the O(h) band around the sphere
    let mean = orders.iter().sum::<f64>() / orders.len() as f64;
    assert!(mean >= 0.9, "{orders:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn smooth_phantoms_converge_at_least_at_first_order(
        c in prop::array::uniform3(-0.3..0.3f64),
        radius in 0.2..0.5f64,
        seed in any::<u64>(),
    ) {
        let blob = PhantomSpec::new(vec![Component::gaussian(Vec3::from(c), radius, 1.0)]).unwrap();
        let orders = observed_orders(&blob, seed);
        prop_assert!(orders.iter().all(|&p| p >= 1.0), "{:?}", orders);
    }
}
