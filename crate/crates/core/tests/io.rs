use proptest::prelude::*;
use spindle_radon::io::{
    parse_data, parse_params, read_volume, write_data, write_params, write_volume, Report,
    SampleType,
};
use spindle_radon::{
    Component, GridSpec, PhantomSpec, ProjectionParams, RestrictedParams, SurfaceKind, TorusParams,
    Vec3, VoxelGrid,
};

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::ZERO
}

fn grid_strategy() -> impl Strategy<Value = GridSpec<f64>> {
    (
        prop::array::uniform3(1usize..6),
        prop::array::uniform3(0.01..2.0f64),
        prop::array::uniform3(-3.0..3.0f64),
    )
        .prop_map(|(d, s, o)| GridSpec::new(d, Vec3::from(s), Vec3::from(o)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f64_volumes_round_trip_exactly(spec in grid_strategy(), seed in prop::collection::vec(finite(), 125)) {
        let values = (0..spec.len()).map(|i| seed[i % seed.len()]).collect();
        let vol = VoxelGrid::from_values(spec, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        write_volume(&path, &vol, SampleType::F64).unwrap();
        prop_assert_eq!(read_volume(&path).unwrap(), vol);
    }

    #[test]
    fn f32_volumes_round_trip_at_single_precision(spec in grid_strategy(), seed in prop::collection::vec(-1e6..1e6f64, 125)) {
        let values: Vec<f64> = (0..spec.len()).map(|i| seed[i % seed.len()]).collect();
        let vol = VoxelGrid::from_values(spec, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        write_volume(&path, &vol, SampleType::F32).unwrap();
        let back = read_volume(&path).unwrap();
        prop_assert_eq!(back.spec, vol.spec);
        for (a, b) in back.values.iter().zip(&vol.values) {
            prop_assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn restricted_params_round_trip(rows in prop::collection::vec((0.01..20.0f64, -2.0..2.0f64, -2.0..2.0f64), 0..30)) {
        let params: Vec<ProjectionParams<f64>> =
            rows.iter().map(|&(p, x, y)| RestrictedParams::new(p, x, y).unwrap().into()).collect();
        let mut buf = Vec::new();
        write_params(&mut buf, &params).unwrap();
        let back = parse_params(std::str::from_utf8(&buf).unwrap(), SurfaceKind::Apple).unwrap();
        prop_assert_eq!(back, params);
    }

    #[test]
    fn full_params_round_trip(
        rows in prop::collection::vec(
            (0.1..2.0f64, 0.1..3.0f64, prop::array::uniform3(-1.0..1.0f64), 0.0..std::f64::consts::TAU, 0.0..std::f64::consts::FRAC_PI_2),
            1..20,
        ),
        apple in any::<bool>(),
    ) {
        let kind = if apple { SurfaceKind::Apple } else { SurfaceKind::Lemon };
        let params: Vec<ProjectionParams<f64>> = rows
            .iter()
            .map(|&(t, gap, x0, a, b)| TorusParams::new(t * t + gap, t, Vec3::from(x0), a, b, kind).unwrap().into())
            .collect();
        let mut buf = Vec::new();
        write_params(&mut buf, &params).unwrap();
        let back = parse_params(std::str::from_utf8(&buf).unwrap(), kind).unwrap();
        prop_assert_eq!(back, params);
    }

    #[test]
    fn data_round_trips(values in prop::collection::vec(finite(), 0..50)) {
        let mut buf = Vec::new();
        write_data(&mut buf, &values).unwrap();
        prop_assert_eq!(parse_data(std::str::from_utf8(&buf).unwrap()).unwrap(), values);
    }

    #[test]
    fn reports_round_trip(entries in prop::collection::vec(("[a-z_][a-z0-9_]{0,12}", "[!-~]([ -~]{0,20}[!-~])?"), 0..12)) {
        let mut r = Report::new();
        for (k, v) in &entries {
            r.push(k.clone(), v);
        }
        prop_assert_eq!(Report::parse(&r.to_text()).unwrap(), r);
    }

    #[test]
    fn phantom_specs_round_trip(
        comps in prop::collection::vec(
            (0u8..3, prop::array::uniform3(-1.0..1.0f64), 0.01..0.5f64, -2.0..2.0f64, 0.001..0.2f64),
            0..6,
        ),
    ) {
        let components = comps
            .iter()
            .map(|&(k, c, r, v, th)| {
                let c = Vec3::from(c);
                match k {
                    0 => Component::ball(c, r, v),
                    1 => Component::gaussian(c, r, v),
                    _ => Component::shell(c, r, th, v),
                }
            })
            .collect();
        let spec = PhantomSpec::<f64>::new(components).unwrap();
        prop_assert_eq!(PhantomSpec::from_toml_str(&spec.to_toml_string()).unwrap(), spec);
    }
}
