use footprint_core::model::{self, EnergyEstimate};
use footprint_core::scenario::{compare, sweep, CurvePoint, ScalingCurve, ScenarioSetting};
use footprint_core::{estimate, Facility, GridCarbonIntensity, ReferenceConstants, Workload};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Inputs = (f64, u64, f64, f64, f64, f64, f64, f64);

/// Emissions written out in one expression, independent of the composed
/// energy → footprint → scaling path.
fn long_form((t, n, p, u, m, pue, ci, psf): Inputs) -> f64 {
    t * (n as f64 * p * u + m * 0.3725) * pue * ci * psf / 1000.0
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn run(w: &Workload, pue: f64, ci: f64) -> model::FootprintEstimate<f64> {
    let f = Facility::new("f", pue).unwrap();
    let ci = GridCarbonIntensity::custom(ci).unwrap();
    estimate(w, &f, &ci).unwrap()
}

prop_compose! {
    fn inputs()(
        t in 0.0f64..10_000.0,
        n in 0u64..100_000,
        p in 0.1f64..500.0,
        u in 0.0f64..=1.0,
        m in 0.0f64..100_000.0,
        pue in 1.0f64..3.0,
        ci in 1.0f64..1_500.0,
        psf in 1.0f64..1_000.0,
    ) -> Inputs {
        (t, n, p, u, m, pue, ci, psf)
    }
}

fn workload(t: f64, n: u64, p: f64, u: f64, m: f64, psf: f64) -> Workload {
    Workload::new(t, n, p, m).with_usage(u).with_psf(psf)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn composed_matches_long_form((t, n, p, u, m, pue, ci, psf) in inputs()) {
        let est = run(&workload(t, n, p, u, m, psf), pue, ci);
        let oracle = long_form((t, n, p, u, m, pue, ci, psf));
        prop_assert!(rel(est.gco2e_scaled, oracle) <= 1e-12, "{} vs {}", est.gco2e_scaled, oracle);
    }
}

proptest! {
    #[test]
    fn linear_in_runtime_psf_ci_and_pue((t, n, p, u, m, pue, ci, psf) in inputs(), k in 1.0f64..50.0) {
        let base = run(&workload(t, n, p, u, m, psf), pue, ci).gco2e_scaled;
        let by_t = run(&workload(t * k, n, p, u, m, psf), pue, ci).gco2e_scaled;
        let by_psf = run(&workload(t, n, p, u, m, psf * k), pue, ci).gco2e_scaled;
        let by_ci = run(&workload(t, n, p, u, m, psf), pue, ci * k).gco2e_scaled;
        let by_pue = run(&workload(t, n, p, u, m, psf), pue * k, ci).gco2e_scaled;
        for scaled in [by_t, by_psf, by_ci, by_pue] {
            prop_assert!(rel(scaled, base * k) <= 1e-12);
        }
    }

    #[test]
    fn monotone_in_every_input((t, n, p, u, m, pue, ci, psf) in inputs()) {
        let base = run(&workload(t, n, p, u, m, psf), pue, ci).gco2e_scaled;
        let u_up = (u + 0.1).min(1.0);
        for bigger in [
            run(&workload(t + 1.0, n, p, u, m, psf), pue, ci),
            run(&workload(t, n + 1, p, u, m, psf), pue, ci),
            run(&workload(t, n, p + 1.0, u, m, psf), pue, ci),
            run(&workload(t, n, p, u_up, m, psf), pue, ci),
            run(&workload(t, n, p, u, m + 1.0, psf), pue, ci),
            run(&workload(t, n, p, u, m, psf), pue + 0.1, ci),
            run(&workload(t, n, p, u, m, psf), pue, ci + 1.0),
        ] {
            prop_assert!(bigger.gco2e_scaled >= base);
        }
    }

    #[test]
    fn idle_cores_leave_only_memory((t, n, p, _u, m, pue, ci, psf) in inputs()) {
        let est = run(&workload(t, n, p, 0.0, m, psf), pue, ci);
        prop_assert_eq!(est.energy.core_kwh, 0.0);
        let memory_only = run(&workload(t, 0, p, 1.0, m, psf), pue, ci);
        prop_assert!(rel(est.gco2e_scaled, memory_only.gco2e_scaled) <= 1e-12);
    }

    #[test]
    fn energy_breakdown_is_conserved((t, n, p, u, m, pue, ci, psf) in inputs()) {
        let EnergyEstimate { core_kwh, memory_kwh, it_kwh, total_kwh } =
            run(&workload(t, n, p, u, m, psf), pue, ci).energy;
        prop_assert!(rel(core_kwh + memory_kwh, it_kwh) <= 1e-12);
        prop_assert!(rel(it_kwh * pue, total_kwh) <= 1e-12);
    }

    #[test]
    fn equivalences_round_trip(g in 0.0f64..1e12) {
        let c = ReferenceConstants::default();
        let e = model::equivalences(g, &c);
        for back in [
            e.car_km_eu * 175.0,
            e.car_km_us * 251.0,
            e.flights_paris_london * 50_000.0,
            e.flights_ny_sf * 570_000.0,
            e.flights_ny_melbourne * 2_310_000.0,
            e.tree_months * 11_000.0 / 12.0,
            e.tree_years * 11_000.0,
        ] {
            prop_assert!(rel(back, g) <= 1e-9, "{back} vs {g}");
        }
    }

    #[test]
    fn quadrupled_cores_at_half_runtime_doubles_emissions(
        t in 0.0f64..10_000.0, n in 1u64..10_000, p in 0.1f64..500.0, u in 0.0f64..=1.0,
        pue in 1.0f64..3.0, ci in 1.0f64..1_500.0,
    ) {
        let single = run(&workload(t, n, p, u, 0.0, 1.0), pue, ci).gco2e_scaled;
        let spread = run(&workload(t / 2.0, 4 * n, p, u, 0.0, 1.0), pue, ci).gco2e_scaled;
        prop_assert_eq!(spread, 2.0 * single);
    }

    #[test]
    fn compare_is_antisymmetric((t, n, p, u, m, pue, ci, psf) in inputs(), pue_b in 1.0f64..3.0, ci_b in 1.0f64..1_500.0) {
        prop_assume!(t > 0.0 && (n > 0 || m > 0.0));
        let setting = |pue, ci| ScenarioSetting {
            label: "s".into(),
            workload: workload(t, n, p, u, m, psf),
            facility: Facility::new("f", pue).unwrap(),
            ci: GridCarbonIntensity::custom(ci).unwrap(),
        };
        let (a, b) = (setting(pue, ci), setting(pue_b, ci_b));
        let ab = compare(&a, &b).unwrap();
        let ba = compare(&b, &a).unwrap();
        prop_assert_eq!(ab.absolute_delta_g, -ba.absolute_delta_g);
        prop_assert!(rel((1.0 + ab.relative_change) * (1.0 + ba.relative_change), 1.0) <= 1e-9);
    }
}

#[test]
fn parallel_speedup_breaks_even_exactly_at_linear_scaling() {
    let f = Facility::world_average();
    let ci = GridCarbonIntensity::custom(475.0).unwrap();
    let base = Workload::new(0.0, 0, 10.0, 0.0);
    // Perfect scaling keeps core-hours constant, so every point ties.
    let linear = ScalingCurve::new(vec![
        CurvePoint {
            cores: 1,
            runtime_hours: 64.0,
        },
        CurvePoint {
            cores: 2,
            runtime_hours: 32.0,
        },
        CurvePoint {
            cores: 4,
            runtime_hours: 16.0,
        },
    ])
    .unwrap();
    let r = sweep(&base, &linear, &f, &ci).unwrap();
    assert!(r
        .rows
        .windows(2)
        .all(|w| w[0].estimate.gco2e_scaled == w[1].estimate.gco2e_scaled));
    assert_eq!(r.optimal_core_count, 1);

    // Any sublinear step costs emissions.
    let sub = ScalingCurve::new(vec![
        CurvePoint {
            cores: 1,
            runtime_hours: 64.0,
        },
        CurvePoint {
            cores: 2,
            runtime_hours: 33.0,
        },
    ])
    .unwrap();
    let r = sweep(&base, &sub, &f, &ci).unwrap();
    assert!(r.rows[1].estimate.gco2e_scaled > r.rows[0].estimate.gco2e_scaled);
    assert_eq!(r.optimal_core_count, 1);
}

#[test]
fn sweep_argmin_is_invariant_under_positive_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..200 {
        let len = rng.random_range(1..12);
        let mut cores = 1u64;
        let mut points = Vec::with_capacity(len);
        for _ in 0..len {
            points.push(CurvePoint {
                cores,
                runtime_hours: rng.random_range(0.01..500.0),
            });
            cores += rng.random_range(1..64);
        }
        let curve = ScalingCurve::new(points).unwrap();
        let base = Workload::new(
            0.0,
            0,
            rng.random_range(1.0..300.0),
            rng.random_range(0.0..512.0),
        )
        .with_usage(rng.random_range(0.1..=1.0));
        let f = Facility::new("f", rng.random_range(1.0..2.5)).unwrap();
        let ci = GridCarbonIntensity::custom(rng.random_range(10.0..900.0)).unwrap();
        let reference = sweep(&base, &curve, &f, &ci).unwrap().optimal_core_count;

        let k = rng.random_range(1.01..20.0);
        let scaled_ci = GridCarbonIntensity::custom(ci.gco2e_per_kwh * k).unwrap();
        let scaled_pue = Facility::new("f", f.pue * k).unwrap();
        let scaled_psf = base.clone().with_psf(k);
        assert_eq!(
            sweep(&base, &curve, &f, &scaled_ci)
                .unwrap()
                .optimal_core_count,
            reference
        );
        assert_eq!(
            sweep(&base, &curve, &scaled_pue, &ci)
                .unwrap()
                .optimal_core_count,
            reference
        );
        assert_eq!(
            sweep(&scaled_psf, &curve, &f, &ci)
                .unwrap()
                .optimal_core_count,
            reference
        );
    }
}

#[test]
fn single_precision_tracks_double() {
    let w32 = model::Workload::<f32>::new(504.0, 12, 10.0, 10.0);
    let f32_facility = model::Facility::<f32>::new("f", 1.67).unwrap();
    let ci32 = model::GridCarbonIntensity::<f32>::custom(475.0).unwrap();
    let got = model::estimate(&w32, &f32_facility, &ci32)
        .unwrap()
        .gco2e_single;
    let want = run(&Workload::new(504.0, 12, 10.0, 10.0), 1.67, 475.0).gco2e_single;
    assert!(rel(got as f64, want) < 1e-6);
}
