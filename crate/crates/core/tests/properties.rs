mod common;

use std::sync::Arc;

use charflow::boundary::BoundaryOperator;
use charflow::flow::{BoundingBox, Domain, Flow, VectorField};
use charflow::grid::{CharacteristicGrid, Measure};
use charflow::scenario::{preset, ScenarioConfig, PRESETS};
use charflow::semigroup::{evolve_full, series_evolve, default_series_terms, Mode};
use charflow::{GridFunction, Side, TraceVector};
use common::{slab, Trig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn group_law_closed_forms(omega in -2.0f64..2.0, rate in -1.0f64..1.0, x0 in -1.0f64..1.0, x1 in -1.0f64..1.0,
                              s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let domain = Domain::Box { lo: [-5.0, -5.0], hi: [5.0, 5.0] };
        for field in [VectorField::rotation(omega), VectorField::linear(rate), VectorField::constant([omega, rate])] {
            let flow = Flow::new(field, domain.clone(), 1e-3, 10.0).unwrap();
            let a = flow.integrate(flow.integrate([x0, x1], s).unwrap(), t).unwrap();
            let b = flow.integrate([x0, x1], s + t).unwrap();
            prop_assert!(close(a, b) <= 1e-12 * (1.0 + b[0].hypot(b[1])));
        }
    }

    #[test]
    fn group_law_rk4(omega in -2.0f64..2.0, x0 in -1.0f64..1.0, x1 in -1.0f64..1.0, s in 0.0f64..0.5, t in 0.0f64..0.5) {
        // A rotation given without its closed form goes through RK4.
        let field = VectorField::custom(move |x| [-omega * x[1], omega * x[0]], omega.abs(), true);
        let domain = Domain::Box { lo: [-5.0, -5.0], hi: [5.0, 5.0] };
        let flow = Flow::new(field, domain, 1e-3, 10.0).unwrap();
        let a = flow.integrate(flow.integrate([x0, x1], s).unwrap(), t).unwrap();
        let b = flow.integrate([x0, x1], s + t).unwrap();
        prop_assert!(close(a, b) <= 1e-9);
        let exact = flow.integrate([x0, x1], s + t).unwrap();
        let (c, sn) = ((omega * (s + t)).cos(), (omega * (s + t)).sin());
        prop_assert!(close(exact, [c * x0 - sn * x1, sn * x0 + c * x1]) <= 1e-9);
    }

    #[test]
    fn config_round_trip(which in 0usize..PRESETS.len(), p in 1.1f64..4.0, k in 1usize..5, alpha in 0.0f64..2.0) {
        let mut cfg = preset(PRESETS[which]).unwrap();
        cfg.run.p = p;
        cfg.grid.ds = 1e-3 * k as f64;
        cfg.run.times = vec![0.0, cfg.grid.ds * 7.0];
        if let charflow::scenario::BoundaryConfig::Multiplicative { alpha: a, .. } = &mut cfg.boundary {
            *a = charflow::scenario::Gain::Uniform(alpha);
        }
        let text = cfg.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text, None).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn kernel_norm_bounds_every_trace(seed in 0u64..1000, p in 1.2f64..3.5) {
        let flow = Flow::new(VectorField::constant([1.0, 0.0]), Domain::Disk { center: [0.0, 0.0], radius: 1.0 }, 2.5e-3, 10.0).unwrap();
        let grid = Arc::new(CharacteristicGrid::build(&flow, &Measure::Lebesgue, 8, 1e-2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let (n_in, n_out) = (grid.inlets().len(), grid.outlets().len());
        let matrix: Vec<Vec<f64>> = (0..n_in).map(|_| (0..n_out).map(|_| rng.gen_range(0.0..2.0)).collect()).collect();
        let h = BoundaryOperator::kernel(matrix, grid.weights(Side::Outgoing)).unwrap();
        let norm = h.operator_norm(&grid, p).unwrap();
        prop_assert!(!norm.lower_bound_only);
        for _ in 0..20 {
            let psi = TraceVector::new(grid.clone(), Side::Outgoing, (0..n_out).map(|_| rng.gen_range(-1.0..1.0)).collect(), p).unwrap();
            let ratio = h.apply(&psi).unwrap().lp_norm() / psi.lp_norm();
            prop_assert!(ratio <= norm.value * (1.0 + 1e-6), "{} > {}", ratio, norm.value);
        }
    }

    #[test]
    fn semigroup_law_and_series(seed in 0u64..1000, alpha in 0.0f64..1.5, s in 0usize..1500, t in 0usize..1500) {
        let sc = slab(alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Trig::sample(&mut rng, 5.0);
        let f = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| r.eval(x)).unwrap();
        let (s, t) = (s as f64 * 1e-3, t as f64 * 1e-3);
        let h = &sc.boundary;
        let twice = evolve_full(&evolve_full(&f, s, h, Mode::ExactShift).unwrap(), t, h, Mode::ExactShift).unwrap();
        let once = evolve_full(&f, s + t, h, Mode::ExactShift).unwrap();
        let scale = f.lp_norm() * alpha.max(1.0).powi(4);
        prop_assert!(twice.sub(&once).lp_norm() <= 1e-12 * scale);
        let k = default_series_terms(&sc.grid, s + t).unwrap();
        let series = series_evolve(&f, s + t, h, Some(k)).unwrap();
        prop_assert!(series.sub(&once).lp_norm() <= 1e-12 * scale);
    }

    #[test]
    fn resolvent_boundary_condition_holds(alpha in 0.0f64..0.9, lambda in 0.3f64..5.0) {
        let sc = slab(alpha);
        let g = GridFunction::from_fn(sc.grid.clone(), 2.0, |x| 1.0 + x[0] * x[0]).unwrap();
        let (f, rep) = charflow::resolvent::resolvent_apply(&g, lambda, &sc.boundary, 1e-13).unwrap();
        let inflow = f.trace(Side::Incoming).unwrap().values()[0];
        let outflow = f.trace(Side::Outgoing).unwrap().values()[0];
        prop_assert!((inflow - alpha * outflow).abs() <= 1e-10 * (1.0 + outflow.abs()));
        prop_assert!(rep.residual <= 1e-3);
    }

    #[test]
    fn measure_invariance_of_rotations(omega in -3.0f64..3.0, t in 0.1f64..2.0) {
        let cell = BoundingBox::rect([-0.5, -0.3], [0.4, 0.6]);
        let r = charflow::flow::check_measure_invariance(&VectorField::rotation(omega), &cell, t, 16).unwrap();
        prop_assert!(r <= 1e-10);
    }
}
