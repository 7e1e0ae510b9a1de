use granular::dsmc::{run_physical, HaltReason, PhysicalParams};
use granular::ensemble::{InitialDistribution, MomentSeries, VelocityEnsemble};
use granular::kernel::KernelConfig;
use granular::scaling::{build_scaling_map, map_ensemble_to_rescaled, verify_energy_coupling};
use proptest::prelude::*;

fn history() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1e-3f64..1.0, 1e-3f64..10.0), 2..60).prop_map(|steps| {
        let mut t = 0.0;
        steps
            .into_iter()
            .map(|(dt, e)| {
                let p = (t, e);
                t += dt;
                p
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn trapezoid_slopes_are_bracketed(points in history(), tau in 0.01f64..2.0, a in 0.0f64..2.0) {
        let series = MomentSeries::<f64>::from_energy(3, points.iter().copied()).unwrap();
        let map = build_scaling_map(&series, tau, a).unwrap();
        prop_assert_eq!((map.v[0], map.s[0]), (1.0, 0.0));
        for k in 0..map.len() - 1 {
            let slope = (map.v[k + 1] - map.v[k]) / (map.t[k + 1] - map.t[k]);
            let r0 = tau * points[k].1.powf(-a);
            let r1 = tau * points[k + 1].1.powf(-a);
            prop_assert!(slope >= r0.min(r1) * (1.0 - 1e-9) && slope <= r0.max(r1) * (1.0 + 1e-9));
            prop_assert!(map.v[k + 1] > map.v[k]);
        }
        for k in 0..map.len() {
            prop_assert!((map.s[k] - map.v[k].ln() / tau).abs() <= 1e-12 * map.s[k].abs().max(1.0));
        }
    }

    #[test]
    fn frame_change_round_trips(seed in any::<u64>(), v in 0.01f64..100.0) {
        let ens = VelocityEnsemble::<f64>::init(50, 3, InitialDistribution::Maxwellian, seed).unwrap();
        let there = map_ensemble_to_rescaled(&ens, v).unwrap();
        let e = ens.energy() * v * v;
        prop_assert!((there.energy() - e).abs() <= 8.0 * f64::EPSILON * e);
        let back = map_ensemble_to_rescaled(&there, 1.0 / v).unwrap();
        for (x, y) in ens.as_flat().iter().zip(back.as_flat()) {
            prop_assert!((x - y).abs() <= x.abs().next_up() - x.abs());
        }
    }
}

#[test]
fn energy_example_maps_to_unit_energy() {
    let ens = VelocityEnsemble::from_rows(&[vec![0.5, 0.0, 0.0], vec![-0.5, 0.0, 0.0]]).unwrap();
    assert_eq!(ens.energy(), 0.25);
    assert_eq!(map_ensemble_to_rescaled(&ens, 2.0).unwrap().energy(), 1.0);
}

#[test]
fn scaling_factor_blows_up_with_the_energy() {
    let cfg = KernelConfig::new(3, 0.5, 1.0).unwrap();
    let p = PhysicalParams { epsilon_stop: 1e-6, ..Default::default() };
    let run = run_physical(&cfg, 5_000, 1, &p).unwrap();
    assert_eq!(run.halt, HaltReason::BlowUpResolved);
    let map = build_scaling_map(&run.series, 0.5, 1.0).unwrap();
    assert!(*map.v.last().unwrap() > 1e3, "{}", map.v.last().unwrap());
}

#[test]
fn coupling_is_exact_at_the_initial_time() {
    let phys = MomentSeries::<f64>::from_energy(3, [(0.0, 1.0), (0.5, 0.8), (1.0, 0.7)]).unwrap();
    let map = build_scaling_map(&phys, 1.0, 0.0).unwrap();
    let first_only = MomentSeries::<f64>::from_energy(3, [(0.0, 1.0)]).unwrap();
    let one = build_scaling_map(&first_only, 1.0, 0.0).unwrap();
    assert_eq!(verify_energy_coupling(&first_only, &first_only, &one).unwrap(), 0.0);
    let other_grid = MomentSeries::<f64>::from_energy(3, [(0.0, 1.0), (0.6, 0.8), (1.0, 0.7)]).unwrap();
    assert!(verify_energy_coupling(&other_grid, &phys, &map).is_err());
}
