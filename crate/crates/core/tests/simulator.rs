mod common;

use std::sync::Arc;

use impdde::grid::Grid;
use impdde::phi::{solve_fixed_point, SolveOptions};
use impdde::simulator::{breakpoints, deviation_from, integrate, long_run_floor, periodicity_residual, InitialHistory, DEFAULT_STEP};
use impdde::{SimError, Side};

fn constant(x: &[f64]) -> InitialHistory {
    InitialHistory::Constant(x.to_vec())
}

#[test]
fn linear_decay() {
    let spec = common::linear_decay(1.0, 1.0, None);
    let traj = integrate(&spec, constant(&[1.0]), 1.0, DEFAULT_STEP).unwrap();
    let x = traj.value(0, 1.0, Side::Left);
    assert!((x - (-1f64).exp()).abs() <= 1e-9, "{x}");
    assert!(traj.events().is_empty());
}

#[test]
fn impulse_is_applied_algebraically() {
    let spec = common::linear_decay(1.0, 1.0, Some((0.5, 0.5)));
    let traj = integrate(&spec, constant(&[1.0]), 1.0, DEFAULT_STEP).unwrap();
    let ev = &traj.events()[0];
    assert_eq!((ev.k, ev.component), (0, 1));
    assert!((ev.t - 0.5).abs() < 1e-15);
    assert_eq!(ev.jump, 0.5 * ev.before);
    let (l, r) = (traj.value(0, 0.5, Side::Left), traj.value(0, 0.5, Side::Right));
    assert_eq!(l, ev.before);
    assert_eq!(r, ev.before + ev.jump);
    assert!((l - (-0.5f64).exp()).abs() < 1e-10);
    assert!((traj.value(0, 1.0, Side::Left) - 1.5 * (-1f64).exp()).abs() < 1e-10);
    // one event per period, each at t_k + q omega
    let traj = integrate(&spec, constant(&[1.0]), 5.0, DEFAULT_STEP).unwrap();
    let ts: Vec<f64> = traj.events().iter().map(|e| e.t).collect();
    assert_eq!(ts.len(), 5);
    for (q, t) in ts.iter().enumerate() {
        assert!((t - (0.5 + q as f64)).abs() < 1e-12);
    }
}

#[test]
fn rk4_order() {
    let spec = common::linear_decay(2.0, 1.0, None);
    let err = |h: f64| {
        let traj = integrate(&spec, constant(&[1.0]), 1.0, h).unwrap();
        (traj.value(0, 1.0, Side::Left) - (-2f64).exp()).abs()
    };
    for h in [1e-2, 5e-3, 2.5e-3] {
        let ratio = err(h) / err(h / 2.0);
        assert!((12.0..=20.0).contains(&ratio), "h {h}: ratio {ratio}");
    }
}

#[test]
fn critical_planar_decays_algebraically() {
    // eta = 0 sits exactly at s(M) = 0, so the decay is like 2 / t rather than exponential
    let spec = impdde::zoo::planar_autonomous(impdde::zoo::planar_default_omega(), [0.0, 0.0]).unwrap().spec;
    let omega = spec.omega();
    let traj = integrate(&spec, constant(&[1.0, 1.0]), 200.0, DEFAULT_STEP).unwrap();
    let mut last = f64::INFINITY;
    for t in [25.0, 50.0, 100.0, 200.0] {
        let f = traj.value(0, t, Side::Left).min(traj.value(1, t, Side::Left));
        assert!(f < last, "floor must keep decreasing: {f} at t = {t}");
        last = f;
    }
    let floor = long_run_floor(&traj, omega);
    let tf = 200.0 * floor[0];
    assert!((1.5..2.5).contains(&tf), "t * floor = {tf}");
}

#[test]
fn admissible_impulses_persist() {
    let spec = impdde::zoo::entry("planar_autonomous").unwrap().spec;
    let traj = integrate(&spec, constant(&[1.0, 1.0]), 100.0, DEFAULT_STEP).unwrap();
    let floor = long_run_floor(&traj, spec.omega());
    assert!(floor.iter().all(|&f| f > 0.5), "{floor:?}");
    assert_eq!(traj.events().len(), 2 * (100.0 / spec.omega()).ceil() as usize);

    let spec = impdde::zoo::entry("scalar_nicholson").unwrap().spec;
    let traj = integrate(&spec, constant(&[0.1]), 20.0 * spec.omega(), DEFAULT_STEP).unwrap();
    assert!(long_run_floor(&traj, spec.omega())[0] > 0.1);
}

#[test]
fn positivity_on_zoo() {
    for (id, spec) in common::zoo_specs() {
        for level in [0.0, 0.05, 1.0, 5.0] {
            let traj = integrate(&spec, constant(&vec![level; spec.n()]), 10.0 * spec.omega(), DEFAULT_STEP)
                .unwrap_or_else(|e| panic!("{id} from {level}: {e}"));
            for (t, l, r) in traj.nodes() {
                assert!(l.iter().chain(&r).all(|&x| x >= -1e-10), "{id} at {t}");
            }
        }
    }
}

#[test]
fn fixed_points_are_reproduced() {
    for (id, spec) in common::zoo_specs() {
        let r = solve_fixed_point(&spec, &SolveOptions::default()).unwrap();
        if !r.converged {
            continue;
        }
        let omega = spec.omega();
        let traj = integrate(&spec, InitialHistory::Periodic(r.solution.clone()), 3.0 * omega, DEFAULT_STEP).unwrap();
        let dev = deviation_from(&traj, &r.solution, 3.0 * omega);
        assert!(dev <= 1e-4 * r.sup_norm.max(1.0), "{id}: {dev:e}");
        let res = periodicity_residual(&traj, omega, omega);
        assert!(res <= 1e-5, "{id}: {res:e}");
    }
}

#[test]
fn equilibrium_has_zero_residual() {
    let spec = common::constant_forcing(1.0);
    let traj = integrate(&spec, constant(&[2.0]), 5.0, DEFAULT_STEP).unwrap();
    assert!(periodicity_residual(&traj, 1.0, 1.0) <= 1e-14);
    assert!((traj.value(0, 4.3, Side::Left) - 2.0).abs() <= 1e-14);
}

#[test]
fn residual_shrinks_along_transient() {
    let spec = impdde::zoo::entry("scalar_nicholson").unwrap().spec;
    let omega = spec.omega();
    let traj = integrate(&spec, constant(&[0.05]), 40.0 * omega, DEFAULT_STEP).unwrap();
    let res: Vec<f64> = [0.0, 4.0, 10.0, 20.0, 35.0].iter().map(|p| periodicity_residual(&traj, omega, p * omega)).collect();
    assert!(res[0] > 1e-2, "{res:?}");
    assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    assert!(res[4] < 1e-6, "{res:?}");
}

#[test]
fn invalid_requests() {
    let spec = impdde::zoo::entry("scalar_nicholson").unwrap().spec;
    assert!(matches!(integrate(&spec, constant(&[-0.5]), 1.0, DEFAULT_STEP), Err(SimError::Invalid(_))));
    assert!(matches!(integrate(&spec, constant(&[1.0, 1.0]), 1.0, DEFAULT_STEP), Err(SimError::Invalid(_))));
    assert!(matches!(integrate(&spec, constant(&[1.0]), 0.0, DEFAULT_STEP), Err(SimError::Invalid(_))));
    assert!(matches!(integrate(&spec, constant(&[1.0]), 1.0, -1.0), Err(SimError::Invalid(_))));
    let grid = Arc::new(Grid::for_spec(&spec, 64));
    let neg = impdde::GridFunction::constant(grid, &[-1.0]);
    assert!(matches!(integrate(&spec, InitialHistory::Periodic(neg), 1.0, DEFAULT_STEP), Err(SimError::Invalid(_))));
}

#[test]
fn steps_land_on_breakpoints() {
    for (id, spec) in common::zoo_specs() {
        let t_end = 3.0 * spec.omega();
        let bps = breakpoints(&spec, t_end);
        assert!(bps.windows(2).all(|w| w[0] < w[1]), "{id}");
        assert!((bps.last().unwrap() - t_end).abs() < 1e-12);
        let traj = integrate(&spec, constant(&vec![1.0; spec.n()]), t_end, DEFAULT_STEP).unwrap();
        let ends: Vec<f64> = traj.steps().iter().map(|s| s.t1).collect();
        for &b in &bps {
            assert!(ends.iter().any(|&e| (e - b).abs() < 1e-12), "{id}: no step ends at {b}");
        }
        for (k, tk) in spec.impulses().instants_in(0.0, t_end) {
            let _ = k;
            assert!(ends.iter().any(|&e| (e - tk).abs() < 1e-12), "{id}: no step ends at impulse {tk}");
        }
        // continuity away from events
        for w in traj.steps().windows(2) {
            if !traj.events().iter().any(|e| (e.t - w[0].t1).abs() < 1e-12) {
                for i in 0..spec.n() {
                    assert_eq!(w[0].x1[i], w[1].x0[i], "{id}");
                }
            }
        }
    }
}
