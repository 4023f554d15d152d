mod common;

use common::{max_relative_error, naive_cost, numeric_gradient, random_instance};
use mfnav::perception::{FrameBuffer, PerceptionConfig, PointCloud2D};
use mfnav::planner::{
    build_reference, cost, cost_and_gradient, postprocess, rollout, select_points, solve_mpc, ConstraintPoint,
    ControlPostConfig, PipelineMode, Planner, PlannerConfig, PlannerError, PointOrigin,
};
use mfnav::prediction::{PredictionConfig, VirtualPoint};
use mfnav::{ControlCommand, Pose2D, RobotState, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn straight_waypoints() -> Vec<Vec2> {
    (0..5).map(|i| Vec2::new(2.0 * i as f64, 0.0)).collect()
}

fn origin() -> RobotState {
    RobotState::at_rest(Pose2D::new(0.0, 0.0, 0.0))
}

fn scan(x: f64, y: f64) -> ConstraintPoint {
    ConstraintPoint {
        position: Vec2::new(x, y),
        weight: 1.0,
        origin: PointOrigin::CurrentScan,
    }
}

#[test]
fn free_space_optimum_drives_straight() {
    let cfg = PlannerConfig::default();
    let reference = build_reference(&straight_waypoints(), Vec2::zeros(), cfg.v_ref, cfg.dt, cfg.horizon);
    let (u, report) = solve_mpc(&origin(), &reference, &[], &cfg, None).unwrap();
    assert!(u[0].v > 0.0);
    assert!(u[0].omega.abs() < 0.05);
    assert!(report.final_cost.total <= report.initial_cost);
}

#[test]
fn point_wall_beats_driving_through_it() {
    let cfg = PlannerConfig::default();
    let reference = build_reference(&straight_waypoints(), Vec2::zeros(), cfg.v_ref, cfg.dt, cfg.horizon);
    let wall: Vec<ConstraintPoint> = (0..21).map(|i| scan(1.0, -1.0 + 0.1 * i as f64)).collect();
    let naive: Vec<ControlCommand> = (0..cfg.horizon).map(|_| ControlCommand::new(cfg.v_ref, 0.0)).collect();
    let naive_cost = cost(&naive, &origin(), &reference, &wall, &cfg).total;
    let (u, report) = solve_mpc(&origin(), &reference, &wall, &cfg, None).unwrap();
    let solved = cost(&u, &origin(), &reference, &wall, &cfg).total;
    assert!(solved < naive_cost, "{solved} vs {naive_cost}");
    assert_eq!(solved, report.final_cost.total);
}

#[test]
fn converged_warm_start_is_a_fixed_point() {
    let cfg = PlannerConfig {
        iterations: 2000,
        ..PlannerConfig::default()
    };
    let reference = build_reference(&straight_waypoints(), Vec2::zeros(), cfg.v_ref, cfg.dt, cfg.horizon);
    let pts = [scan(1.5, 0.6), scan(1.6, 0.7)];
    let (converged, _) = solve_mpc(&origin(), &reference, &pts, &cfg, None).unwrap();
    let budget = PlannerConfig::default();
    let (_, report) = solve_mpc(&origin(), &reference, &pts, &budget, Some(&converged)).unwrap();
    assert!(report.initial_cost - report.final_cost.total < 1e-6);
}

#[test]
fn warm_start_length_is_checked() {
    let cfg = PlannerConfig::default();
    let reference = build_reference(&straight_waypoints(), Vec2::zeros(), cfg.v_ref, cfg.dt, cfg.horizon);
    let short = vec![ControlCommand::default(); 3];
    assert!(matches!(
        solve_mpc(&origin(), &reference, &[], &cfg, Some(&short)),
        Err(PlannerError::WarmStartLength { expected: 20, got: 3 })
    ));
}

#[test]
fn non_finite_cost_aborts_with_iterate() {
    let cfg = PlannerConfig::default();
    let reference = build_reference(&straight_waypoints(), Vec2::zeros(), cfg.v_ref, cfg.dt, cfg.horizon);
    let bad = [scan(f64::NAN, 0.0)];
    let mut state = origin();
    state.pose.x = 1.0;
    let pts = [ConstraintPoint { weight: f64::INFINITY, ..scan(1.0, 0.0) }];
    assert!(matches!(
        solve_mpc(&state, &reference, &pts, &cfg, None),
        Err(PlannerError::NonFiniteCost { .. })
    ));
    assert!(matches!(
        solve_mpc(&origin(), &reference, &bad, &cfg, None),
        Err(PlannerError::NonFiniteCost { iterate }) if iterate.len() == cfg.horizon
    ));
}

#[test]
fn random_five_step_cost_matches_independent_evaluator() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 200 {
        let mut inst = random_instance(&mut rng);
        if inst.cfg.horizon < 5 {
            continue;
        }
        checked += 1;
        inst.cfg.horizon = 5;
        inst.controls.truncate(5);
        let lib = cost(&inst.controls, &inst.state, &inst.reference, &inst.points, &inst.cfg).total;
        let naive = naive_cost(&inst);
        assert!((lib - naive).abs() <= 1e-9 * naive.abs().max(1.0), "{lib} vs {naive}");
    }
}

#[test]
fn tiny_horizon_beats_control_grid() {
    let cfg = PlannerConfig {
        horizon: 2,
        v_ref: 1.0,
        iterations: 200,
        ..PlannerConfig::default()
    };
    let wps: Vec<Vec2> = (0..5).map(|i| Vec2::new(0.5 * i as f64, 0.05 * i as f64)).collect();
    let state = RobotState::at_rest(Pose2D::new(0.0, 0.0, 0.1));
    let reference = build_reference(&wps, Vec2::zeros(), cfg.v_ref, cfg.dt, cfg.horizon);
    let pts = [scan(0.75, 0.3), scan(0.8, -0.35)];
    let (u, _) = solve_mpc(&state, &reference, &pts, &cfg, None).unwrap();
    let solved = cost(&u, &state, &reference, &pts, &cfg).total;

    let axis = |lim: f64, i: usize| -lim + 2.0 * lim * i as f64 / 20.0;
    let mut best = f64::INFINITY;
    for a in 0..21 {
        for b in 0..21 {
            for c in 0..21 {
                for d in 0..21 {
                    let grid = [
                        ControlCommand::new(axis(cfg.v_max, a), axis(cfg.omega_max, b)),
                        ControlCommand::new(axis(cfg.v_max, c), axis(cfg.omega_max, d)),
                    ];
                    best = best.min(cost(&grid, &state, &reference, &pts, &cfg).total);
                }
            }
        }
    }
    assert!(solved <= best + 1e-3, "solver {solved} vs grid {best}");
}

#[test]
fn heavier_penalty_never_increases_violation() {
    // On a fixed instance with active constraints the optimum under 10x rho1
    // sits no deeper inside d_safe than under rho1.
    let base = PlannerConfig {
        iterations: 400,
        ..PlannerConfig::default()
    };
    let reference = build_reference(&straight_waypoints(), Vec2::zeros(), base.v_ref, base.dt, base.horizon);
    let pts: Vec<ConstraintPoint> = (0..5).map(|i| scan(1.2 + 0.1 * i as f64, 0.3)).collect();
    let violation = |cfg: &PlannerConfig| {
        let (u, r) = solve_mpc(&origin(), &reference, &pts, cfg, None).unwrap();
        assert!(r.final_cost.obstacle > 0.0, "constraints should be active");
        cost(&u, &origin(), &reference, &pts, cfg).obstacle / cfg.rho1
    };
    let heavy = PlannerConfig {
        rho1: base.rho1 * 10.0,
        ..base
    };
    assert!(violation(&heavy) <= violation(&base));
}

#[test]
fn planner_cycle_is_deterministic_and_timed() {
    let make = || {
        Planner::new(
            PlannerConfig::default(),
            PredictionConfig::default(),
            PerceptionConfig::default(),
            PipelineMode::default(),
        )
    };
    let mut buffer = FrameBuffer::new();
    for k in 0..3 {
        let blob: Vec<Vec2> = (0..12)
            .map(|i| Vec2::new(3.0 + 0.1 * k as f64 + 0.05 * (i % 4) as f64, 1.0 + 0.05 * (i / 4) as f64))
            .collect();
        buffer.push(PointCloud2D::new(blob, 0.1 * k as f64)).unwrap();
    }
    let run = || {
        let mut p = make();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        p.plan_cycle(&origin(), &straight_waypoints(), &buffer, &mut rng).unwrap()
    };
    let (a, ra) = run();
    let (b, _) = run();
    assert_eq!(a, b);
    assert!(a.v > 0.0);
    assert!(ra.timings.total >= ra.timings.solve);
    assert!(ra.solve.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let (_, analytic) = cost_and_gradient(&inst.controls, &inst.state, &inst.reference, &inst.points, &inst.cfg);
        let numeric = numeric_gradient(&inst, 1e-5);
        prop_assert!(max_relative_error(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn cost_history_is_non_increasing(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let (u, report) = solve_mpc(&inst.state, &inst.reference, &inst.points, &inst.cfg, Some(&inst.controls)).unwrap();
        for w in report.cost_history.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(report.final_cost.total <= report.initial_cost);
        for c in &u {
            prop_assert!(c.v.abs() <= inst.cfg.v_max && c.omega.abs() <= inst.cfg.omega_max);
        }
    }

    #[test]
    fn far_points_are_free(seed in any::<u64>()) {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let path = rollout(inst.state.pose, &inst.controls, inst.cfg.dt);
        let reach = inst.cfg.d_safe + inst.cfg.footprint_radius;
        let far: Vec<ConstraintPoint> = inst
            .points
            .iter()
            .copied()
            .filter(|p| path[1..].iter().all(|s| (p.position - Vec2::new(s[0], s[1])).norm() > reach))
            .collect();
        let c = cost(&inst.controls, &inst.state, &inst.reference, &far, &inst.cfg);
        prop_assert_eq!(c.obstacle, 0.0);
        let none = cost(&inst.controls, &inst.state, &inst.reference, &[], &inst.cfg);
        prop_assert_eq!(c.total, none.total);
    }

    #[test]
    fn postprocess_bounds(prev in -2.0f64..2.0, v in -2.0f64..2.0, w in -5.0f64..5.0, beta in 0.0f64..1.0, clip in 0.1f64..3.0) {
        let out = postprocess(v, w, prev, &ControlPostConfig { beta, omega_clip: clip });
        prop_assert!(out.omega.abs() <= clip);
        prop_assert!(out.v >= prev.min(v) - 1e-12 && out.v <= prev.max(v) + 1e-12);
    }

    #[test]
    fn reference_steps_never_exceed_v_ref(
        ys in prop::collection::vec(-3.0f64..3.0, 5),
        rx in -2.0f64..12.0, ry in -3.0f64..3.0, v_ref in 0.1f64..2.0, h in 1usize..30,
    ) {
        let wps: Vec<Vec2> = ys.iter().enumerate().map(|(i, y)| Vec2::new(2.5 * i as f64, *y)).collect();
        let r = build_reference(&wps, Vec2::new(rx, ry), v_ref, 0.1, h);
        prop_assert_eq!(r.states.len(), h + 1);
        for w in r.states.windows(2) {
            prop_assert!((w[1].position() - w[0].position()).norm() <= v_ref * 0.1 + 1e-9);
        }
    }

    #[test]
    fn select_points_matches_sort_oracle(
        scan_pts in prop::collection::vec((-8.0f64..8.0, -8.0f64..8.0), 0..150),
        virt in prop::collection::vec((-8.0f64..8.0, -8.0f64..8.0, 0.0f64..2.0), 0..60),
        m in 1usize..120,
        ox in -2.0f64..2.0, oy in -2.0f64..2.0,
    ) {
        let cfg = PlannerConfig { max_points: m, ..PlannerConfig::default() };
        let cloud = PointCloud2D::new(scan_pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(), 0.0);
        let vps: Vec<VirtualPoint> = virt
            .iter()
            .map(|&(x, y, s)| VirtualPoint { position: Vec2::new(x, y), track_id: 0, step: 1, source_speed: s })
            .collect();
        let o = Vec2::new(ox, oy);
        let got = select_points(o, &cloud, &vps, &cfg);

        let mut all: Vec<ConstraintPoint> = cloud
            .points
            .iter()
            .map(|p| scan(p.x, p.y))
            .chain(vps.iter().map(|v| ConstraintPoint {
                position: v.position,
                weight: 1.0 + cfg.kappa * v.source_speed,
                origin: PointOrigin::Virtual,
            }))
            .collect();
        all.sort_by(|a, b| {
            (a.position - o).norm().total_cmp(&(b.position - o).norm())
                .then(a.position.x.total_cmp(&b.position.x))
                .then(a.position.y.total_cmp(&b.position.y))
        });
        all.truncate(m);
        prop_assert_eq!(got, all);
    }
}
