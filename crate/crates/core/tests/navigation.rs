mod common;

use common::*;
use proptest::prelude::*;
use rssinav::geometry::{Point, Pose};
use rssinav::navctl::{
    check_stop_and_wait, forward_command, turn_command, CommandKind, DriveCommand, DrivetrainCalibration, Fix,
    NavConfig, NavEvent, NavMode, NavState, Navigator, TurnDirection,
};
use rssinav::pipeline::{fit_pipeline, PipelineConfig};
use rssinav::planner::{astar, extract_checkpoints, first_heading, CheckpointAction, GridMap, Heading};
use rssinav::rfsim::{
    calibrate_drivetrain, corner_success_rate, expected_rssi, generate_synthetic_dataset, reference_world, run_trial,
    simulate_scan, step_robot, Localizer, SimRobot, TrialConfig, REFERENCE_CORNER_CLEARANCE, REFERENCE_CORNER_GOAL,
    REFERENCE_CORNER_START,
};

fn corner_config() -> TrialConfig<f64> {
    TrialConfig {
        clearance_cells: REFERENCE_CORNER_CLEARANCE,
        ..TrialConfig::default()
    }
}

#[test]
fn oracle_trial_with_zero_veer_succeeds_precisely() {
    let mut world = reference_world::<f64>();
    world.robot.left_scale = 1.0;
    let r = run_trial(&world, Localizer::Oracle, REFERENCE_CORNER_START, REFERENCE_CORNER_GOAL, &corner_config(), 1)
        .unwrap();
    assert!(r.success);
    assert!(r.final_error < 0.5, "final error {}", r.final_error);
}

#[test]
fn trials_are_deterministic() {
    let world = reference_world::<f64>().with_noise_sigma(3.0);
    let loc = Localizer::Gaussian { sigma_ft: 1.0 };
    let cfg = corner_config();
    let a = run_trial(&world, loc, REFERENCE_CORNER_START, REFERENCE_CORNER_GOAL, &cfg, 42).unwrap();
    let b = run_trial(&world, loc, REFERENCE_CORNER_START, REFERENCE_CORNER_GOAL, &cfg, 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stop_and_wait_holds_over_many_trials() {
    let world = reference_world::<f64>();
    let ds = generate_synthetic_dataset(&world, &world.map.walkable_cells(), 3).unwrap();
    let mut pc = PipelineConfig::<f64>::default();
    pc.train.epochs = 60;
    let bundle = fit_pipeline(&ds, &pc).unwrap().bundle;
    for sigma in [2.0, 6.0] {
        let w = world.with_noise_sigma(sigma);
        let report = corner_success_rate(
            &w,
            Localizer::Model(&bundle),
            REFERENCE_CORNER_START,
            REFERENCE_CORNER_GOAL,
            &corner_config(),
            40,
            0,
        )
        .unwrap();
        for t in &report.trials {
            assert_eq!(check_stop_and_wait(&t.events), Ok(()), "seed {}", t.seed);
            let fixes = t.events.iter().filter(|e| !matches!(e, NavEvent::Command { .. })).count();
            assert_eq!(fixes, t.fixes.len());
        }
    }
}

#[test]
fn two_right_turns_reverse_heading() {
    let robot = SimRobot::new(Pose::new(5.0, 5.0, 0.3), 0.5, 0.95, 1.0).unwrap();
    let mut cal = calibrate_drivetrain(&robot, 0.5);
    // Exact per-wheel timing so the oracle is a clean half turn.
    cal.turn_90_duration = std::f64::consts::FRAC_PI_2 * robot.wheel_base / (cal.turn_speed * robot.left_scale);
    let right = turn_command(TurnDirection::Right, &cal);
    let once = step_robot(&robot, &right, right.duration);
    let twice = step_robot(&once, &right, right.duration);
    let turned = rssinav::geometry::wrap_angle(twice.pose.heading - robot.pose.heading);
    assert!((turned.abs() - std::f64::consts::PI).abs() < 1e-9, "turned {turned}");
}

#[test]
fn physics_rssi_decreases_with_distance() {
    let world = reference_world::<f64>();
    for ap in &world.aps {
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let d = 1.0 + 0.25 * k as f64;
            let p = Point::new(ap.position.x + d, ap.position.y);
            let v = expected_rssi(ap, p, world.reference_distance);
            if k > 0 {
                assert!(v < last);
            }
            last = v;
        }
    }
}

#[test]
fn noiseless_scan_matches_formula() {
    let world = reference_world::<f64>().with_noise_sigma(0.0);
    let ap = &world.aps[0];
    let at = Point::new(ap.position.x + 10.0, ap.position.y);
    let s = simulate_scan(&world, at, 0, 0).unwrap();
    // p0 - 10 n log10(10) = -40 - 30
    assert_eq!(s.rssi_of(&ap.mac), Some(-70));
}

#[test]
fn localization_error_grows_with_noise() {
    // Mean test error over three training seeds for worlds of increasing noise.
    let base = reference_world::<f64>();
    let mut means = Vec::new();
    for sigma in [0.0, 2.0, 4.0, 8.0] {
        let world = base.with_noise_sigma(sigma);
        let ds = generate_synthetic_dataset(&world, &world.map.walkable_cells(), 3).unwrap();
        let errs: Vec<f64> = (0..3)
            .map(|seed| {
                let mut pc = PipelineConfig::<f64>::default();
                pc.seed = seed;
                pc.train.seed = seed;
                pc.train.epochs = 300;
                fit_pipeline(&ds, &pc).unwrap().report.test.unwrap().mean_error_ft
            })
            .collect();
        means.push(mean(&errs));
    }
    for w in means.windows(2) {
        assert!(w[0] <= w[1], "{means:?}");
    }
}

fn straight_plan() -> (Navigator<f64>, NavState) {
    let map = GridMap::open(10, 1);
    let path = astar(&map, rssinav::planner::Cell::new(0, 0), rssinav::planner::Cell::new(9, 0)).unwrap();
    let plan = extract_checkpoints(&path, Heading::East).unwrap();
    let nav = Navigator::new(NavConfig::default(), DrivetrainCalibration::default(), &map).unwrap();
    (nav, NavState::new(plan).unwrap())
}

proptest! {
    #[test]
    fn abort_after_exactly_max_plus_one_misses(max in 0u32..30, leading_fixes in 0usize..4) {
        let (mut nav, mut state) = straight_plan();
        nav.config.max_consecutive_misses = max;
        for _ in 0..leading_fixes {
            state = nav.step(&state, Fix::Position(Point::new(0.5, 0.5))).unwrap().0;
        }
        for i in 1..=max + 1 {
            let (next, cmd) = nav.step(&state, Fix::NoFix).unwrap();
            prop_assert!(cmd.is_none());
            prop_assert_eq!(next.mode == NavMode::Aborted, i == max + 1);
            state = next;
        }
        prop_assert!(nav.step(&state, Fix::NoFix).is_err());
    }

    #[test]
    fn a_fix_resets_the_miss_counter(max in 1u32..20, misses in 0u32..20) {
        let (mut nav, mut state) = straight_plan();
        nav.config.max_consecutive_misses = max;
        for _ in 0..misses.min(max) {
            state = nav.step(&state, Fix::NoFix).unwrap().0;
        }
        let (next, cmd) = nav.step(&state, Fix::Position(Point::new(0.5, 0.5))).unwrap();
        prop_assert_eq!(next.miss_counter, 0);
        prop_assert!(cmd.is_some());
    }

    #[test]
    fn nav_step_is_pure(x in -5.0f64..15.0, y in -3.0f64..3.0) {
        let (nav, state) = straight_plan();
        let fix = Fix::Position(Point::new(x, y));
        prop_assert_eq!(nav.step(&state, fix).unwrap(), nav.step(&state, fix).unwrap());
    }

    #[test]
    fn oracle_navigation_reaches_done(seed in any::<u64>(), a in any::<usize>(), b in any::<usize>()) {
        // Exact fixes and an ideal robot on random open-ish maps: Done with one turn command per turn checkpoint.
        let mut r = rng(seed);
        let map = random_grid(&mut r, 9, 9, 0.15);
        let cells = map.walkable_cells();
        prop_assume!(cells.len() >= 2);
        let (start, goal) = (cells[a % cells.len()], cells[b % cells.len()]);
        let Ok(path) = astar(&map, start, goal) else { return Ok(()) };
        let heading = first_heading(&path).unwrap_or(Heading::East);
        let plan = extract_checkpoints(&path, heading).unwrap();
        let turns = plan.iter().filter(|c| c.action != CheckpointAction::Stop).count();
        let robot = SimRobot::new(Pose::new(start.x as f64 + 0.5, start.y as f64 + 0.5, heading.angle()), 0.5, 1.0, 1.0).unwrap();
        let cal = calibrate_drivetrain(&robot, 0.5);
        let nav = Navigator::new(NavConfig { step_distance: 1.0, ..NavConfig::default() }, cal, &map).unwrap();
        let mut state = NavState::new(plan).unwrap();
        let mut bot = robot;
        let mut turn_cmds = 0;
        for _ in 0..500 {
            let (next, cmd) = nav.step(&state, Fix::Position(bot.pose.position())).unwrap();
            state = next;
            if let Some(c) = cmd {
                if matches!(c.kind, CommandKind::TurnLeft | CommandKind::TurnRight) {
                    turn_cmds += 1;
                }
                bot = step_robot(&bot, &c, c.duration);
            }
            if state.is_finished() {
                break;
            }
        }
        prop_assert_eq!(state.mode, NavMode::Done);
        prop_assert_eq!(turn_cmds, turns);
    }

    #[test]
    fn pivots_preserve_position_and_straight_preserves_heading(speed in 0.1f64..2.0, t in 0.01f64..5.0, h in -3.0f64..3.0) {
        let robot = SimRobot::new(Pose::new(3.0, 4.0, h), 0.5, 1.0, 1.0).unwrap();
        let spin = DriveCommand { left_speed: -speed, right_speed: speed, duration: t, kind: CommandKind::TurnLeft };
        let after = step_robot(&robot, &spin, t);
        prop_assert!((after.pose.x - 3.0).abs() < 1e-6 && (after.pose.y - 4.0).abs() < 1e-6);
        let cal = DrivetrainCalibration::default();
        let fwd = forward_command(&NavConfig { forward_speed: speed, ..NavConfig::default() }, &cal);
        let moved = step_robot(&robot, &fwd, t);
        prop_assert_eq!(moved.pose.heading, robot.pose.heading);
    }
}
