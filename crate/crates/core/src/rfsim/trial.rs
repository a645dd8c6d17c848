use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};

use crate::geometry::{Point, Pose};
use crate::model::{ModelBundle, PredictError};
use crate::navctl::{DrivetrainCalibration, Fix, NavConfig, NavEvent, NavMode, NavState, Navigator};
use crate::planner::{astar, extract_checkpoints, first_heading, Cell, Checkpoint, Heading};
use crate::scalar::Scalar;
use crate::scan::{filter_by_ssid, parse_scan_text, render_scan_text, ScanSnapshot};

use super::kinematics::{calibrate_drivetrain, step_robot_traced};
use super::radio::{noise_rng, simulate_scan, NoiseDomain};
use super::world::SimWorld;
use super::SimError;

pub const DEFAULT_MAX_FIXES: usize = 500;
/// Seconds between the start of a scan and its position estimate.
pub const DEFAULT_SCAN_LATENCY_S: f64 = 2.0;
pub const DEFAULT_SUCCESS_RADIUS_FT: f64 = 2.0;
pub const DEFAULT_TURN_SPEED: f64 = 0.5;

/// How the robot turns a scan into a position fix during a trial.
#[derive(Debug, Clone, Copy)]
pub enum Localizer<'a, T> {
    /// Exact true position.
    Oracle,
    /// True position plus isotropic Gaussian error with this per-axis sigma (feet).
    Gaussian { sigma_ft: T },
    /// Trained fingerprint model applied to the simulated scan.
    Model(&'a ModelBundle<T>),
}

impl<T: Scalar> Localizer<'_, T> {
    fn locate(&self, scan: &ScanSnapshot<T>, truth: Point<T>, seed: u64, draw: u64) -> Result<Fix<T>, SimError> {
        match self {
            Localizer::Oracle => Ok(Fix::Position(truth)),
            Localizer::Gaussian { sigma_ft } => {
                let mut rng = noise_rng(seed, NoiseDomain::Localizer, draw);
                let dx: f64 = StandardNormal.sample(&mut rng);
                let dy: f64 = StandardNormal.sample(&mut rng);
                Ok(Fix::Position(Point::new(
                    truth.x + *sigma_ft * T::lit(dx),
                    truth.y + *sigma_ft * T::lit(dy),
                )))
            }
            Localizer::Model(bundle) => match bundle.predict(scan) {
                Ok(p) if p.x.is_finite() && p.y.is_finite() => Ok(Fix::Position(p)),
                Ok(_) | Err(PredictError::NoKnownAccessPoints) => Ok(Fix::NoFix),
                Err(e) => Err(SimError::Predict(e)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig<T> {
    pub nav: NavConfig<T>,
    /// `None` calibrates from the world's robot.
    pub calibration: Option<DrivetrainCalibration<T>>,
    pub success_radius: T,
    pub max_fixes: usize,
    pub scan_latency: T,
    pub turn_speed: T,
    /// Only scan entries with these SSIDs are used; `None` keeps all.
    pub ssid_allowlist: Option<BTreeSet<String>>,
    /// Plan on the map inflated by this many cells so routes keep off the walls.
    pub clearance_cells: u32,
}

impl<T: Scalar> Default for TrialConfig<T> {
    fn default() -> Self {
        Self {
            nav: NavConfig::default(),
            calibration: None,
            success_radius: T::lit(DEFAULT_SUCCESS_RADIUS_FT),
            max_fixes: DEFAULT_MAX_FIXES,
            scan_latency: T::lit(DEFAULT_SCAN_LATENCY_S),
            turn_speed: T::lit(DEFAULT_TURN_SPEED),
            ssid_allowlist: None,
            clearance_cells: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    /// The navigator reached its Stop checkpoint.
    Done,
    Aborted,
    /// The robot left the walkable area.
    Collided,
    BudgetExhausted,
}

impl TrialOutcome {
    pub fn label(self) -> &'static str {
        match self {
            TrialOutcome::Done => "done",
            TrialOutcome::Aborted => "aborted",
            TrialOutcome::Collided => "collided",
            TrialOutcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixRecord<T> {
    pub truth: Point<T>,
    pub estimate: Option<Point<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult<T> {
    pub seed: u64,
    pub success: bool,
    pub outcome: TrialOutcome,
    /// Distance from the final true position to the goal cell center, feet.
    pub final_error: T,
    pub trajectory: Vec<Pose<T>>,
    pub fixes: Vec<FixRecord<T>>,
    pub events: Vec<NavEvent<T>>,
    pub plan: Vec<Checkpoint>,
}

impl<T: Scalar> TrialResult<T> {
    /// Mean distance between estimates and true positions over fixes that produced an estimate.
    pub fn mean_fix_error(&self) -> Option<T> {
        let errs: Vec<T> = self
            .fixes
            .iter()
            .filter_map(|f| f.estimate.map(|e| e.distance(&f.truth)))
            .collect();
        (!errs.is_empty()).then(|| errs.iter().copied().sum::<T>() / T::from_usize_lossy(errs.len()))
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("x,y,heading\n");
        for p in &self.trajectory {
            let _ = writeln!(out, "{},{},{}", p.x, p.y, p.heading);
        }
        out
    }

    /// Predicted-vs-actual rows: `x_true,y_true,x_pred,y_pred` (empty prediction on NoFix).
    pub fn fixes_csv(&self) -> String {
        let mut out = String::from("x_true,y_true,x_pred,y_pred\n");
        for f in &self.fixes {
            match f.estimate {
                Some(e) => {
                    let _ = writeln!(out, "{},{},{},{}", f.truth.x, f.truth.y, e.x, e.y);
                }
                None => {
                    let _ = writeln!(out, "{},{},,", f.truth.x, f.truth.y);
                }
            }
        }
        out
    }
}

/// One closed-loop navigation run from `start` to `goal`.
///
/// The robot starts at the start cell center facing along the first path
/// segment. Each iteration simulates a scan at the true pose, renders and
/// re-parses it as scan text, localizes, steps the navigator and executes
/// the resulting command. The run ends on Done, Aborted, leaving the
/// walkable area, or after `max_fixes` fixes. Scan and localizer noise come
/// from counter-based streams keyed by `seed`.
pub fn run_trial<T: Scalar>(
    world: &SimWorld<T>,
    localizer: Localizer<'_, T>,
    start: Cell,
    goal: Cell,
    config: &TrialConfig<T>,
    seed: u64,
) -> Result<TrialResult<T>, SimError> {
    let path = astar(&world.map.inflated(config.clearance_cells), start, goal)?;
    let heading = first_heading(&path).unwrap_or(Heading::East);
    let plan = extract_checkpoints(&path, heading)?;
    let calibration = config
        .calibration
        .unwrap_or_else(|| calibrate_drivetrain(&world.robot, config.turn_speed));
    let navigator = Navigator::new(config.nav, calibration, &world.map)?;
    let mut state = NavState::new(plan.clone())?;

    let start_center = world.map.cell_center::<T>(start);
    let goal_center = world.map.cell_center::<T>(goal);
    let mut robot = world.robot;
    robot.pose = Pose::new(start_center.x, start_center.y, T::lit(heading.angle()));

    let mut trajectory = vec![robot.pose];
    let mut fixes = Vec::new();
    let mut events = Vec::new();
    let mut clock = T::zero();
    let mut outcome = TrialOutcome::BudgetExhausted;

    'run: for draw in 0..config.max_fixes as u64 {
        let truth = robot.pose.position();
        let scan = simulate_scan(world, truth, seed, draw)?;
        let mut entries = parse_scan_text(&render_scan_text("wlan0", &scan.entries)).map_err(SimError::Scan)?;
        if let Some(allow) = &config.ssid_allowlist {
            entries = filter_by_ssid(&entries, allow);
        }
        let observed = ScanSnapshot::new(entries, None);
        clock += config.scan_latency;
        let fix = localizer.locate(&observed, truth, seed, draw)?;
        match fix {
            Fix::Position(p) => {
                events.push(NavEvent::Fix { timestamp: clock, position: p });
                fixes.push(FixRecord { truth, estimate: Some(p) });
            }
            Fix::NoFix => {
                events.push(NavEvent::NoFix { timestamp: clock });
                fixes.push(FixRecord { truth, estimate: None });
            }
        }
        let (next, command) = navigator.step(&state, fix)?;
        state = next;
        if let Some(cmd) = command {
            events.push(NavEvent::Command { timestamp: clock, command: cmd });
            let (moved, trace) = step_robot_traced(&robot, &cmd, cmd.duration);
            clock += cmd.duration;
            for pose in trace {
                trajectory.push(pose);
                if !world.map.is_walkable_point(pose.position()) {
                    robot = moved;
                    outcome = TrialOutcome::Collided;
                    break 'run;
                }
            }
            robot = moved;
        }
        match state.mode {
            NavMode::Done => {
                outcome = TrialOutcome::Done;
                break;
            }
            NavMode::Aborted => {
                outcome = TrialOutcome::Aborted;
                break;
            }
            _ => {}
        }
    }

    let final_error = robot.pose.position().distance(&goal_center);
    let success = outcome == TrialOutcome::Done && final_error <= config.success_radius;
    Ok(TrialResult {
        seed,
        success,
        outcome,
        final_error,
        trajectory,
        fixes,
        events,
        plan,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerReport<T> {
    pub rate: f64,
    pub trials: Vec<TrialResult<T>>,
}

impl<T: Scalar> CornerReport<T> {
    /// Mean fix error over every fix of every trial.
    pub fn mean_fix_error(&self) -> Option<T> {
        let errs: Vec<T> = self
            .trials
            .iter()
            .flat_map(|t| t.fixes.iter().filter_map(|f| f.estimate.map(|e| e.distance(&f.truth))))
            .collect();
        (!errs.is_empty()).then(|| errs.iter().copied().sum::<T>() / T::from_usize_lossy(errs.len()))
    }

    /// `seed,success,outcome,final_error_ft,fixes,commands`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,success,outcome,final_error_ft,fixes,commands\n");
        for t in &self.trials {
            let commands = t.events.iter().filter(|e| matches!(e, NavEvent::Command { .. })).count();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                t.seed,
                u8::from(t.success),
                t.outcome.label(),
                t.final_error,
                t.fixes.len(),
                commands
            );
        }
        out
    }
}

/// Runs trials with seeds `base_seed .. base_seed + trials` and reports the success fraction.
pub fn corner_success_rate<T: Scalar>(
    world: &SimWorld<T>,
    localizer: Localizer<'_, T>,
    start: Cell,
    goal: Cell,
    config: &TrialConfig<T>,
    trials: usize,
    base_seed: u64,
) -> Result<CornerReport<T>, SimError> {
    if trials == 0 {
        return Err(SimError::InvalidParameter("trial count must be >= 1".into()));
    }
    let results = (0..trials as u64)
        .map(|i| run_trial(world, localizer, start, goal, config, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let ok = results.iter().filter(|t| t.success).count();
    Ok(CornerReport {
        rate: ok as f64 / trials as f64,
        trials: results,
    })
}
