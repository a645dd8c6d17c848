//! Checkpoint navigation: position fixes in, one drive command (or none) out.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::Point;
use crate::planner::{Checkpoint, CheckpointAction, GridMap};
use crate::scalar::Scalar;

pub const DEFAULT_STEP_DISTANCE_FT: f64 = 2.0;
pub const DEFAULT_CHECKPOINT_RADIUS_FT: f64 = 1.5;
pub const DEFAULT_MAX_CONSECUTIVE_MISSES: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NavError {
    #[error("navigation already finished ({0:?})")]
    InvalidState(NavMode),
    #[error("invalid navigation configuration: {0}")]
    InvalidConfig(String),
    #[error("plan is empty")]
    EmptyPlan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavConfig<T> {
    /// Distance covered by one forward command, in feet.
    pub step_distance: T,
    /// A fix this close (feet) to the next checkpoint's cell center counts as arrival.
    pub checkpoint_radius: T,
    pub max_consecutive_misses: u32,
    /// Commanded wheel speed while driving straight.
    pub forward_speed: T,
}

impl<T: Scalar> Default for NavConfig<T> {
    fn default() -> Self {
        Self {
            step_distance: T::lit(DEFAULT_STEP_DISTANCE_FT),
            checkpoint_radius: T::lit(DEFAULT_CHECKPOINT_RADIUS_FT),
            max_consecutive_misses: DEFAULT_MAX_CONSECUTIVE_MISSES,
            forward_speed: T::one(),
        }
    }
}

impl<T: Scalar> NavConfig<T> {
    pub fn validate(&self) -> Result<(), NavError> {
        if !(self.step_distance > T::zero()) {
            return Err(NavError::InvalidConfig("step_distance must be positive".into()));
        }
        if !(self.checkpoint_radius > T::zero()) {
            return Err(NavError::InvalidConfig("checkpoint_radius must be positive".into()));
        }
        if !(self.forward_speed > T::zero()) {
            return Err(NavError::InvalidConfig("forward_speed must be positive".into()));
        }
        Ok(())
    }
}

/// Per-robot drivetrain corrections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivetrainCalibration<T> {
    /// Fractional adjustment of the right wheel speed when driving straight.
    /// A robot whose right wheel is effectively stronger veers left and needs a negative bias.
    pub veer_bias: T,
    pub turn_speed: T,
    /// Seconds of single-wheel drive that produce a 90 degree turn.
    pub turn_90_duration: T,
    /// Ground speed in ft/s produced by one wheel-speed unit on both wheels.
    pub ground_speed_per_unit: T,
}

impl<T: Scalar> Default for DrivetrainCalibration<T> {
    fn default() -> Self {
        Self {
            veer_bias: T::zero(),
            turn_speed: T::one(),
            turn_90_duration: T::lit(std::f64::consts::FRAC_PI_2),
            ground_speed_per_unit: T::one(),
        }
    }
}

impl<T: Scalar> DrivetrainCalibration<T> {
    pub fn validate(&self) -> Result<(), NavError> {
        if !(self.turn_speed > T::zero()) || !(self.turn_90_duration > T::zero()) {
            return Err(NavError::InvalidConfig("turn speed and duration must be positive".into()));
        }
        if !(self.ground_speed_per_unit > T::zero()) {
            return Err(NavError::InvalidConfig("ground_speed_per_unit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl CommandKind {
    pub fn label(self) -> &'static str {
        match self {
            CommandKind::Forward => "forward",
            CommandKind::TurnLeft => "turn_left",
            CommandKind::TurnRight => "turn_right",
            CommandKind::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCommand<T> {
    pub left_speed: T,
    pub right_speed: T,
    /// Seconds.
    pub duration: T,
    pub kind: CommandKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
}

/// Straight segment of `step_distance`, with the right wheel scaled by `1 + veer_bias`.
pub fn forward_command<T: Scalar>(config: &NavConfig<T>, cal: &DrivetrainCalibration<T>) -> DriveCommand<T> {
    let ground_speed = config.forward_speed * cal.ground_speed_per_unit;
    DriveCommand {
        left_speed: config.forward_speed,
        right_speed: config.forward_speed * (T::one() + cal.veer_bias),
        duration: config.step_distance / ground_speed,
        kind: CommandKind::Forward,
    }
}

/// Pivot on one wheel: a right turn drives only the left wheel, and vice versa.
pub fn turn_command<T: Scalar>(direction: TurnDirection, cal: &DrivetrainCalibration<T>) -> DriveCommand<T> {
    let (left_speed, right_speed, kind) = match direction {
        TurnDirection::Right => (cal.turn_speed, T::zero(), CommandKind::TurnRight),
        TurnDirection::Left => (T::zero(), cal.turn_speed, CommandKind::TurnLeft),
    };
    DriveCommand {
        left_speed,
        right_speed,
        duration: cal.turn_90_duration,
        kind,
    }
}

pub fn stop_command<T: Scalar>() -> DriveCommand<T> {
    DriveCommand {
        left_speed: T::zero(),
        right_speed: T::zero(),
        duration: T::zero(),
        kind: CommandKind::Stop,
    }
}

/// A localization result delivered to the navigator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fix<T> {
    Position(Point<T>),
    NoFix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NavMode {
    AwaitingFix,
    Advancing,
    Turning,
    Done,
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    pub mode: NavMode,
    pub plan: Vec<Checkpoint>,
    pub next_checkpoint_index: usize,
    pub miss_counter: u32,
}

impl NavState {
    pub fn new(plan: Vec<Checkpoint>) -> Result<Self, NavError> {
        if plan.is_empty() {
            return Err(NavError::EmptyPlan);
        }
        Ok(Self {
            mode: NavMode::AwaitingFix,
            plan,
            next_checkpoint_index: 0,
            miss_counter: 0,
        })
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.mode, NavMode::Done | NavMode::Aborted)
    }

    pub fn next_checkpoint(&self) -> Option<&Checkpoint> {
        self.plan.get(self.next_checkpoint_index)
    }
}

/// Pure transition function of the checkpoint navigator.
#[derive(Debug, Clone, PartialEq)]
pub struct Navigator<T> {
    pub config: NavConfig<T>,
    pub calibration: DrivetrainCalibration<T>,
    /// Feet per grid cell, used to place checkpoints at cell centers.
    pub cell_size: f64,
}

impl<T: Scalar> Navigator<T> {
    pub fn new(config: NavConfig<T>, calibration: DrivetrainCalibration<T>, map: &GridMap) -> Result<Self, NavError> {
        config.validate()?;
        calibration.validate()?;
        Ok(Self {
            config,
            calibration,
            cell_size: map.cell_size(),
        })
    }

    pub fn checkpoint_position(&self, cp: &Checkpoint) -> Point<T> {
        let s = self.cell_size;
        Point::new(
            T::lit((f64::from(cp.cell.x) + 0.5) * s),
            T::lit((f64::from(cp.cell.y) + 0.5) * s),
        )
    }

    /// One navigation step.
    ///
    /// - fix within `checkpoint_radius` of the next checkpoint: emit its
    ///   action (turn or stop), advance, reset the miss counter; the Stop
    ///   checkpoint ends in `Done`.
    /// - fix farther away: emit one forward step.
    /// - no fix: emit nothing and count a miss; more than
    ///   `max_consecutive_misses` misses in a row ends in `Aborted`.
    pub fn step(&self, state: &NavState, fix: Fix<T>) -> Result<(NavState, Option<DriveCommand<T>>), NavError> {
        if state.is_finished() {
            return Err(NavError::InvalidState(state.mode));
        }
        let mut next = state.clone();
        let Fix::Position(pos) = fix else {
            next.miss_counter += 1;
            next.mode = if next.miss_counter > self.config.max_consecutive_misses {
                NavMode::Aborted
            } else {
                NavMode::AwaitingFix
            };
            return Ok((next, None));
        };
        next.miss_counter = 0;
        let cp = *state.next_checkpoint().ok_or(NavError::InvalidState(state.mode))?;
        if pos.distance(&self.checkpoint_position(&cp)) <= self.config.checkpoint_radius {
            next.next_checkpoint_index += 1;
            let cmd = match cp.action {
                CheckpointAction::TurnLeft90 => {
                    next.mode = NavMode::Turning;
                    turn_command(TurnDirection::Left, &self.calibration)
                }
                CheckpointAction::TurnRight90 => {
                    next.mode = NavMode::Turning;
                    turn_command(TurnDirection::Right, &self.calibration)
                }
                CheckpointAction::Stop => {
                    next.mode = NavMode::Done;
                    stop_command()
                }
            };
            if next.next_checkpoint_index == next.plan.len() {
                next.mode = NavMode::Done;
            }
            return Ok((next, Some(cmd)));
        }
        next.mode = NavMode::Advancing;
        Ok((next, Some(forward_command(&self.config, &self.calibration))))
    }
}

/// One line of the navigation audit trail.
#[derive(Debug, Clone, PartialEq)]
pub enum NavEvent<T> {
    Fix { timestamp: T, position: Point<T> },
    NoFix { timestamp: T },
    Command { timestamp: T, command: DriveCommand<T> },
}

/// Checks the stop-and-wait rule: between any two commands there is a position fix.
/// Returns the index of the first offending command event.
pub fn check_stop_and_wait<T>(events: &[NavEvent<T>]) -> Result<(), usize> {
    let mut fix_since_command = true;
    for (i, e) in events.iter().enumerate() {
        match e {
            NavEvent::Fix { .. } => fix_since_command = true,
            NavEvent::NoFix { .. } => {}
            NavEvent::Command { .. } => {
                if !fix_since_command {
                    return Err(i);
                }
                fix_since_command = false;
            }
        }
    }
    Ok(())
}

/// `timestamp,left_speed,right_speed,duration,reason` for every command event.
pub fn command_log_csv<T: Scalar>(events: &[NavEvent<T>]) -> String {
    let mut out = String::from("timestamp,left_speed,right_speed,duration,reason\n");
    for e in events {
        if let NavEvent::Command { timestamp, command } = e {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                timestamp,
                command.left_speed,
                command.right_speed,
                command.duration,
                command.kind.label()
            );
        }
    }
    out
}
