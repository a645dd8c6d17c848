use crate::geometry::{wrap_angle, Pose};
use crate::navctl::{DriveCommand, DrivetrainCalibration};
use crate::scalar::Scalar;

use super::world::SimRobot;

/// Longest integration substep, seconds.
pub const MAX_SUBSTEP_S: f64 = 0.01;

/// Body velocities (ft/s, rad/s) for commanded wheel speeds.
pub fn body_velocity<T: Scalar>(robot: &SimRobot<T>, left: T, right: T) -> (T, T) {
    let vl = left * robot.left_scale;
    let vr = right * robot.right_scale;
    ((vl + vr) / T::lit(2.0), (vr - vl) / robot.wheel_base)
}

/// Applies `command`'s wheel speeds for `dt` seconds.
pub fn step_robot<T: Scalar>(robot: &SimRobot<T>, command: &DriveCommand<T>, dt: T) -> SimRobot<T> {
    step_robot_traced(robot, command, dt).0
}

/// Like [`step_robot`], also returning the pose after every substep.
///
/// Each substep moves along the exact arc for constant body velocities, so a
/// pure pivot never translates and a straight command never rotates.
pub fn step_robot_traced<T: Scalar>(robot: &SimRobot<T>, command: &DriveCommand<T>, dt: T) -> (SimRobot<T>, Vec<Pose<T>>) {
    let mut out = *robot;
    if !(dt > T::zero()) {
        return (out, Vec::new());
    }
    let steps = (dt.to_f64_lossy() / MAX_SUBSTEP_S).ceil().max(1.0) as usize;
    let h = dt / T::from_usize_lossy(steps);
    let (v, w) = body_velocity(robot, command.left_speed, command.right_speed);
    let mut trace = Vec::with_capacity(steps);
    let mut heading = out.pose.heading;
    for _ in 0..steps {
        let p = &mut out.pose;
        if w == T::zero() {
            p.x += v * heading.cos() * h;
            p.y += v * heading.sin() * h;
        } else {
            let next = heading + w * h;
            let r = v / w;
            p.x += r * (next.sin() - heading.sin());
            p.y -= r * (next.cos() - heading.cos());
            heading = next;
        }
        p.heading = wrap_angle(heading);
        trace.push(*p);
    }
    (out, trace)
}

/// Calibration that cancels this robot's veer and turns 90 degrees on average.
///
/// The right wheel is slowed/sped so both effective wheel speeds match the
/// left one; the turn time uses the mean wheel gain, so left and right turns
/// err by opposite amounts when the gains differ.
pub fn calibrate_drivetrain<T: Scalar>(robot: &SimRobot<T>, turn_speed: T) -> DrivetrainCalibration<T> {
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    let mean_gain = (robot.left_scale + robot.right_scale) / T::lit(2.0);
    DrivetrainCalibration {
        veer_bias: robot.left_scale / robot.right_scale - T::one(),
        turn_speed,
        turn_90_duration: half_pi * robot.wheel_base / (turn_speed * mean_gain),
        ground_speed_per_unit: robot.left_scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::navctl::CommandKind;

    fn robot(ls: f64, rs: f64) -> SimRobot<f64> {
        SimRobot::new(Pose::new(1.0, 2.0, 0.0), 0.5, ls, rs).unwrap()
    }

    fn cmd(l: f64, r: f64) -> DriveCommand<f64> {
        DriveCommand { left_speed: l, right_speed: r, duration: 0.0, kind: CommandKind::Forward }
    }

    #[test]
    fn straight_line() {
        let r = step_robot(&robot(1.0, 1.0), &cmd(0.8, 0.8), 2.5);
        assert!((r.pose.x - 3.0).abs() < 1e-12);
        assert_eq!(r.pose.y, 2.0);
        assert_eq!(r.pose.heading, 0.0);
    }

    #[test]
    fn pivot_in_place() {
        let r = step_robot(&robot(1.0, 1.0), &cmd(-0.5, 0.5), 1.0);
        assert!((r.pose.x - 1.0).abs() < 1e-6 && (r.pose.y - 2.0).abs() < 1e-6);
        assert!((r.pose.heading - 2.0).abs() < 1e-12);
    }

    #[test]
    fn weak_left_wheel_veers_left() {
        let r = robot(0.95, 1.0);
        let (_, w) = body_velocity(&r, 1.0, 1.0);
        assert!(w > 0.0);
        assert!(step_robot(&r, &cmd(1.0, 1.0), 1.0).pose.heading > 0.0);
    }

    #[test]
    fn heading_stays_wrapped() {
        let r = step_robot(&robot(1.0, 1.0), &cmd(-1.0, 1.0), 10.0);
        assert!(r.pose.heading > -std::f64::consts::PI && r.pose.heading <= std::f64::consts::PI);
    }
}
