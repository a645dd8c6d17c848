use std::fmt::Write as _;

use crate::geometry::{Point, Pose};
use crate::planner::{Cell, GridMap};
use crate::scalar::Scalar;
use crate::scan::canonical_mac;

use super::SimError;

/// Simulated access point with log-distance path loss.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPointSim<T> {
    pub mac: String,
    pub ssid: String,
    /// Feet.
    pub position: Point<T>,
    /// dBm at the reference distance.
    pub p0: T,
    pub path_loss_exponent: T,
    /// Shadowing standard deviation in dB.
    pub noise_sigma: T,
}

/// Differential-drive robot. `left_scale < right_scale` makes it drift left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRobot<T> {
    pub pose: Pose<T>,
    /// Distance between the wheels, feet.
    pub wheel_base: T,
    pub left_scale: T,
    pub right_scale: T,
}

impl<T: Scalar> SimRobot<T> {
    pub fn new(pose: Pose<T>, wheel_base: T, left_scale: T, right_scale: T) -> Result<Self, SimError> {
        if !(wheel_base > T::zero()) || !(left_scale > T::zero()) || !(right_scale > T::zero()) {
            return Err(SimError::InvalidParameter("wheel base and wheel gains must be positive".into()));
        }
        Ok(Self {
            pose,
            wheel_base,
            left_scale,
            right_scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimWorld<T> {
    pub map: GridMap,
    pub aps: Vec<AccessPointSim<T>>,
    pub robot: SimRobot<T>,
    pub rng_seed: u64,
    /// Feet; path loss is flat below this distance.
    pub reference_distance: T,
}

impl<T: Scalar> SimWorld<T> {
    pub fn new(
        map: GridMap,
        aps: Vec<AccessPointSim<T>>,
        robot: SimRobot<T>,
        rng_seed: u64,
        reference_distance: T,
    ) -> Result<Self, SimError> {
        let w = T::lit(map.width() as f64 * map.cell_size());
        let h = T::lit(map.height() as f64 * map.cell_size());
        for ap in &aps {
            if canonical_mac(&ap.mac).as_deref() != Some(ap.mac.as_str()) {
                return Err(SimError::InvalidParameter(format!("bad MAC {}", ap.mac)));
            }
            let p = ap.position;
            if !(p.x >= T::zero() && p.x <= w && p.y >= T::zero() && p.y <= h) {
                return Err(SimError::InvalidParameter(format!("AP {} outside the map", ap.mac)));
            }
            if !(ap.noise_sigma >= T::zero()) || !(ap.path_loss_exponent > T::zero()) {
                return Err(SimError::InvalidParameter(format!("AP {}: sigma >= 0 and n > 0 required", ap.mac)));
            }
        }
        if !(reference_distance > T::zero()) {
            return Err(SimError::InvalidParameter("reference distance must be positive".into()));
        }
        Ok(Self {
            map,
            aps,
            robot,
            rng_seed,
            reference_distance,
        })
    }

    /// Copy with every AP's shadowing sigma multiplied by `factor`.
    pub fn with_noise_scale(&self, factor: T) -> Self {
        let mut w = self.clone();
        for ap in &mut w.aps {
            ap.noise_sigma *= factor;
        }
        w
    }

    /// Copy with every AP's shadowing sigma set to `sigma`.
    pub fn with_noise_sigma(&self, sigma: T) -> Self {
        let mut w = self.clone();
        for ap in &mut w.aps {
            ap.noise_sigma = sigma;
        }
        w
    }

    /// World description text: the grid map, then `ap`, `robot`, `seed` and
    /// `reference_distance` lines.
    ///
    /// ```text
    /// ap <mac> "<ssid>" <x_ft> <y_ft> <p0_dbm> <n> <sigma_db>
    /// robot <wheel_base_ft> <left_scale> <right_scale>
    /// seed <u64>
    /// reference_distance <ft>
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = self.map.to_text();
        for ap in &self.aps {
            let _ = writeln!(
                out,
                "ap {} \"{}\" {} {} {} {} {}",
                ap.mac, ap.ssid, ap.position.x, ap.position.y, ap.p0, ap.path_loss_exponent, ap.noise_sigma
            );
        }
        let r = &self.robot;
        let _ = writeln!(out, "robot {} {} {}", r.wheel_base, r.left_scale, r.right_scale);
        let _ = writeln!(out, "seed {}", self.rng_seed);
        let _ = writeln!(out, "reference_distance {}", self.reference_distance);
        out
    }

    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().enumerate();
        let (map, _) = GridMap::parse_lines(&mut lines)?;
        let mut aps = Vec::new();
        let mut robot = None;
        let mut seed = 0u64;
        let mut reference_distance = T::one();
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let bad = |reason: String| SimError::WorldFormat { line: i + 1, reason };
            let tokens = tokenize(line).map_err(|r| bad(r.into()))?;
            let num = |s: &str| -> Result<T, SimError> {
                s.parse::<T>().map_err(|_| bad(format!("not a number: {s:?}")))
            };
            match tokens[0].as_str() {
                "ap" => {
                    if tokens.len() != 8 {
                        return Err(bad("ap line needs: mac ssid x y p0 n sigma".into()));
                    }
                    let mac = canonical_mac(&tokens[1]).ok_or_else(|| bad(format!("bad MAC {}", tokens[1])))?;
                    aps.push(AccessPointSim {
                        mac,
                        ssid: tokens[2].clone(),
                        position: Point::new(num(&tokens[3])?, num(&tokens[4])?),
                        p0: num(&tokens[5])?,
                        path_loss_exponent: num(&tokens[6])?,
                        noise_sigma: num(&tokens[7])?,
                    });
                }
                "robot" => {
                    if tokens.len() != 4 {
                        return Err(bad("robot line needs: wheel_base left_scale right_scale".into()));
                    }
                    robot = Some(SimRobot::new(
                        Pose::default(),
                        num(&tokens[1])?,
                        num(&tokens[2])?,
                        num(&tokens[3])?,
                    )?);
                }
                "seed" if tokens.len() == 2 => {
                    seed = tokens[1].parse().map_err(|_| bad("bad seed".into()))?;
                }
                "reference_distance" if tokens.len() == 2 => reference_distance = num(&tokens[1])?,
                other => return Err(bad(format!("unknown directive {other:?}"))),
            }
        }
        let robot = robot.ok_or(SimError::WorldFormat {
            line: 0,
            reason: "missing robot line".into(),
        })?;
        Self::new(map, aps, robot, seed, reference_distance)
    }
}

/// Whitespace-separated tokens; a token may be a double-quoted string with spaces.
fn tokenize(line: &str) -> Result<Vec<String>, &'static str> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => s.push(ch),
                    None => return Err("unterminated quote"),
                }
            }
            out.push(s);
        } else {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err("empty line");
    }
    Ok(out)
}

pub const REFERENCE_P0_DBM: f64 = -40.0;
pub const REFERENCE_PATH_LOSS_EXPONENT: f64 = 3.0;
pub const REFERENCE_NOISE_SIGMA_DB: f64 = 2.0;

/// Corner route through the reference world: along the centerline of the
/// horizontal arm, one right turn, then up the vertical arm's centerline.
pub const REFERENCE_CORNER_START: Cell = Cell::new(10, 2);
pub const REFERENCE_CORNER_GOAL: Cell = Cell::new(2, 8);
/// Planning clearance that keeps the corner route on the corridor centerlines.
pub const REFERENCE_CORNER_CLEARANCE: u32 = 2;

/// L-shaped corridor of 95 one-foot cells with six access points.
///
/// The horizontal arm spans x in [0, 13), y in [0, 5); the vertical arm
/// x in [0, 5), y in [5, 11). The robot's left wheel runs 5% slow.
pub fn reference_world<T: Scalar>() -> SimWorld<T> {
    let (w, h) = (13usize, 11usize);
    let mut walkable = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            walkable[y * w + x] = y < 5 || x < 5;
        }
    }
    let map = GridMap::new(w, h, 1.0, walkable).expect("static map");
    let sites = [
        ("02:1A:11:00:00:01", "CSU Net", 0.5, 0.5),
        ("02:1A:11:00:00:02", "CSU Net", 6.5, 4.5),
        ("02:1A:11:00:00:03", "CSU Visitor", 12.5, 0.5),
        ("02:1A:11:00:00:04", "CSU Net", 4.5, 7.0),
        ("02:1A:11:00:00:05", "CSU Visitor", 0.5, 10.5),
        ("02:1A:11:00:00:06", "CSU Net", 9.5, 2.0),
    ];
    let aps = sites
        .iter()
        .map(|&(mac, ssid, x, y)| AccessPointSim {
            mac: mac.to_string(),
            ssid: ssid.to_string(),
            position: Point::new(T::lit(x), T::lit(y)),
            p0: T::lit(REFERENCE_P0_DBM),
            path_loss_exponent: T::lit(REFERENCE_PATH_LOSS_EXPONENT),
            noise_sigma: T::lit(REFERENCE_NOISE_SIGMA_DB),
        })
        .collect();
    let robot = SimRobot::new(Pose::default(), T::lit(0.5), T::lit(0.95), T::one()).expect("static robot");
    SimWorld::new(map, aps, robot, 2024, T::one()).expect("static world")
}
