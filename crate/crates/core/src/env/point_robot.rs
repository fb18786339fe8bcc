//! Unicycle robot tracking a straight path while an obstacle crosses it.
//!
//! The reference path is the x-axis, travelled in +x at a desired speed of
//! 0.28 m/s. Control runs at 50 Hz. Actions are longitudinal and angular
//! accelerations. One circular obstacle crosses the path perpendicularly at
//! constant speed; its side, crossing point and speed are drawn at reset.

use std::f64::consts::PI;

use rand::Rng;
use serde_json::json;

use super::{EnvSpec, Environment, StepInfo, StepOutcome};
use crate::rng;

pub const DT: f64 = 0.02;
pub const DESIRED_SPEED: f64 = 0.28;
pub const MAX_ACCEL: f64 = 0.5;
pub const MAX_ANG_ACCEL: f64 = 2.0;
pub const MAX_SPEED: f64 = 0.6;
pub const MAX_YAW_RATE: f64 = 1.5;
pub const ROBOT_RADIUS: f64 = 0.15;
pub const OBSTACLE_RADIUS: f64 = 0.15;
pub const EPISODE_STEPS: usize = 400;

pub const C_POS: f64 = 1.0;
pub const C_VEL: f64 = 1.0;
pub const C_ACT: f64 = 0.05;
pub const C_COL: f64 = 100.0;

/// Obstacle spawn ranges.
pub const OBSTACLE_START_OFFSET: f64 = 1.5;
pub const OBSTACLE_SPEED: (f64, f64) = (0.2, 0.4);
pub const OBSTACLE_CROSSING_X: (f64, f64) = (0.8, 1.6);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRobot {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
    pub obstacle: Obstacle,
    pub steps: usize,
    pub max_steps: usize,
}

impl Default for PointRobot {
    fn default() -> Self {
        PointRobot::new(EPISODE_STEPS)
    }
}

/// True when two discs of the fixture radii overlap.
pub fn collides(ax: f64, ay: f64, bx: f64, by: f64) -> bool {
    (ax - bx).hypot(ay - by) < ROBOT_RADIUS + OBSTACLE_RADIUS
}

impl PointRobot {
    pub fn new(max_steps: usize) -> Self {
        PointRobot {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
            speed: 0.0,
            yaw_rate: 0.0,
            obstacle: Obstacle::default(),
            steps: 0,
            max_steps,
        }
    }

    pub fn lateral_error(&self) -> f64 {
        self.y
    }

    pub fn in_collision(&self) -> bool {
        collides(self.x, self.y, self.obstacle.x, self.obstacle.y)
    }

    /// Obstacle position and velocity in the robot frame.
    fn relative_obstacle(&self) -> (f64, f64, f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let dx = self.obstacle.x - self.x;
        let dy = self.obstacle.y - self.y;
        let rvx = self.obstacle.vx - self.speed * c;
        let rvy = self.obstacle.vy - self.speed * s;
        (c * dx + s * dy, -s * dx + c * dy, c * rvx + s * rvy, -s * rvx + c * rvy)
    }
}

impl Environment for PointRobot {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            name: "point-robot-track".into(),
            obs_dim: 9,
            act_dim: 2,
            max_episode_steps: self.max_steps,
            action_scale: vec![MAX_ACCEL, MAX_ANG_ACCEL],
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, "point-robot-reset");
        self.x = 0.0;
        self.y = r.gen_range(-0.1..=0.1);
        self.heading = r.gen_range(-0.1..=0.1);
        self.speed = 0.0;
        self.yaw_rate = 0.0;
        let side = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let speed = r.gen_range(OBSTACLE_SPEED.0..=OBSTACLE_SPEED.1);
        let cross_x = r.gen_range(OBSTACLE_CROSSING_X.0..=OBSTACLE_CROSSING_X.1);
        self.obstacle = Obstacle {
            x: cross_x,
            y: side * OBSTACLE_START_OFFSET,
            vx: 0.0,
            vy: -side * speed,
        };
        self.steps = 0;
        self.observe()
    }

    /// `[lateral error, heading error, speed, yaw rate, obstacle x/y in the
    /// robot frame, bearing to the obstacle, obstacle relative velocity x/y]`.
    fn observe(&self) -> Vec<f64> {
        let (ox, oy, ovx, ovy) = self.relative_obstacle();
        vec![
            self.y,
            self.heading,
            self.speed,
            self.yaw_rate,
            ox,
            oy,
            oy.atan2(ox) / PI,
            ovx,
            ovy,
        ]
    }

    fn step(&mut self, action: &[f64]) -> StepOutcome {
        let a1 = action[0].clamp(-1.0, 1.0);
        let a2 = action[1].clamp(-1.0, 1.0);
        let (s, c) = self.heading.sin_cos();
        self.x += DT * self.speed * c;
        self.y += DT * self.speed * s;
        self.heading += DT * self.yaw_rate;
        self.speed = (self.speed + DT * MAX_ACCEL * a1).clamp(0.0, MAX_SPEED);
        self.yaw_rate = (self.yaw_rate + DT * MAX_ANG_ACCEL * a2).clamp(-MAX_YAW_RATE, MAX_YAW_RATE);
        self.obstacle.x += DT * self.obstacle.vx;
        self.obstacle.y += DT * self.obstacle.vy;
        self.steps += 1;

        let collision = self.in_collision();
        let v_err = self.speed - DESIRED_SPEED;
        let reward = -(C_POS * self.y * self.y + C_VEL * v_err * v_err + C_ACT * (a1 * a1 + a2 * a2))
            - if collision { C_COL } else { 0.0 };
        let truncated = self.steps >= self.max_steps;
        StepOutcome {
            obs: self.observe(),
            reward,
            done: truncated,
            truncated,
            info: StepInfo {
                collision,
                tracking_error: self.y.abs(),
            },
        }
    }

    fn fixture(&self) -> serde_json::Value {
        json!({
            "dt": DT,
            "desired_speed": DESIRED_SPEED,
            "max_accel": MAX_ACCEL,
            "max_ang_accel": MAX_ANG_ACCEL,
            "max_speed": MAX_SPEED,
            "max_yaw_rate": MAX_YAW_RATE,
            "robot_radius": ROBOT_RADIUS,
            "obstacle_radius": OBSTACLE_RADIUS,
            "episode_steps": self.max_steps,
            "reward_coefficients": {"c_p": C_POS, "c_v": C_VEL, "c_a": C_ACT, "c_col": C_COL},
            "obstacle_start_offset": OBSTACLE_START_OFFSET,
            "obstacle_speed_range": [OBSTACLE_SPEED.0, OBSTACLE_SPEED.1],
            "obstacle_crossing_x_range": [OBSTACLE_CROSSING_X.0, OBSTACLE_CROSSING_X.1],
            "integrator": "explicit Euler",
        })
    }
}

/// Hand-written reference controller: pure pursuit on the path, speed
/// tracking, and yielding to the obstacle when the robot would reach the
/// crossing while the obstacle is still inside the corridor.
pub fn reference_controller(env: &PointRobot) -> [f64; 2] {
    const LOOKAHEAD: f64 = 0.4;
    const MARGIN: f64 = 0.12;
    let clearance = ROBOT_RADIUS + OBSTACLE_RADIUS + MARGIN;

    let desired_heading = (-env.y).atan2(LOOKAHEAD);
    let yaw_cmd = 3.0 * (desired_heading - env.heading);
    let a2 = (4.0 * (yaw_cmd - env.yaw_rate) / MAX_ANG_ACCEL).clamp(-1.0, 1.0);

    let ob = env.obstacle;
    let moving_away = ob.y * ob.vy > 0.0;
    let cleared = moving_away && ob.y.abs() > clearance;
    let ahead = ob.x + clearance > env.x;
    let mut v_des = DESIRED_SPEED;
    if !cleared && ahead {
        let v_ob = ob.vy.abs().max(1e-6);
        // Time until the obstacle has left the corridor on the far side.
        let exit_time = if moving_away {
            (clearance - ob.y.abs()).max(0.0) / v_ob
        } else {
            (ob.y.abs() + clearance) / v_ob
        };
        let gap = ob.x - clearance - env.x;
        let arrival = gap.max(0.0) / env.speed.max(0.05);
        if arrival < exit_time + 0.5 {
            v_des = (0.8 * gap).clamp(0.0, DESIRED_SPEED);
        }
    }
    let a1 = (4.0 * (v_des - env.speed) / MAX_ACCEL).clamp(-1.0, 1.0);
    [a1, a2]
}
