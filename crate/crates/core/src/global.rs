//! Global perception. In simulation the vision network is replaced by a
//! lane-following oracle that sees the floor markings but not the obstacles.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Segment, Vec2};
use crate::sim::DronePose;

/// Steering in [−1, 1] (positive = left) and collision probability in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalPercept {
    pub theta_cnn: f64,
    pub p_col: f64,
}

impl GlobalPercept {
    /// Clamps both outputs into their ranges. NaN maps to 0.
    pub fn new(theta_cnn: f64, p_col: f64) -> Self {
        let clean = |v: f64| if v.is_nan() { 0.0 } else { v };
        Self { theta_cnn: clean(theta_cnn).clamp(-1.0, 1.0), p_col: clean(p_col).clamp(0.0, 1.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteeringClass {
    Left,
    Straight,
    Right,
}

impl SteeringClass {
    pub const ALL: [SteeringClass; 3] =
        [SteeringClass::Left, SteeringClass::Straight, SteeringClass::Right];

    pub fn mirrored(self) -> Self {
        match self {
            SteeringClass::Left => SteeringClass::Right,
            SteeringClass::Straight => SteeringClass::Straight,
            SteeringClass::Right => SteeringClass::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SteeringClass::Left => "left",
            SteeringClass::Straight => "straight",
            SteeringClass::Right => "right",
        }
    }
}

impl fmt::Display for SteeringClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Polyline tracing the floor markings from START to END.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct LanePath {
    waypoints: Vec<Vec2>,
    cumulative: Vec<f64>,
}

/// Where a point projects onto the lane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneProjection {
    /// Arc length of the closest lane point.
    pub arc: f64,
    pub distance: f64,
    /// The closest point is the final waypoint and the point lies beyond it.
    pub past_end: bool,
}

impl LanePath {
    pub fn new(waypoints: Vec<Vec2>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::InvalidLane("needs at least two waypoints".into()));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidLane(format!("waypoints {i} and {} coincide", i + 1)));
        }
        let segs: Vec<Segment> = waypoints.windows(2).map(|w| Segment::new(w[0], w[1])).collect();
        for i in 0..segs.len() {
            for j in i + 1..segs.len() {
                let adjacent = j == i + 1;
                let crosses = if adjacent {
                    // adjacent segments may only share their joint
                    let d = segs[i].b - segs[i].a;
                    let e = segs[j].b - segs[j].a;
                    d.cross(e) == 0.0 && d.dot(e) < 0.0
                } else {
                    segs[i].intersects(&segs[j])
                };
                if crosses {
                    return Err(Error::InvalidLane(format!("segments {i} and {j} intersect")));
                }
            }
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for s in &segs {
            acc += s.length();
            cumulative.push(acc);
        }
        Ok(Self { waypoints, cumulative })
    }

    pub fn waypoints(&self) -> &[Vec2] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment(&self, i: usize) -> Segment {
        Segment::new(self.waypoints[i], self.waypoints[i + 1])
    }

    /// Closest lane point to `p`; on equal distance the earlier segment wins.
    pub fn project(&self, p: Vec2) -> LaneProjection {
        let last = self.waypoints.len() - 2;
        let mut best = LaneProjection { arc: 0.0, distance: f64::INFINITY, past_end: false };
        for i in 0..=last {
            let seg = self.segment(i);
            let t_raw = seg.project_param(p);
            let t = t_raw.clamp(0.0, 1.0);
            let q = seg.a + (seg.b - seg.a) * t;
            let d = q.distance(p);
            if d < best.distance {
                best = LaneProjection {
                    arc: self.cumulative[i] + t * seg.length(),
                    distance: d,
                    past_end: i == last && t_raw > 1.0,
                };
            }
        }
        best
    }

    /// Lane point at arc length `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.waypoints[0];
        }
        for i in 0..self.waypoints.len() - 1 {
            if s <= self.cumulative[i + 1] {
                let seg = self.segment(i);
                let t = (s - self.cumulative[i]) / seg.length();
                return seg.a + (seg.b - seg.a) * t;
            }
        }
        *self.waypoints.last().unwrap()
    }

    pub fn mirror_y(&self) -> Self {
        Self::new(self.waypoints.iter().map(|p| p.mirror_y()).collect())
            .expect("reflection preserves validity")
    }
}

impl TryFrom<Vec<Vec2>> for LanePath {
    type Error = Error;
    fn try_from(w: Vec<Vec2>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<LanePath> for Vec<Vec2> {
    fn from(p: LanePath) -> Self {
        p.waypoints
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleParams {
    /// Arc length between the drone's lane projection and the aim point, m.
    pub lookahead_m: f64,
    /// Full horizontal camera field of view, degrees.
    pub camera_fov_deg: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { lookahead_m: 4.0, camera_fov_deg: 115.0 }
    }
}

/// Bearing from the drone heading to the lane lookahead point, normalized by
/// the camera half-FOV. Obstacles play no part and `p_col` is always 0.
pub fn oracle_percept(pose: &DronePose, path: &LanePath, params: &OracleParams) -> GlobalPercept {
    let here = pose.position();
    let proj = path.project(here);
    if proj.past_end {
        return GlobalPercept::new(0.0, 0.0);
    }
    let target = path.point_at(proj.arc + params.lookahead_m);
    let to = target - here;
    if to.norm() < 1e-9 {
        return GlobalPercept::new(0.0, 0.0);
    }
    let bearing = normalize_angle(to.y.atan2(to.x) - pose.heading).to_degrees();
    GlobalPercept::new(bearing / (params.camera_fov_deg / 2.0), 0.0)
}

/// Thresholds the steering output; `|theta| == eta` stays straight.
pub fn discretize_steering(g: &GlobalPercept, eta: f64) -> SteeringClass {
    if g.theta_cnn > eta {
        SteeringClass::Left
    } else if g.theta_cnn < -eta {
        SteeringClass::Right
    } else {
        SteeringClass::Straight
    }
}

/// Forward speed falling linearly from `v_target` at `p_col = 0` to zero at 1.
pub fn cnn_speed(g: &GlobalPercept, v_target: f64) -> f64 {
    (v_target * (1.0 - g.p_col)).clamp(0.0, v_target)
}

/// Yaw rate in deg/s, positive = counterclockwise.
pub fn cnn_yaw(g: &GlobalPercept, yaw_target: f64) -> f64 {
    g.theta_cnn * yaw_target
}

/// Neutral global signal used when the local pipeline runs alone.
pub fn forced_percept() -> GlobalPercept {
    GlobalPercept { theta_cnn: 0.0, p_col: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_lane() -> LanePath {
        LanePath::new(vec![Vec2::new(0.0, 0.0), Vec2::new(20.0, 0.0)]).unwrap()
    }

    #[test]
    fn on_lane_heading_at_lookahead_is_zero() {
        let g = oracle_percept(&DronePose::new(3.0, 0.0, 0.0), &straight_lane(), &OracleParams::default());
        assert_eq!(g.theta_cnn, 0.0);
        assert_eq!(g.p_col, 0.0);
    }

    #[test]
    fn thirty_degree_bearing() {
        // drone on the lane, yawed 30° right of it
        let lane = straight_lane();
        let params = OracleParams::default();
        let pose = DronePose::new(5.0, 0.0, -30f64.to_radians());
        let g = oracle_percept(&pose, &lane, &params);
        assert!((g.theta_cnn - 30.0 / 57.5).abs() < 1e-12, "{}", g.theta_cnn);
        assert!((g.theta_cnn - 0.5217).abs() < 1e-4);
    }

    #[test]
    fn past_end_is_neutral() {
        let g = oracle_percept(&DronePose::new(25.0, 1.0, 2.0), &straight_lane(), &OracleParams::default());
        assert_eq!((g.theta_cnn, g.p_col), (0.0, 0.0));
    }

    #[test]
    fn steering_saturates() {
        let g = oracle_percept(&DronePose::new(5.0, 0.0, 3.0), &straight_lane(), &OracleParams::default());
        assert_eq!(g.theta_cnn, -1.0);
    }

    #[test]
    fn discretization_boundaries() {
        let d = |t: f64| discretize_steering(&GlobalPercept::new(t, 0.0), 0.1);
        assert_eq!(d(0.0), SteeringClass::Straight);
        assert_eq!(d(0.1), SteeringClass::Straight);
        assert_eq!(d(-0.1), SteeringClass::Straight);
        assert_eq!(d(0.1000001), SteeringClass::Left);
        assert_eq!(d(-0.11), SteeringClass::Right);
    }

    #[test]
    fn speed_and_yaw_maps() {
        assert_eq!(cnn_speed(&GlobalPercept::new(0.0, 0.0), 1.5), 1.5);
        assert_eq!(cnn_speed(&GlobalPercept::new(0.0, 1.0), 1.5), 0.0);
        assert!((cnn_speed(&GlobalPercept::new(0.0, 0.5), 1.5) - 0.75).abs() < 1e-12);
        assert_eq!(cnn_yaw(&GlobalPercept::new(1.0, 0.0), 60.0), 60.0);
        assert_eq!(cnn_yaw(&GlobalPercept::new(0.0, 0.0), 60.0), 0.0);
        assert_eq!(cnn_yaw(&GlobalPercept::new(-0.5, 0.0), 60.0), -30.0);
    }

    #[test]
    fn forced_signal_is_neutral() {
        let f = forced_percept();
        assert_eq!((f.theta_cnn, f.p_col), (0.0, 0.0));
        assert_eq!(discretize_steering(&f, 0.1), SteeringClass::Straight);
        assert_eq!(cnn_speed(&f, 1.5), 1.5);
    }

    #[test]
    fn lane_validation() {
        assert!(LanePath::new(vec![Vec2::new(0.0, 0.0)]).is_err());
        assert!(LanePath::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)]).is_err());
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 2.0),
        ];
        assert!(LanePath::new(bowtie).is_err());
        let backtrack = vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0)];
        assert!(LanePath::new(backtrack).is_err());
    }

    #[test]
    fn lane_projection_and_interpolation() {
        let lane = LanePath::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, -5.0),
        ])
        .unwrap();
        assert_eq!(lane.length(), 15.0);
        assert_eq!(lane.point_at(12.0), Vec2::new(10.0, -2.0));
        assert_eq!(lane.point_at(99.0), Vec2::new(10.0, -5.0));
        let p = lane.project(Vec2::new(11.0, -3.0));
        assert!((p.arc - 13.0).abs() < 1e-12 && !p.past_end);
        assert!(lane.project(Vec2::new(10.0, -6.0)).past_end);
    }
}
