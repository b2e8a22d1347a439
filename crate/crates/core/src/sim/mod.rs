//! Deterministic planar world: corridor walls, box obstacles, a ray-cast
//! multizone ToF model, unicycle kinematics and trial status checks.

mod scenario;

pub use scenario::{build_scenario, ScenarioId, ScenarioParams};

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::depth::{DepthFrame, GRID, RANGE_MAX_MM, RANGE_MIN_MM};
use crate::error::{Error, Result};
use crate::fusion::FusionCommand;
use crate::geometry::{normalize_angle, Rect, Segment, Vec2};
use crate::global::LanePath;

/// Planar drone state. Heading in radians, counterclockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DronePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    #[serde(default = "DronePose::default_radius")]
    pub radius: f64,
}

impl DronePose {
    /// 10 cm airframe.
    pub const DEFAULT_RADIUS: f64 = 0.05;

    fn default_radius() -> f64 {
        Self::DEFAULT_RADIUS
    }

    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading), radius: Self::DEFAULT_RADIUS }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn mirror_y(&self) -> Self {
        Self { x: self.x, y: -self.y, heading: normalize_angle(-self.heading), radius: self.radius }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Straight,
    Turn,
}

impl Section {
    pub fn as_str(self) -> &'static str {
        match self {
            Section::Straight => "straight",
            Section::Turn => "turn",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionRegion {
    pub label: Section,
    pub area: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub walls: Vec<Segment>,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    pub lane: LanePath,
    pub start_pose: DronePose,
    pub end_region: Rect,
    pub sections: Vec<SectionRegion>,
}

impl World {
    /// Checks that the start pose is free and the lane ends inside the goal.
    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::InvalidWorld("no section regions".into()));
        }
        if self.disc_collides(self.start_pose.position(), self.start_pose.radius) {
            return Err(Error::InvalidWorld("start pose is in collision".into()));
        }
        let last = *self.lane.waypoints().last().expect("lane has waypoints");
        if !self.end_region.contains(last) {
            return Err(Error::InvalidWorld("lane does not end inside the end region".into()));
        }
        if self.end_region.contains(self.start_pose.position()) {
            return Err(Error::InvalidWorld("start pose lies inside the end region".into()));
        }
        Ok(())
    }

    /// Every reflecting segment: walls plus obstacle outlines.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.walls.iter().copied().chain(self.obstacles.iter().flat_map(|o| o.edges()))
    }

    /// Nearest hit along a unit-direction ray.
    pub fn ray_cast(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        self.segments().filter_map(|s| s.ray_hit(origin, dir)).min_by(f64::total_cmp)
    }

    /// Disc of radius `r` at `c` overlaps a wall or an obstacle.
    pub fn disc_collides(&self, c: Vec2, r: f64) -> bool {
        self.walls.iter().any(|w| w.distance_to(c) < r)
            || self.obstacles.iter().any(|o| o.distance_to(c) < r)
    }

    /// Section label at `p`. Turn regions are tested first so shared
    /// boundaries belong to the turn; points outside every region take the
    /// label of the nearest one.
    pub fn section_at(&self, p: Vec2) -> Section {
        let mut regions: Vec<&SectionRegion> = self.sections.iter().collect();
        regions.sort_by_key(|r| r.label != Section::Turn);
        if let Some(r) = regions.iter().find(|r| r.area.contains(p)) {
            return r.label;
        }
        regions
            .iter()
            .min_by(|a, b| a.area.distance_to(p).total_cmp(&b.area.distance_to(p)))
            .map_or(Section::Straight, |r| r.label)
    }

    /// Reflection across the x axis; turns a right turn into a left one.
    pub fn mirror_y(&self) -> Self {
        Self {
            walls: self.walls.iter().map(Segment::mirror_y).collect(),
            obstacles: self.obstacles.iter().map(Rect::mirror_y).collect(),
            lane: self.lane.mirror_y(),
            start_pose: self.start_pose.mirror_y(),
            end_region: self.end_region.mirror_y(),
            sections: self
                .sections
                .iter()
                .map(|s| SectionRegion { label: s.label, area: s.area.mirror_y() })
                .collect(),
        }
    }
}

/// Multizone ToF sensor model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TofModel {
    pub fov_deg: f64,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub rate_hz: f64,
    pub noise_sigma_mm: f64,
}

impl Default for TofModel {
    fn default() -> Self {
        Self { fov_deg: 65.0, range_min_m: 0.2, range_max_m: 4.0, rate_hz: 15.0, noise_sigma_mm: 20.0 }
    }
}

impl TofModel {
    /// Ray angle of `col` relative to the heading; column 0 is leftmost.
    pub fn column_angle(&self, col: usize) -> f64 {
        let step = self.fov_deg / GRID as f64;
        (self.fov_deg / 2.0 - (col as f64 + 0.5) * step).to_radians()
    }

    /// Control period, s.
    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }
}

/// One planar scan replicated over all rows. Each cell gets independent
/// Gaussian noise; rays with no return inside range read max range and are
/// flagged invalid. Always draws 64 noise samples, so the RNG stream does not
/// depend on the geometry.
pub fn sense_tof<R: Rng + ?Sized>(
    world: &World,
    pose: &DronePose,
    model: &TofModel,
    tick: u64,
    rng: &mut R,
) -> DepthFrame {
    let origin = pose.position();
    let noise = Normal::new(0.0, model.noise_sigma_mm.max(0.0)).expect("sigma is finite");
    let min_mm = (model.range_min_m * 1000.0).max(RANGE_MIN_MM as f64);
    let max_mm = (model.range_max_m * 1000.0).min(RANGE_MAX_MM as f64);

    let mut ranges = [f64::INFINITY; GRID];
    for (col, r) in ranges.iter_mut().enumerate() {
        let dir = Vec2::from_angle(pose.heading + model.column_angle(col));
        if let Some(t) = world.ray_cast(origin, dir) {
            *r = t * 1000.0;
        }
    }

    let mut cells = [[RANGE_MAX_MM; GRID]; GRID];
    let mut valid = 0u64;
    for (row, out) in cells.iter_mut().enumerate() {
        for (col, cell) in out.iter_mut().enumerate() {
            let n = noise.sample(rng);
            let truth = ranges[col];
            if truth > max_mm {
                *cell = RANGE_MAX_MM;
            } else {
                *cell = (truth + n).round().clamp(min_mm, max_mm) as u16;
                valid |= 1 << (row * GRID + col);
            }
        }
    }
    DepthFrame::new(cells, valid, tick).expect("readings are clamped into range")
}

/// Unicycle update, yaw applied before translation.
pub fn step_dynamics(pose: &DronePose, cmd: &FusionCommand, dt: f64) -> DronePose {
    let heading = normalize_angle(pose.heading + cmd.yaw_rate.to_radians() * dt);
    DronePose {
        x: pose.x + cmd.v_f * heading.cos() * dt,
        y: pose.y + cmd.v_f * heading.sin() * dt,
        heading,
        radius: pose.radius,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Success,
    Collision,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Success => "success",
            Status::Collision => "collision",
            Status::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Collision beats success, success beats timeout.
pub fn check_status(world: &World, pose: &DronePose, tick: u64, dt: f64, t_max: f64) -> Status {
    let c = pose.position();
    if world.disc_collides(c, pose.radius) {
        Status::Collision
    } else if world.end_region.contains(c) {
        Status::Success
    } else if tick as f64 * dt > t_max + 1e-9 {
        Status::Timeout
    } else {
        Status::Running
    }
}

/// Like [`check_status`], and also flags a center path that crossed a wall or
/// obstacle edge between two ticks.
pub fn check_transition(
    world: &World,
    from: &DronePose,
    to: &DronePose,
    tick: u64,
    dt: f64,
    t_max: f64,
) -> Status {
    let path = Segment::new(from.position(), to.position());
    if world.segments().any(|s| s.intersects(&path)) {
        return Status::Collision;
    }
    check_status(world, to, tick, dt, t_max)
}
