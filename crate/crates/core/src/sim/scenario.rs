use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DronePose, Section, SectionRegion, World};
use crate::error::{Error, Result};
use crate::geometry::{Rect, Segment, Vec2};
use crate::global::LanePath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 3] = [ScenarioId::S1, ScenarioId::S2, ScenarioId::S3];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::S1 => "S1",
            ScenarioId::S2 => "S2",
            ScenarioId::S3 => "S3",
        }
    }

    pub fn number(self) -> u8 {
        match self {
            ScenarioId::S1 => 1,
            ScenarioId::S2 => 2,
            ScenarioId::S3 => 3,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" | "1" => Ok(ScenarioId::S1),
            "S2" | "2" => Ok(ScenarioId::S2),
            "S3" | "3" => Ok(ScenarioId::S3),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

/// Corridor layout, in meters. The corridor runs along +x from START, the
/// lane bends 90° into a side leg, and the main corridor carries on past
/// the junction into a dead end that closes in a wedge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    pub corridor_width: f64,
    /// START to the near edge of the junction.
    pub straight_len: f64,
    /// Side-leg length measured from the junction edge.
    pub post_turn_len: f64,
    /// Depth of the goal band at the end of the side leg.
    pub end_len: f64,
    /// How far the side leg continues past the goal band.
    pub leg_overrun: f64,
    /// Wall behind START.
    pub back_margin: f64,
    /// Main corridor beyond the junction, up to the wedge base.
    pub dead_end_len: f64,
    /// Depth of the wedge closing the dead end (0 = flat wall).
    pub dead_end_apex: f64,
    pub obstacle_count: usize,
    /// Extent across the corridor.
    pub obstacle_width: f64,
    /// Extent along the corridor.
    pub obstacle_depth: f64,
    /// Lateral offset of obstacle centers from the centerline; the first
    /// obstacle sits on the left and they alternate. At half the width the
    /// inner face is flush with the lane, so a lane follower clips it.
    pub obstacle_offset: f64,
    pub obstacle_first: f64,
    pub obstacle_spacing: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            corridor_width: 3.0,
            straight_len: 15.0,
            post_turn_len: 8.0,
            end_len: 1.0,
            leg_overrun: 4.0,
            back_margin: 1.0,
            dead_end_len: 3.0,
            dead_end_apex: 1.5,
            obstacle_count: 4,
            obstacle_width: 1.0,
            obstacle_depth: 0.3,
            obstacle_offset: 0.5,
            obstacle_first: 2.5,
            obstacle_spacing: 3.4,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("corridor_width", self.corridor_width),
            ("straight_len", self.straight_len),
            ("post_turn_len", self.post_turn_len),
            ("end_len", self.end_len),
            ("back_margin", self.back_margin),
            ("obstacle_width", self.obstacle_width),
            ("obstacle_depth", self.obstacle_depth),
            ("obstacle_spacing", self.obstacle_spacing),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("geometry.{name}"), format!("must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("dead_end_len", self.dead_end_len),
            ("dead_end_apex", self.dead_end_apex),
            ("leg_overrun", self.leg_overrun),
            ("obstacle_first", self.obstacle_first),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("geometry.{name}"), format!("must be >= 0, got {v}")));
            }
        }
        if self.end_len >= self.post_turn_len {
            return Err(Error::config("geometry.end_len", "must be shorter than post_turn_len"));
        }
        Ok(())
    }
}

/// S1: obstacle-free right turn. S2: S1 plus the obstacle row. S3: S2
/// reflected across the corridor axis (left turn).
pub fn build_scenario(id: ScenarioId, p: &ScenarioParams) -> Result<World> {
    p.validate()?;
    let world = match id {
        ScenarioId::S1 => right_turn(p, false),
        ScenarioId::S2 => right_turn(p, true),
        ScenarioId::S3 => right_turn(p, true).mirror_y(),
    };
    world.validate()?;
    Ok(world)
}

fn right_turn(p: &ScenarioParams, with_obstacles: bool) -> World {
    let h = p.corridor_width / 2.0;
    let l = p.straight_len;
    let w = p.corridor_width;
    let junction_far = l + w;
    let base = junction_far + p.dead_end_len;
    let goal_far = -h - p.post_turn_len;
    let leg_bottom = goal_far - p.leg_overrun;
    let back = -p.back_margin;
    let v = Vec2::new;
    let seg = |a: Vec2, b: Vec2| Segment::new(a, b);

    let mut walls = vec![
        seg(v(back, -h), v(back, h)),
        seg(v(back, h), v(base, h)),
        seg(v(back, -h), v(l, -h)),
        seg(v(l, -h), v(l, leg_bottom)),
        seg(v(l, leg_bottom), v(junction_far, leg_bottom)),
        seg(v(junction_far, leg_bottom), v(junction_far, -h)),
    ];
    if p.dead_end_len > 0.0 {
        walls.push(seg(v(junction_far, -h), v(base, -h)));
    }
    if p.dead_end_apex > 0.0 {
        let apex = v(base + p.dead_end_apex, 0.0);
        walls.push(seg(v(base, h), apex));
        walls.push(seg(apex, v(base, -h)));
    } else {
        walls.push(seg(v(base, h), v(base, -h)));
    }

    let obstacles = if with_obstacles {
        (0..p.obstacle_count)
            .map(|i| {
                let side = if i % 2 == 0 { 1.0 } else { -1.0 };
                Rect::new(
                    v(p.obstacle_first + i as f64 * p.obstacle_spacing, side * p.obstacle_offset),
                    v(p.obstacle_depth / 2.0, p.obstacle_width / 2.0),
                    0.0,
                )
            })
            .collect()
    } else {
        Vec::new()
    };

    let center_x = l + h;
    let goal_y = goal_far + p.end_len / 2.0;
    let lane = LanePath::new(vec![v(0.0, 0.0), v(center_x, 0.0), v(center_x, goal_y)])
        .expect("corridor lane is a simple polyline");

    let sections = vec![
        SectionRegion { label: Section::Straight, area: Rect::from_bounds(back, -h, l, h) },
        SectionRegion {
            label: Section::Turn,
            area: Rect::from_bounds(l, -h, base + p.dead_end_apex, h),
        },
        SectionRegion { label: Section::Turn, area: Rect::from_bounds(l, leg_bottom, junction_far, -h) },
    ];

    World {
        walls,
        obstacles,
        lane,
        start_pose: DronePose::new(0.0, 0.0, 0.0),
        end_region: Rect::from_bounds(l, goal_far, junction_far, goal_far + p.end_len),
        sections,
    }
}
